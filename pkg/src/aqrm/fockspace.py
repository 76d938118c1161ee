"""Operators on the composite two-level (qubit) x truncated boson space.

Factor ordering is qubit first everywhere: a composite basis index is
``i_qubit * fock_cutoff + n`` with the qubit basis ordered ``(|e>, |g>)``
so that ``sz |e> = +|e>``.  All operators are dense complex ``ndarray``s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

#: Order of the tensor factors in every composite operator.
FACTOR_ORDER = ("qubit", "boson")
QUBIT_DIM = 2

HERMITIAN_TOL = 1e-12
DENSITY_TOL = 1e-10


@dataclass(frozen=True)
class HilbertConfig:
    """Truncation of the boson factor: Fock states ``0 .. fock_cutoff - 1``."""

    fock_cutoff: int

    def __post_init__(self):
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ValueError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff}")
        object.__setattr__(self, "fock_cutoff", int(self.fock_cutoff))

    @property
    def total_dim(self) -> int:
        return QUBIT_DIM * self.fock_cutoff


def _cutoff(cfg) -> int:
    return cfg.fock_cutoff if isinstance(cfg, HilbertConfig) else HilbertConfig(cfg).fock_cutoff


def annihilation(cfg: HilbertConfig | int) -> np.ndarray:
    """Boson lowering operator on the Fock factor alone, ``<n-1|a|n> = sqrt(n)``."""
    n = _cutoff(cfg)
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def number(cfg: HilbertConfig | int) -> np.ndarray:
    n = _cutoff(cfg)
    return np.diag(np.arange(n, dtype=float)).astype(complex)


_QUBIT = {
    "id": np.eye(2),
    "sx": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "sy": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "sz": np.diag([1.0, -1.0]),
    "sp": np.array([[0.0, 1.0], [0.0, 0.0]]),
    "sm": np.array([[0.0, 0.0], [1.0, 0.0]]),
}


def qubit_operator(which: str) -> np.ndarray:
    """Pauli-type 2x2 matrix in the ``(|e>, |g>)`` ordering.

    ``which`` is one of ``sx, sy, sz, sp, sm, id``; ``sp = (sx + i sy)/2``
    raises ``|g>`` to ``|e>``.
    """
    try:
        return np.array(_QUBIT[which], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown qubit operator {which!r}; expected one of {sorted(_QUBIT)}") from None


def embed(qubit_part: np.ndarray, boson_part: np.ndarray) -> np.ndarray:
    """Lift ``qubit_part (x) boson_part`` to the composite space (qubit first)."""
    q = np.asarray(qubit_part)
    b = np.asarray(boson_part)
    if q.shape != (2, 2):
        raise DimensionError(f"qubit factor must be 2x2, got {q.shape}")
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionError(f"boson factor must be square, got {b.shape}")
    return np.kron(q, b).astype(complex)


def composite_cutoff(rho: np.ndarray) -> int:
    """Fock cutoff of a composite operator, validating its shape."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"operator must be square, got {rho.shape}")
    dim = rho.shape[0]
    if dim % QUBIT_DIM or dim < 2 * QUBIT_DIM:
        raise DimensionError(f"dimension {dim} is not 2 x fock_cutoff with fock_cutoff >= 2")
    return dim // QUBIT_DIM


def partial_trace(rho: np.ndarray, keep: str) -> np.ndarray:
    """Reduced density matrix on ``keep`` (``"qubit"`` or ``"boson"``)."""
    n = composite_cutoff(rho)
    r = np.asarray(rho).reshape(QUBIT_DIM, n, QUBIT_DIM, n)
    if keep == "qubit":
        return np.einsum("iaja->ij", r)
    if keep == "boson":
        return np.einsum("iaib->ab", r)
    raise ValueError(f"keep must be 'qubit' or 'boson', got {keep!r}")


def partial_transpose(rho: np.ndarray, over: str = "qubit") -> np.ndarray:
    """Transpose the qubit indices only; the result need not be positive."""
    if over != "qubit":
        raise ValueError("partial transpose is defined over the qubit factor only")
    n = composite_cutoff(rho)
    r = np.asarray(rho).reshape(QUBIT_DIM, n, QUBIT_DIM, n)
    return r.transpose(2, 1, 0, 3).reshape(QUBIT_DIM * n, QUBIT_DIM * n)


def hermiticity_error(op: np.ndarray) -> float:
    op = np.asarray(op)
    return float(np.max(np.abs(op - op.conj().T))) if op.size else 0.0


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_error(op) <= tol


def is_density_matrix(rho: np.ndarray, tol: float = DENSITY_TOL) -> bool:
    """Hermitian, unit trace and positive semidefinite within ``tol``."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if hermiticity_error(rho) > max(tol, HERMITIAN_TOL):
        return False
    if abs(np.trace(rho) - 1.0) > tol:
        return False
    herm = 0.5 * (rho + rho.conj().T)
    return bool(np.linalg.eigvalsh(herm)[0] >= -tol)


def projector(state: np.ndarray) -> np.ndarray:
    v = np.asarray(state, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def basis_state(cfg: HilbertConfig | int, qubit: str, n: int) -> np.ndarray:
    """Composite basis ket ``|qubit, n>`` with ``qubit`` in ``{"e", "g"}``."""
    nc = _cutoff(cfg)
    if qubit not in ("e", "g"):
        raise ValueError(f"qubit label must be 'e' or 'g', got {qubit!r}")
    if not 0 <= n < nc:
        raise ValueError(f"Fock index {n} outside 0..{nc - 1}")
    psi = np.zeros(QUBIT_DIM * nc, dtype=complex)
    psi[(0 if qubit == "e" else 1) * nc + n] = 1.0
    return psi


def fock_state(cfg: HilbertConfig | int, n: int) -> np.ndarray:
    """Single-mode Fock ket on the boson factor."""
    nc = _cutoff(cfg)
    psi = np.zeros(nc, dtype=complex)
    psi[n] = 1.0
    return psi
