"""Anisotropic Rabi Hamiltonian, parity-resolved spectrum and level crossings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import fockspace as fs
from .errors import EigensolverError

#: Energy window (units of omega) below which two levels count as degenerate.
DEGENERACY_TOL = 1e-6
PARITY_TOL = 1e-6
RESIDUAL_TOL = 1e-9
MAX_CROSSING_LEVELS = 8


def production_cutoff(lambda_max: float, omega: float = 1.0) -> int:
    """Fock cutoff used when none is given explicitly.

    ``ceil(12 + max(6 x**2, 9 x))`` with ``x = lambda_max / omega``.  The
    quadratic term covers the coherent displacement of deep-strong
    coupling ground states; the linear term covers ``x ~ 1`` where the
    quadratic alone leaves the ten lowest levels converged only to 1e-7.
    """
    x = abs(lambda_max) / omega
    return int(math.ceil(12 + max(6.0 * x * x, 9.0 * x) - 1e-12))


@dataclass(frozen=True)
class ModelParams:
    """One instance of the anisotropic Rabi model, in units where k_B = hbar = 1."""

    omega: float = 1.0
    delta: float = 1.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    fock_cutoff: int | None = None

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        for name in ("delta", "lambda1", "lambda2"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and non-negative, got {value}")
        if self.fock_cutoff is not None:
            fs.HilbertConfig(self.fock_cutoff)

    @property
    def lambda_max(self) -> float:
        return max(self.lambda1, self.lambda2)

    @property
    def hilbert(self) -> fs.HilbertConfig:
        if self.fock_cutoff is not None:
            return fs.HilbertConfig(self.fock_cutoff)
        return fs.HilbertConfig(production_cutoff(self.lambda_max, self.omega))

    def with_cutoff(self, fock_cutoff: int | None) -> "ModelParams":
        return replace(self, fock_cutoff=fock_cutoff)

    def with_coupling(self, value: float, swept: str = "lambda1", ratio: float = 0.0) -> "ModelParams":
        """Set the swept coupling to ``value`` and the other one to ``ratio * value``."""
        if swept == "lambda1":
            return replace(self, lambda1=value, lambda2=ratio * value)
        if swept == "lambda2":
            return replace(self, lambda2=value, lambda1=ratio * value)
        raise ValueError(f"swept must be 'lambda1' or 'lambda2', got {swept!r}")


@dataclass(frozen=True)
class SpectralData:
    """Ascending eigensystem with exact parity labels.

    ``states[:, k]`` is the eigenvector of ``energies[k]``; its
    largest-magnitude entry is real and positive.
    """

    energies: np.ndarray
    states: np.ndarray
    parities: np.ndarray
    config: fs.HilbertConfig
    params: ModelParams | None = None
    residual: float = field(default=0.0, compare=False)

    @property
    def dim(self) -> int:
        return self.energies.size

    def hamiltonian(self) -> np.ndarray:
        """``H`` reassembled from the eigensystem."""
        return (self.states * self.energies) @ self.states.conj().T

    def to_dressed(self, op: np.ndarray) -> np.ndarray:
        return self.states.conj().T @ op @ self.states

    def to_bare(self, op: np.ndarray) -> np.ndarray:
        return self.states @ op @ self.states.conj().T


@dataclass(frozen=True)
class CrossingRecord:
    level_pair: tuple[int, int]
    coupling_value: float
    gap: float
    is_true_crossing: bool


def build_hamiltonian(p: ModelParams, cfg: fs.HilbertConfig | None = None) -> np.ndarray:
    cfg = cfg or p.hilbert
    n = cfg.fock_cutoff
    a = fs.embed(fs.qubit_operator("id"), fs.annihilation(n))
    ad = a.conj().T
    sp = fs.embed(fs.qubit_operator("sp"), np.eye(n))
    sm = sp.conj().T
    sz = fs.embed(fs.qubit_operator("sz"), np.eye(n))
    h = (
        p.omega * ad @ a
        + 0.5 * p.delta * sz
        + p.lambda1 * (a @ sp + ad @ sm)
        + p.lambda2 * (ad @ sp + a @ sm)
    )
    return 0.5 * (h + h.conj().T)


def excitation_number(cfg: fs.HilbertConfig) -> np.ndarray:
    n = cfg.fock_cutoff
    return fs.embed(np.eye(2), fs.number(n)) + fs.embed(
        fs.qubit_operator("sp") @ fs.qubit_operator("sm"), np.eye(n)
    )


def parity_diagonal(cfg: fs.HilbertConfig) -> np.ndarray:
    n = cfg.fock_cutoff
    photons = np.tile(np.arange(n), 2)
    excited = np.repeat([1, 0], n)
    return np.where((photons + excited) % 2 == 0, 1.0, -1.0)


def parity_operator(cfg: fs.HilbertConfig) -> np.ndarray:
    """``exp(i pi n_exc)`` as an exact diagonal of +-1."""
    return np.diag(parity_diagonal(cfg)).astype(complex)


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    pivot = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivot) / pivot)[None, :]


def eigensolve(h: np.ndarray, cfg: fs.HilbertConfig, params: ModelParams | None = None) -> SpectralData:
    """Full eigensystem of a parity-symmetric Hamiltonian.

    The two parity sectors are diagonalised separately, so labels are exact
    even at degeneracies between opposite-parity levels.  If ``h`` does
    not commute with the parity operator the full matrix is diagonalised
    and labels come from ``<phi|pi|phi>``.
    """
    h = np.asarray(h, dtype=complex)
    dim = cfg.total_dim
    if h.shape != (dim, dim):
        raise fs.DimensionError(f"Hamiltonian shape {h.shape} does not match {dim}x{dim}")
    if not fs.is_hermitian(h, fs.HERMITIAN_TOL * max(1.0, float(np.max(np.abs(h))))):
        raise ValueError(f"Hamiltonian is not Hermitian (max |H - H^dag| = {fs.hermiticity_error(h):.2e})")
    pdiag = parity_diagonal(cfg)
    even = np.flatnonzero(pdiag > 0)
    odd = np.flatnonzero(pdiag < 0)
    scale = max(1.0, float(np.max(np.abs(h))))
    try:
        if np.max(np.abs(h[np.ix_(even, odd)])) <= 1e-12 * scale:
            energies = np.empty(dim)
            states = np.zeros((dim, dim), dtype=complex)
            parities = np.empty(dim)
            col = 0
            for sector, sign in ((even, 1.0), (odd, -1.0)):
                e, v = np.linalg.eigh(h[np.ix_(sector, sector)])
                m = e.size
                energies[col:col + m] = e
                states[np.ix_(sector, np.arange(col, col + m))] = v
                parities[col:col + m] = sign
                col += m
        else:
            energies, states = np.linalg.eigh(h)
            expect = np.einsum("ik,i,ik->k", states.conj(), pdiag, states).real
            if np.any(np.abs(expect) < 1 - PARITY_TOL):
                raise EigensolverError("eigenvectors are not parity eigenstates")
            parities = np.sign(expect)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"dense eigensolve failed: {exc}") from exc

    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    states = _fix_phases(states[:, order])
    parities = parities[order]

    norm_h = max(abs(energies[0]), abs(energies[-1]), 1e-300)
    residual = float(np.max(np.linalg.norm(h @ states - states * energies, axis=0)))
    if residual > RESIDUAL_TOL * norm_h:
        raise EigensolverError(f"eigen-residual {residual:.3e} exceeds {RESIDUAL_TOL:g} * ||H||")
    return SpectralData(energies, states, parities.astype(int), cfg, params, residual)


def solve(p: ModelParams) -> SpectralData:
    """Hamiltonian plus eigensolve at the cutoff carried by ``p``."""
    cfg = p.hilbert
    return eigensolve(build_hamiltonian(p, cfg), cfg, p)


def build_x_plus(s: SpectralData) -> np.ndarray:
    """Dressed positive-frequency field operator, returned in the bare basis.

    Only transitions from a higher level ``k`` to a lower level ``j`` are
    kept, each weighted by ``-i (E_k - E_j)``; exactly degenerate pairs
    therefore drop out.
    """
    n = s.config.fock_cutoff
    a = fs.embed(np.eye(2), fs.annihilation(n))
    x = s.to_dressed(a + a.conj().T)
    gaps = s.energies[None, :] - s.energies[:, None]
    dressed = np.triu(-1j * gaps * x, k=1)
    return s.to_bare(dressed)


def _levels_along(base: ModelParams, grid, swept, ratio, levels):
    out_e = np.empty((len(grid), levels))
    out_p = np.empty((len(grid), levels), dtype=int)
    for i, lam in enumerate(grid):
        s = solve(base.with_coupling(float(lam), swept, ratio))
        out_e[i] = s.energies[:levels]
        out_p[i] = s.parities[:levels]
    return out_e, out_p


def _infer_ratio(p: ModelParams, swept: str) -> float:
    main, other = (p.lambda1, p.lambda2) if swept == "lambda1" else (p.lambda2, p.lambda1)
    return other / main if main > 0 else 0.0


def _sweep_base(p: ModelParams, grid: np.ndarray, ratio: float) -> ModelParams:
    if p.fock_cutoff is not None:
        return p
    # one cutoff for the whole sweep keeps E_k(lambda) smooth
    return p.with_cutoff(production_cutoff(float(np.max(grid)) * max(1.0, ratio), p.omega))


def detect_crossings(
    p: ModelParams,
    sweep,
    levels: int = 2,
    swept: str = "lambda1",
    ratio: float | None = None,
    tol: float = DEGENERACY_TOL,
) -> list[CrossingRecord]:
    """Gap minima between adjacent levels along a coupling sweep.

    The other coupling follows ``ratio * swept`` (taken from ``p`` when not
    given).  Every interior grid minimum of ``E_{k+1} - E_k`` is refined by
    golden-section search inside its two neighbouring cells; it is a true
    crossing when the refined gap is below ``tol * omega`` and the two
    levels exchange parity across it.
    """
    grid = np.asarray(sweep, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("coupling grid too coarse: need at least 3 points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("coupling grid must be strictly ascending")
    if not 2 <= levels <= MAX_CROSSING_LEVELS:
        raise ValueError(f"levels must be in 2..{MAX_CROSSING_LEVELS}, got {levels}")
    if ratio is None:
        ratio = _infer_ratio(p, swept)
    base = _sweep_base(p, grid, ratio)
    energies, _ = _levels_along(base, grid, swept, ratio, levels)

    records = []
    for k in range(levels - 1):
        gap = energies[:, k + 1] - energies[:, k]
        for i in range(1, grid.size - 1):
            if not (gap[i] <= gap[i - 1] and gap[i] < gap[i + 1]):
                continue
            lam, g = _refine_gap(base, swept, ratio, k, grid[i - 1], grid[i], grid[i + 1])
            true = False
            if g < tol * base.omega:
                h = 0.25 * min(grid[i] - grid[i - 1], grid[i + 1] - grid[i])
                _, left = _levels_along(base, [max(lam - h, 0.0)], swept, ratio, k + 2)
                _, right = _levels_along(base, [lam + h], swept, ratio, k + 2)
                true = bool(
                    left[0, k] != left[0, k + 1]
                    and left[0, k] == right[0, k + 1]
                    and left[0, k + 1] == right[0, k]
                )
            records.append(CrossingRecord((k, k + 1), float(lam), float(g), true))
    records.sort(key=lambda r: (r.coupling_value, r.level_pair))
    return records


def _refine_gap(base, swept, ratio, k, a, b, c):
    def gap(lam):
        e = solve(base.with_coupling(float(lam), swept, ratio)).energies
        return float(e[k + 1] - e[k])

    try:
        res = minimize_scalar(gap, bracket=(a, b, c), method="golden", tol=1e-12)
        if not a <= res.x <= c:
            raise ValueError("golden search left the bracket")
    except ValueError:
        res = minimize_scalar(gap, bounds=(a, c), method="bounded", options={"xatol": 1e-12})
    return float(res.x), max(float(res.fun), 0.0)


@dataclass
class SpectrumTable:
    couplings: np.ndarray
    energies: np.ndarray
    parities: np.ndarray
    relative: bool = True
    inserted: list = field(default_factory=list)
    fock_cutoff: int = 0


def spectrum_table(
    p: ModelParams,
    grid,
    levels: int,
    swept: str = "lambda1",
    ratio: float | None = None,
    relative: bool = True,
    refine_crossings: bool = True,
) -> SpectrumTable:
    """Lowest ``levels`` energies and parities along a sweep.

    With ``refine_crossings`` the couplings of true crossings among the
    tabulated levels are added as extra rows, so closures are resolved
    beyond the grid spacing.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty coupling grid")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if ratio is None:
        ratio = _infer_ratio(p, swept)
    base = _sweep_base(p, grid, ratio)
    extra = []
    if refine_crossings and levels >= 2 and grid.size >= 3:
        found = detect_crossings(base, grid, min(levels, MAX_CROSSING_LEVELS), swept, ratio)
        extra = [r.coupling_value for r in found if r.is_true_crossing]
    couplings = np.unique(np.concatenate([grid, extra])) if extra else grid
    energies, parities = _levels_along(base, couplings, swept, ratio, levels)
    if relative:
        energies = energies - energies[:, :1]
    return SpectrumTable(couplings, energies, parities, relative, extra, base.hilbert.fock_cutoff)
