"""Dressed-basis Markovian master equation for the anisotropic Rabi model.

Density matrices are vectorised row-major (``rho.ravel()``), for which
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.

Jump operators connect eigenstates ``|phi_j><phi_k|`` with ``E_j > E_k``;
each bath ``u`` (boson field through ``a + a^dag``, qubit through
``sp + sm``) drives downward jumps at ``Gamma (1 + n_u)`` and upward jumps at
``Gamma n_u``, where ``Gamma = gamma_u(gap) |S_u|^2`` with an Ohmic
``gamma_u(gap) = pi alpha gap exp(-gap / omega_c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from . import fockspace as fs
from .errors import IntegrationError, SteadyStateError
from .spectrum import DEGENERACY_TOL, SpectralData

BATHS = ("boson", "qubit")
TRACE_DRIFT_TOL = 1e-8
POSITIVITY_TOL = 1e-8
# dense SVD is used for the null space up to this superoperator size
SVD_MAX_DIM = 1600


@dataclass(frozen=True)
class BathParams:
    """Two Ohmic baths, one on the field and one on the qubit.

    ``alpha_boson`` / ``alpha_qubit`` override ``alpha`` per bath; setting one
    of them to zero detaches that bath.
    """

    alpha: float = 0.01
    omega_c: float = 50.0
    T_boson: float = 0.1
    T_qubit: float = 0.1
    alpha_boson: float | None = None
    alpha_qubit: float | None = None

    def __post_init__(self):
        for name in ("alpha", "alpha_boson", "alpha_qubit"):
            v = getattr(self, name)
            if v is not None and not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")
        if not (self.T_boson >= 0 and self.T_qubit >= 0):
            raise ValueError("temperatures must be non-negative")

    @classmethod
    def equilibrium(cls, T: float, alpha: float = 0.01, omega_c: float = 50.0) -> "BathParams":
        return cls(alpha=alpha, omega_c=omega_c, T_boson=T, T_qubit=T)

    def coupling(self, bath: str) -> float:
        override = self.alpha_boson if bath == "boson" else self.alpha_qubit
        return self.alpha if override is None else override

    def temperature(self, bath: str) -> float:
        return self.T_boson if bath == "boson" else self.T_qubit

    @property
    def is_equilibrium(self) -> bool:
        return self.T_boson == self.T_qubit

    @property
    def is_dissipative(self) -> bool:
        return any(self.coupling(b) > 0 for b in BATHS)


def bose_einstein(gap, T: float):
    """Thermal occupation ``1 / (exp(gap / T) - 1)``; zero at ``T = 0``."""
    gap = np.asarray(gap, dtype=float)
    if np.any(gap <= 0):
        raise ValueError("Bose-Einstein occupation needs a strictly positive gap")
    if T < 0:
        raise ValueError("temperature must be non-negative")
    if T == 0:
        out = np.zeros_like(gap)
    else:
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(gap / T)
    return float(out) if out.ndim == 0 else out


def ohmic_rate(gap, bath: BathParams, which: str = "boson"):
    """Ohmic spectral weight ``pi alpha gap exp(-gap / omega_c)``."""
    gap = np.asarray(gap, dtype=float)
    if np.any(gap < 0):
        raise ValueError("spectral weight is defined for non-negative gaps")
    out = np.pi * bath.coupling(which) * gap * np.exp(-np.abs(gap) / bath.omega_c)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BathRates:
    """Per-bath tables indexed ``[j, k]``; only ``j > k`` with a resolved gap is used."""

    coefficients: np.ndarray
    spectral_weight: np.ndarray
    rates: np.ndarray
    occupations: np.ndarray
    temperature: float


@dataclass(frozen=True)
class RateTable:
    gaps: np.ndarray
    baths: dict
    mask: np.ndarray

    def transition_matrix(self) -> np.ndarray:
        """``W[j, k]``: total rate of the jump ``k -> j`` summed over baths."""
        w = np.zeros_like(self.gaps)
        for b in self.baths.values():
            up = b.rates * b.occupations
            down = b.rates * (1.0 + b.occupations)
            w += up + down.T
        return w

    @property
    def max_rate(self) -> float:
        return float(max(np.max(b.rates) for b in self.baths.values()))


def _bath_coupling_operator(bath: str, n: int) -> np.ndarray:
    if bath == "boson":
        a = fs.annihilation(n)
        return fs.embed(np.eye(2), a + a.conj().T)
    return fs.embed(fs.qubit_operator("sp") + fs.qubit_operator("sm"), np.eye(n))


def build_rate_table(s: SpectralData, bath: BathParams) -> RateTable:
    """Gaps, transition coefficients, rates and occupations for both baths."""
    e = s.energies
    gaps = e[:, None] - e[None, :]
    omega = s.params.omega if s.params is not None else 1.0
    mask = np.tril(np.ones_like(gaps, dtype=bool), k=-1) & (gaps > DEGENERACY_TOL * omega)
    safe_gap = np.where(mask, gaps, 1.0)
    tables = {}
    for name in BATHS:
        coeff = s.to_dressed(_bath_coupling_operator(name, s.config.fock_cutoff))
        weight = np.where(mask, ohmic_rate(np.where(mask, gaps, 0.0), bath, name), 0.0)
        rates = weight * np.abs(coeff) ** 2
        occ = np.where(mask, bose_einstein(safe_gap, bath.temperature(name)), 0.0)
        tables[name] = BathRates(coeff, weight, rates, occ, bath.temperature(name))
    return RateTable(gaps, tables, mask)


@dataclass(eq=False)
class LindbladGenerator:
    """Full generator ``-i[H, .] + dissipator``.

    ``apply`` works in the dressed basis with ``O(D^3)`` cost; the dense
    ``D^2 x D^2`` matrix is only materialised on first access of
    ``superoperator``.
    """

    spectral: SpectralData
    bath: BathParams
    rate_table: RateTable
    transitions: np.ndarray = field(repr=False)
    decay: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spectral.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        s = self.spectral
        r = s.to_dressed(np.asarray(rho, dtype=complex))
        e = s.energies
        out = -1j * (e[:, None] - e[None, :]) * r
        out -= 0.5 * (self.decay[:, None] + self.decay[None, :]) * r
        out[np.diag_indices_from(out)] += self.transitions @ np.diagonal(r)
        return s.to_bare(out)

    @cached_property
    def superoperator(self) -> np.ndarray:
        s = self.spectral
        d = self.dim
        v = s.states
        # M[(a, b), j] = v_j[a] conj(v_j[b]) carries |phi_j><phi_j| into vec form
        m = np.einsum("aj,bj->abj", v, v.conj()).reshape(d * d, d)
        sup = (m @ self.transitions.astype(complex)) @ m.conj().T
        del m
        k = (v * self.decay) @ v.conj().T
        g = -1j * s.hamiltonian() - 0.5 * k
        view = sup.reshape(d, d, d, d)
        # G rho + rho G^dag  ->  kron(G, I) + kron(I, conj(G))
        for b in range(d):
            view[:, b, :, b] += g
        gc = g.conj()
        for a in range(d):
            view[a, :, a, :] += gc
        return sup

    def hamiltonian_part(self) -> np.ndarray:
        h = self.spectral.hamiltonian()
        eye = np.eye(self.dim)
        return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def build_generator(s: SpectralData, bath: BathParams) -> LindbladGenerator:
    table = build_rate_table(s, bath)
    w = table.transition_matrix()
    decay = w.sum(axis=0)
    return LindbladGenerator(s, bath, table, w, decay)


def gibbs_state(s: SpectralData, T: float) -> np.ndarray:
    """Canonical state ``sum_k exp(-E_k/T)/Z |phi_k><phi_k|``.

    At ``T = 0`` this is the uniform mixture over the (possibly
    degenerate) ground space.
    """
    if T < 0:
        raise ValueError("temperature must be non-negative")
    shifted = s.energies - s.energies[0]
    if T == 0:
        omega = s.params.omega if s.params is not None else 1.0
        weights = (shifted <= DEGENERACY_TOL * omega).astype(float)
    else:
        weights = np.exp(-shifted / T)
    weights /= weights.sum()
    return gibbs_from_populations(s, weights)


def gibbs_from_populations(s: SpectralData, populations: np.ndarray) -> np.ndarray:
    v = s.states
    rho = (v * populations) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def gibbs_populations(s: SpectralData, T: float) -> np.ndarray:
    return np.real(np.diagonal(s.to_dressed(gibbs_state(s, T))))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def steady_state(gen: LindbladGenerator, method: str = "auto") -> np.ndarray:
    """Unique null vector of the vectorised generator as a density matrix.

    ``method="svd"`` takes the right singular vector of the smallest
    singular value and rejects a second one below ``1e-12`` of the
    largest.  ``method="lu"`` replaces the first (population) row by the
    trace functional and solves directly, rejecting ill-conditioned
    systems, which signal a multi-dimensional null space.
    """
    if not gen.bath.is_dissipative:
        raise SteadyStateError("no bath is coupled: every stationary state is a steady state")
    d = gen.dim
    sup = gen.superoperator
    if method == "auto":
        method = "svd" if d * d <= SVD_MAX_DIM else "lu"
    if method == "svd":
        _, sv, vh = np.linalg.svd(sup)
        if sv[-2] <= 1e-12 * sv[0]:
            raise SteadyStateError(
                f"null space is at least two-dimensional (s[-2]/s[0] = {sv[-2] / sv[0]:.2e})"
            )
        vec = vh[-1].conj()
        rho = vec.reshape(d, d)
        rho = rho / np.trace(rho)
    elif method == "lu":
        system = sup.copy()
        system[0, :] = np.eye(d).ravel()
        rhs = np.zeros(d * d, dtype=complex)
        rhs[0] = 1.0
        anorm = float(np.max(np.sum(np.abs(system), axis=0)))
        lu, piv = sla.lu_factor(system, overwrite_a=True, check_finite=False)
        rcond, info = sla.lapack.zgecon(lu, anorm, norm="1")
        if info != 0 or rcond < 1e-14:
            raise SteadyStateError(
                f"trace-constrained generator is singular (rcond = {rcond:.2e}): "
                "null space is not one-dimensional"
            )
        vec = sla.lu_solve((lu, piv), rhs, check_finite=False)
        resid = rhs.copy()
        resid[1:] -= sup[1:] @ vec
        resid[0] -= np.trace(vec.reshape(d, d))
        vec += sla.lu_solve((lu, piv), resid, check_finite=False)
        rho = vec.reshape(d, d)
    else:
        raise ValueError(f"unknown steady-state method {method!r}")

    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    scale = max(float(np.max(np.abs(sup))), 1e-300)
    residual = float(np.max(np.abs(gen.apply(rho))))
    if residual > 1e-10 * scale:
        raise SteadyStateError(f"steady-state residual {residual:.2e} exceeds 1e-10 * ||L||")
    if np.linalg.eigvalsh(rho)[0] < -1e-10:
        raise SteadyStateError("steady state is not positive semidefinite")
    return rho


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    trace_drift: np.ndarray
    min_eigenvalues: np.ndarray
    nfev: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def trajectory(
    gen: LindbladGenerator,
    rho0: np.ndarray,
    times,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    method: str = "DOP853",
) -> Trajectory:
    """Integrate the master equation and sample it at ``times``.

    Uses an adaptive explicit Runge-Kutta pair on the vectorised equation.
    The state is never renormalised; trace drift and the smallest
    eigenvalue are recorded at every sample and a drift above
    ``TRACE_DRIFT_TOL`` aborts the run.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if not fs.is_density_matrix(rho0):
        raise ValueError("initial state is not a density matrix")
    times = np.asarray(times, dtype=float)
    d = gen.dim
    tr0 = np.trace(rho0)
    if times[-1] == times[0]:
        states = np.repeat(rho0[None], times.size, axis=0)
        ev = np.linalg.eigvalsh(rho0)[0]
        return Trajectory(times, states, np.zeros(times.size), np.full(times.size, ev), 0)

    sup = gen.superoperator
    sol = solve_ivp(
        lambda _t, y: sup @ y,
        (times[0], times[-1]),
        rho0.ravel(),
        method=method,
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegrationError(f"integrator failed: {sol.message}")
    states = sol.y.T.reshape(-1, d, d)
    drift = np.abs(np.einsum("tii->t", states) - tr0)
    min_eig = np.array([np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0] for r in states])
    if np.any(drift > TRACE_DRIFT_TOL):
        raise IntegrationError(f"trace drift {drift.max():.2e} exceeds {TRACE_DRIFT_TOL:g}; reduce tolerances")
    return Trajectory(times, states, drift, min_eig, sol.nfev)


def evolve(gen: LindbladGenerator, rho0: np.ndarray, t_final: float, dt: float, **kwargs) -> np.ndarray:
    """State at ``t_final``; ``dt`` is the diagnostic sampling interval."""
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")
    n = max(int(math.ceil(t_final / dt)), 1)
    traj = trajectory(gen, rho0, np.linspace(0.0, t_final, n + 1), **kwargs)
    if traj.min_eigenvalues.min() < -POSITIVITY_TOL:
        raise IntegrationError(f"positivity lost: min eigenvalue {traj.min_eigenvalues.min():.2e}")
    return traj.final
