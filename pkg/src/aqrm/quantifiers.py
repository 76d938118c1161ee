"""Nonclassicality and correlation quantifiers of a qubit-field state.

Field quantifiers (``g2_bare``, ``squeezing``, ``macroscopicity``,
``wigner_grid``) take the single-mode field density matrix, i.e. the
state after the coupling is switched off and the qubit traced out.
``g2_dressed``, ``negativity`` and ``discord`` take the composite state.
Entropies use the natural logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import fockspace as fs
from .errors import GridCoverageError, UndefinedQuantityError
from .spectrum import SpectralData, build_x_plus

DENOMINATOR_TOL = 1e-12
ENTROPY_CUTOFF = 1e-14
LOG_BASE = "e"

QUANTIFIERS = ("g2_dressed", "g2_bare", "zeta2", "macroscopicity", "negativity", "discord")


def _field_ops(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise fs.DimensionError(f"field state must be square, got {rho.shape}")
    a = fs.annihilation(rho.shape[0])
    return rho, a


def mean_photon_number(rho: np.ndarray) -> float:
    rho, a = _field_ops(rho)
    return float(np.real(np.trace(a.conj().T @ a @ rho)))


def g2_bare(rho: np.ndarray) -> float:
    """``<a^dag^2 a^2> / <a^dag a>^2`` of a field state."""
    rho, a = _field_ops(rho)
    n = mean_photon_number(rho)
    if n <= DENOMINATOR_TOL:
        raise UndefinedQuantityError(f"g2 undefined: mean photon number {n:.3e} vanishes")
    a2 = a @ a
    return float(np.real(np.trace(a2.conj().T @ a2 @ rho))) / n**2


def g2_dressed(rho: np.ndarray, s: SpectralData, x_plus: np.ndarray | None = None) -> float:
    """Zero-delay correlation of the dressed field operator ``X+``."""
    xp = build_x_plus(s) if x_plus is None else x_plus
    rho = np.asarray(rho, dtype=complex)
    den = float(np.real(np.trace(xp.conj().T @ xp @ rho)))
    if den <= DENOMINATOR_TOL:
        raise UndefinedQuantityError(f"G2 undefined: dressed excitation number {den:.3e} vanishes")
    xp2 = xp @ xp
    return float(np.real(np.trace(xp2.conj().T @ xp2 @ rho))) / den**2


def squeezing(rho: np.ndarray) -> float:
    """Squeezing parameter ``1 + 2<a^dag a> - 2|<a^2>|``.

    Equals the minimal rotated-quadrature variance when ``<a> = 0``, which
    parity symmetry guarantees for every equilibrium state of the model.
    Displaced states are not corrected for their mean.
    """
    rho, a = _field_ops(rho)
    return float(1.0 + 2.0 * mean_photon_number(rho) - 2.0 * abs(np.trace(a @ a @ rho)))


def rotated_quadrature_variance(rho: np.ndarray, n_theta: int = 720) -> tuple[np.ndarray, np.ndarray]:
    """``Var(a e^{-i theta} + a^dag e^{i theta})`` on ``n_theta`` angles in ``[0, pi)``."""
    rho, a = _field_ops(rho)
    ad = a.conj().T
    m1 = np.trace(a @ rho)
    m2 = np.trace(a @ a @ rho)
    nn = np.real(np.trace(ad @ a @ rho))
    theta = np.arange(n_theta) * (math.pi / n_theta)
    ph = np.exp(-1j * theta)
    mean = 2.0 * np.real(m1 * ph)
    second = 2.0 * np.real(m2 * ph**2) + 2.0 * nn + 1.0
    return theta, second - mean**2


def squeezing_by_angle_scan(rho: np.ndarray, n_theta: int = 720) -> float:
    """Minimum of the rotated-quadrature variance over a discrete angle grid."""
    return float(np.min(rotated_quadrature_variance(rho, n_theta)[1]))


def macroscopicity(rho: np.ndarray) -> float:
    """Phase-space interference measure ``Tr[n rho^2] - Tr[a rho a^dag rho]``.

    Zero for coherent states, ``n`` for the Fock state ``|n>``; negative
    values occur for thermal mixtures.
    """
    rho, a = _field_ops(rho)
    ad = a.conj().T
    return float(np.real(np.trace(ad @ a @ rho @ rho) - np.trace(a @ rho @ ad @ rho)))


def wigner_grid(rho: np.ndarray, q, p) -> np.ndarray:
    """Wigner function ``W[i, j] = W(q[i], p[j])`` of a field state.

    Quadratures follow ``a = (q + i p) / sqrt(2)``, so the vacuum is
    ``exp(-q^2 - p^2) / pi``.  Built from the Fock-basis Laguerre
    recurrence over all matrix elements.
    """
    rho, _ = _field_ops(rho)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    alpha = (q[:, None] + 1j * p[None, :]) / math.sqrt(2.0)
    n = rho.shape[0]
    # row[k] holds the Wigner kernel of |m><m+k|, proportional to alpha**k at m = 0
    base = np.exp(-2.0 * np.abs(alpha) ** 2) / math.pi
    two_a = 2.0 * alpha
    two_ac = 2.0 * np.conj(alpha)
    prev_row = [base]
    for k in range(1, n):
        prev_row.append(two_a * prev_row[-1] / math.sqrt(k))
    w = np.real(rho[0, 0]) * np.real(prev_row[0])
    for k in range(1, n):
        w += 2.0 * np.real(rho[0, k] * prev_row[k])
    for m in range(1, n):
        row = [None] * (n - m)
        sm = math.sqrt(m)
        # |m><m+k| from |m-1><m+k| and |m-1><m-1+k|
        for k in range(n - m):
            term = two_ac * prev_row[k + 1] - math.sqrt(m + k) * prev_row[k]
            row[k] = term / sm
        w += np.real(rho[m, m]) * np.real(row[0])
        for k in range(1, n - m):
            w += 2.0 * np.real(rho[m, m + k] * row[k])
        prev_row = row
    return w


def _fourth_order_laplacian(w: np.ndarray, hq: float, hp: float) -> np.ndarray:
    def second(f, h, axis):
        f = np.moveaxis(f, axis, 0)
        out = np.zeros_like(f)
        out[2:-2] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / (12 * h * h)
        return np.moveaxis(out, 0, axis)

    return second(w, hq, 0) + second(w, hp, 1)


def wigner_macroscopicity(rho: np.ndarray, q, p, norm_tol: float = 1e-3) -> float:
    """Grid estimate of the interference measure from the Wigner function.

    Evaluates ``pi * int W (-lap/2 - 1) W dq dp`` with a fourth-order
    finite-difference Laplacian and the trapezoid rule.  With the vacuum
    normalised to ``exp(-q^2 - p^2)/pi`` this equals
    ``Tr[n rho^2] - Tr[a rho a^dag rho]``.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    w = wigner_grid(rho, q, p)
    total = np.trapezoid(np.trapezoid(w, p, axis=1), q)
    if abs(total - 1.0) > norm_tol:
        raise GridCoverageError(f"Wigner normalisation {total:.6f} misses 1 by more than {norm_tol:g}")
    lap = _fourth_order_laplacian(w, q[1] - q[0], p[1] - p[0])
    integrand = w * (-0.5 * lap - w)
    interior = integrand[2:-2, 2:-2]
    return math.pi * float(np.trapezoid(np.trapezoid(interior, p[2:-2], axis=1), q[2:-2]))


def quadrature_extent(rho: np.ndarray, sigmas: float = 3.0) -> float:
    """Half-width of a square grid covering ``sigmas`` standard deviations."""
    rho, a = _field_ops(rho)
    x = (a + a.conj().T) / math.sqrt(2.0)
    y = (a - a.conj().T) / (1j * math.sqrt(2.0))
    ext = 0.0
    for op in (x, y):
        mean = float(np.real(np.trace(op @ rho)))
        var = float(np.real(np.trace(op @ op @ rho))) - mean**2
        ext = max(ext, abs(mean) + sigmas * math.sqrt(max(var, 0.5)))
    return ext


def negativity(rho: np.ndarray) -> float:
    """Sum of magnitudes of negative partial-transpose eigenvalues."""
    ev = np.linalg.eigvalsh(fs.partial_transpose(np.asarray(rho, dtype=complex)))
    return float(np.sum(np.abs(ev[ev < 0])))


def entropy(rho_or_eigs: np.ndarray) -> float:
    """Von Neumann entropy (natural log); eigenvalues below 1e-14 add nothing."""
    x = np.asarray(rho_or_eigs)
    ev = np.linalg.eigvalsh(x) if x.ndim == 2 else x.real
    ev = ev[ev > ENTROPY_CUTOFF]
    return float(-np.sum(ev * np.log(ev)))


@dataclass(frozen=True)
class DiscordResult:
    value: float
    theta: float
    phi: float
    conditional_entropy: float
    grid_minimum: float
    iterations: int
    converged: bool
    support_rank: int


class _ConditionalEntropy:
    """``min_n sum_pm p_pm S(rho_B|pm)`` for projectors ``(I +- n.sigma)/2`` on the qubit.

    The post-measurement field states are ``(rho_B +- n.R)/2`` with
    ``R = (B + B^dag, i(B - B^dag), A - C)`` built from the qubit blocks of
    ``rho``.  Both lie in the support of ``rho_B``, so everything is
    projected onto it first.
    """

    def __init__(self, rho: np.ndarray):
        n = fs.composite_cutoff(rho)
        r = np.asarray(rho, dtype=complex).reshape(2, n, 2, n)
        blk_a, blk_b, blk_c = r[0, :, 0, :], r[0, :, 1, :], r[1, :, 1, :]
        rho_b = blk_a + blk_c
        w, u = np.linalg.eigh(0.5 * (rho_b + rho_b.conj().T))
        u = u[:, w > ENTROPY_CUTOFF * 0.1]
        proj = lambda m: u.conj().T @ m @ u
        self.rank = u.shape[1]
        self.rho_b = proj(rho_b)
        self.r = np.stack(
            [
                proj(blk_b + blk_b.conj().T),
                proj(1j * (blk_b - blk_b.conj().T)),
                proj(blk_a - blk_c),
            ]
        )

    def __call__(self, theta, phi) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        nvec = np.stack(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1
        )
        m = np.einsum("ti,iab->tab", nvec, self.r)
        total = np.zeros(theta.size)
        for sign in (1.0, -1.0):
            ev = np.linalg.eigvalsh(0.5 * (self.rho_b + sign * m))
            prob = ev.sum(axis=-1)
            pos = ev > ENTROPY_CUTOFF
            total -= np.sum(np.where(pos, ev * np.log(np.where(pos, ev, 1.0)), 0.0), axis=-1)
            ok = prob > ENTROPY_CUTOFF
            total += np.where(ok, prob * np.log(np.where(ok, prob, 1.0)), 0.0)
        return total


def discord_search(
    rho: np.ndarray,
    grid: tuple[int, int] = (64, 128),
    ftol: float = 1e-8,
    restarts: int = 2,
    seed: int | None = 0,
    batch: int = 1024,
) -> DiscordResult:
    """Quantum discord with a projective measurement on the qubit.

    The conditional entropy is scanned on a ``grid`` over the Bloch
    hemisphere (opposite directions give the same measurement), then
    refined by Nelder-Mead from the best grid point and ``restarts``
    jittered copies of it.
    """
    rho = np.asarray(rho, dtype=complex)
    cond = _ConditionalEntropy(rho)
    nt, nph = grid
    theta = np.linspace(0.0, 0.5 * math.pi, nt)
    phi = np.arange(nph) * (2.0 * math.pi / nph)
    tt, pp = (x.ravel() for x in np.meshgrid(theta, phi, indexing="ij"))
    vals = np.concatenate([cond(tt[i:i + batch], pp[i:i + batch]) for i in range(0, tt.size, batch)])
    best = int(np.argmin(vals))
    grid_min = float(vals[best])

    rng = np.random.default_rng(seed)
    step = np.array([theta[1] - theta[0] if nt > 1 else 0.1, phi[1] - phi[0] if nph > 1 else 0.1])
    starts = [np.array([tt[best], pp[best]])]
    starts += [starts[0] + rng.uniform(-1, 1, 2) * step for _ in range(restarts)]
    f = lambda x: float(cond(x[0], x[1])[0])
    best_val, best_x, iters, converged = grid_min, starts[0], 0, True
    for x0 in starts:
        res = minimize(
            f, x0, method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": ftol, "maxiter": 2000,
                     "initial_simplex": [x0, x0 + [0.5 * step[0], 0], x0 + [0, 0.5 * step[1]]]},
        )
        iters += res.nit
        converged &= bool(res.success)
        if res.fun < best_val:
            best_val, best_x = float(res.fun), res.x

    s_a = entropy(fs.partial_trace(rho, "qubit"))
    s_ab = entropy(0.5 * (rho + rho.conj().T))
    value = s_a - s_ab + best_val
    return DiscordResult(
        value=float(value),
        theta=float(best_x[0]),
        phi=float(best_x[1]),
        conditional_entropy=best_val,
        grid_minimum=grid_min,
        iterations=iters,
        converged=converged,
        support_rank=cond.rank,
    )


def discord(rho: np.ndarray, measured: str = "qubit", **kwargs) -> float:
    """Quantum discord (natural log) with the measurement on the qubit."""
    if measured != "qubit":
        raise ValueError("discord is measured on the qubit subsystem only")
    return discord_search(rho, **kwargs).value


@dataclass
class QuantifierReport:
    """All quantifiers for one state; ``None`` marks a missing value."""

    g2_dressed: float | None = None
    g2_bare: float | None = None
    zeta2: float | None = None
    macroscopicity: float | None = None
    negativity: float | None = None
    discord: float | None = None
    mean_photons: float | None = None
    convergence: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def values(self) -> dict:
        return {name: getattr(self, name) for name in QUANTIFIERS}


def evaluate(
    rho: np.ndarray,
    s: SpectralData | None = None,
    selection=QUANTIFIERS,
    discord_options: dict | None = None,
) -> QuantifierReport:
    """Evaluate the selected quantifiers on a composite state.

    Undefined correlation functions become missing values with a flag
    rather than exceptions.
    """
    unknown = set(selection) - set(QUANTIFIERS)
    if unknown:
        raise ValueError(f"unknown quantifiers: {sorted(unknown)}")
    rho = np.asarray(rho, dtype=complex)
    field_state = fs.partial_trace(rho, "boson")
    rep = QuantifierReport(mean_photons=mean_photon_number(field_state))
    rep.convergence["fock_cutoff"] = fs.composite_cutoff(rho)
    rep.convergence["log_base"] = LOG_BASE

    if "g2_dressed" in selection:
        if s is None:
            rep.flags.append("g2_dressed_no_spectrum")
        else:
            try:
                rep.g2_dressed = g2_dressed(rho, s)
            except UndefinedQuantityError:
                rep.flags.append("g2_dressed_undefined")
    if "g2_bare" in selection:
        try:
            rep.g2_bare = g2_bare(field_state)
        except UndefinedQuantityError:
            rep.flags.append("g2_bare_undefined")
    if "zeta2" in selection:
        rep.zeta2 = squeezing(field_state)
    if "macroscopicity" in selection:
        rep.macroscopicity = macroscopicity(field_state)
    if "negativity" in selection:
        rep.negativity = negativity(rho)
    if "discord" in selection:
        res = discord_search(rho, **(discord_options or {}))
        rep.discord = res.value
        rep.convergence["discord_iterations"] = res.iterations
        rep.convergence["discord_grid_delta"] = res.grid_minimum - res.conditional_entropy
        rep.convergence["discord_support_rank"] = res.support_rank
        if not res.converged:
            rep.flags.append("discord_not_converged")
    return rep
