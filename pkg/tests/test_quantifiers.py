import math

import numpy as np
import pytest
from scipy.linalg import expm

from aqrm import dissipator as dis
from aqrm import fockspace as fs
from aqrm import quantifiers as qf
from aqrm import spectrum as sp
from aqrm.errors import GridCoverageError, UndefinedQuantityError

from .conftest import random_density, random_unitary

EXP_M1 = 0.367879441171442322  # e^{-2r} at r = 0.5


def thermal(nbar, n=80):
    p = (nbar / (1 + nbar)) ** np.arange(n)
    return np.diag(p / p.sum()).astype(complex)


def fock(k, n=10):
    v = np.zeros(n, complex)
    v[k] = 1
    return fs.projector(v)


def coherent_vector(beta, n=30):
    k = np.arange(n)
    logs = np.array([math.lgamma(x + 1) for x in k])
    amp = np.exp(-abs(beta) ** 2 / 2 - 0.5 * logs) * beta**k
    return amp.astype(complex)


def squeezed_vacuum(r, n=40):
    a = fs.annihilation(n)
    v = np.zeros(n, complex)
    v[0] = 1
    return fs.projector(expm(0.5 * r * (a @ a - a.conj().T @ a.conj().T)) @ v)


def grid_for(rho, sigmas=6.0, points=241):
    ext = qf.quadrature_extent(rho, sigmas)
    return np.linspace(-ext, ext, points)


def test_g2_reference_states():
    assert abs(qf.g2_bare(thermal(0.5)) - 2.0) < 1e-9
    assert abs(qf.g2_bare(thermal(2.0, 200)) - 2.0) < 1e-9
    assert qf.g2_bare(fock(1)) == 0.0
    psi = coherent_vector(1.0)
    a = fs.annihilation(30)
    oracle = np.linalg.norm(a @ a @ psi) ** 2 / np.linalg.norm(a @ psi) ** 4
    assert abs(qf.g2_bare(fs.projector(psi)) - oracle) < 1e-12
    assert abs(qf.g2_bare(fs.projector(psi)) - 1.0) < 1e-6
    with pytest.raises(UndefinedQuantityError):
        qf.g2_bare(fock(0))


def test_g2_dressed_reduces_to_bare_without_coupling():
    s = sp.solve(sp.ModelParams(fock_cutoff=40))
    rho = dis.gibbs_state(s, 0.5)
    bare = qf.g2_bare(fs.partial_trace(rho, "boson"))
    assert abs(qf.g2_dressed(rho, s) - bare) < 1e-8
    with pytest.raises(UndefinedQuantityError):
        qf.g2_dressed(dis.gibbs_state(s, 0.0), s)


def test_squeezing_reference_states():
    assert abs(qf.squeezing(fock(0)) - 1.0) < 1e-15
    for nbar in (0.1, 0.7):
        assert abs(qf.squeezing(thermal(nbar)) - (1 + 2 * nbar)) < 1e-12
    sq = squeezed_vacuum(0.5)
    assert abs(qf.squeezing_by_angle_scan(sq, 720) - qf.squeezing(sq)) < 1e-4
    assert abs(qf.squeezing(sq) - EXP_M1) < 1e-4


def test_squeezing_formula_assumes_zero_mean():
    a = fs.annihilation(40)
    disp = expm(0.7 * (a.conj().T - a))
    sq = disp @ squeezed_vacuum(0.5) @ disp.conj().T
    assert abs(qf.squeezing_by_angle_scan(sq) - EXP_M1) < 1e-4
    assert qf.squeezing(sq) > 2.0


def test_macroscopicity_reference_states():
    for k in (1, 2, 3):
        assert abs(qf.macroscopicity(fock(k)) - k) < 1e-12
    for beta in (0.5, 1.0, 1.5 + 0.5j):
        assert abs(qf.macroscopicity(fs.projector(coherent_vector(beta, 40)))) < 1e-9
    # Tr[n rho^2] = 1/4 and Tr[a rho a^dag rho] = 1/4 by hand
    mix = 0.5 * (fock(0, 3) + fock(1, 3))
    assert abs(qf.macroscopicity(mix)) < 1e-15
    assert abs(qf.wigner_macroscopicity(mix, grid_for(mix), grid_for(mix))) < 1e-3


def test_wigner_reference_values():
    q = grid_for(fock(0))
    w = qf.wigner_grid(fock(0), q, q)
    centre = len(q) // 2
    assert abs(w[centre, centre] - 1 / math.pi) < 1e-12
    assert abs(np.trapezoid(np.trapezoid(w, q, axis=1), q) - 1) < 1e-3
    w1 = qf.wigner_grid(fock(1), np.array([0.0]), np.array([0.0]))
    assert abs(w1[0, 0] + 1 / math.pi) < 1e-4
    gauss = np.exp(-q[:, None] ** 2 - q[None, :] ** 2) / math.pi
    assert np.max(np.abs(w - gauss)) < 1e-14


def test_wigner_matches_oracle_for_coherent_state():
    # W of |beta> is the vacuum Gaussian displaced to (sqrt2 Re beta, sqrt2 Im beta)
    beta = 0.8 - 0.3j
    rho = fs.projector(coherent_vector(beta, 40))
    q = np.linspace(-4, 4, 33)
    w = qf.wigner_grid(rho, q, q)
    q0, p0 = math.sqrt(2) * beta.real, math.sqrt(2) * beta.imag
    ref = np.exp(-(q[:, None] - q0) ** 2 - (q[None, :] - p0) ** 2) / math.pi
    assert np.max(np.abs(w - ref)) < 1e-12


def test_wigner_oracle_for_squeezed_thermal_state():
    n = 40
    a = fs.annihilation(n)
    s_op = expm(0.5 * 0.4 * (a @ a - a.conj().T @ a.conj().T))
    rho = s_op @ thermal(0.3, n) @ s_op.conj().T
    q = grid_for(rho)
    assert abs(qf.wigner_macroscopicity(rho, q, q) - qf.macroscopicity(rho)) < 1e-3


def test_wigner_grid_coverage_flagged():
    q = np.linspace(-0.5, 0.5, 41)
    with pytest.raises(GridCoverageError):
        qf.wigner_macroscopicity(fock(2), q, q)


def test_negativity_reference_states(rng):
    n = 4
    prod = fs.embed(random_density(2, rng), random_density(n, rng))
    assert qf.negativity(prod) < 1e-14
    bell = fs.projector((fs.basis_state(n, "e", 0) + fs.basis_state(n, "g", 1)) / math.sqrt(2))
    assert abs(qf.negativity(bell) - 0.5) < 1e-12
    for _ in range(5):
        assert qf.negativity(random_density(2 * n, rng)) <= 0.5 + 1e-9


def test_discord_reference_states(rng):
    n = 4
    prod = fs.embed(random_density(2, rng), random_density(n, rng))
    assert abs(qf.discord(prod)) < 1e-7
    bell = fs.projector((fs.basis_state(n, "e", 0) + fs.basis_state(n, "g", 1)) / math.sqrt(2))
    assert abs(qf.discord(bell) - math.log(2)) < 1e-6
    cc = 0.5 * (fock_composite(n, "e", 0) + fock_composite(n, "g", 1))
    assert abs(qf.discord(cc)) < 1e-7
    with pytest.raises(ValueError):
        qf.discord(bell, measured="boson")


def fock_composite(n, q, k):
    return fs.projector(fs.basis_state(n, q, k))


def test_discord_non_negative_on_separable_states(rng):
    n = 3
    for _ in range(5):
        weights = rng.dirichlet(np.ones(3))
        rho = sum(w * fs.embed(random_density(2, rng), random_density(n, rng)) for w in weights)
        res = qf.discord_search(rho)
        assert res.value >= -1e-9
        assert res.conditional_entropy <= res.grid_minimum + 1e-15


def test_local_unitary_invariance(rng):
    n = 4
    rho = random_density(2 * n, rng, rank=3)
    d0, n0 = qf.discord(rho), qf.negativity(rho)
    for _ in range(3):
        u = np.kron(random_unitary(2, rng), random_unitary(n, rng))
        moved = u @ rho @ u.conj().T
        assert abs(qf.discord(moved) - d0) <= 1e-6
        assert abs(qf.negativity(moved) - n0) <= 1e-6


def test_discord_is_reproducible_for_a_seed():
    s = sp.solve(sp.ModelParams(lambda1=0.8, lambda2=0.2))
    rho = dis.gibbs_state(s, 0.1)
    assert qf.discord(rho, seed=3) == qf.discord(rho, seed=3)


def test_entropy_conventions():
    assert qf.entropy(np.array([1.0, 0.0, 1e-20])) == 0.0
    assert abs(qf.entropy(np.eye(4) / 4) - math.log(4)) < 1e-14


def test_switch_off_consistency():
    s = sp.solve(sp.ModelParams(fock_cutoff=40))
    T = 0.4
    rep = qf.evaluate(dis.gibbs_state(s, T), s)
    nbar = 1 / math.expm1(1 / T)
    assert abs(rep.g2_bare - 2) < 1e-9
    assert abs(rep.g2_dressed - rep.g2_bare) < 1e-8
    assert abs(rep.zeta2 - (1 + 2 * nbar)) < 1e-9
    assert abs(rep.macroscopicity - qf.macroscopicity(thermal(nbar, 40))) < 1e-9
    assert rep.negativity < 1e-14 and abs(rep.discord) < 1e-7


def test_thermal_macroscopicity_is_negative():
    nbar = 0.3
    # Tr[n rho^2] - Tr[a rho a^dag rho] for a geometric distribution
    x = nbar / (1 + nbar)
    p0 = 1 - x
    closed = p0**2 * (x**2 / (1 - x**2) ** 2) * (1 - 1 / x)
    assert abs(qf.macroscopicity(thermal(nbar, 200)) - closed) < 1e-12
    assert closed < 0


def test_evaluate_report_flags_and_metadata():
    s = sp.solve(sp.ModelParams(fock_cutoff=12))
    rep = qf.evaluate(dis.gibbs_state(s, 0.0), s)
    assert rep.g2_bare is None and rep.g2_dressed is None
    assert set(rep.flags) == {"g2_bare_undefined", "g2_dressed_undefined"}
    assert rep.negativity == 0.0
    s = sp.solve(sp.ModelParams(lambda1=0.5, lambda2=0.25))
    rep = qf.evaluate(dis.gibbs_state(s, 0.1), s)
    assert all(v is not None for v in rep.values().values())
    assert {"fock_cutoff", "log_base", "discord_iterations", "discord_grid_delta"} <= set(rep.convergence)
    assert rep.macroscopicity <= rep.mean_photons + 1e-9
    with pytest.raises(ValueError):
        qf.evaluate(dis.gibbs_state(s, 0.1), s, ("entropy",))


def test_qrm_negativity_single_maximum_below_resonance():
    grid = np.linspace(0, 4, 101)
    neg = np.array([
        qf.negativity(dis.gibbs_state(sp.solve(sp.ModelParams(lambda1=x, lambda2=x)), 0.1)) for x in grid
    ])
    peaks = [i for i in range(1, grid.size - 1) if neg[i] > neg[i - 1] and neg[i] >= neg[i + 1]]
    assert len(peaks) == 1
    assert grid[peaks[0]] < 1.0
