from __future__ import annotations

import math
from fractions import Fraction

import pytest
import scipy.special

from etclosure.equilibrium import (
    EntropyUndefinedError,
    JuttnerFamily,
    STATISTICS,
    ThermoState,
    bessel_k1_quadrature,
    equilibrium_hprime,
    equilibrium_multipliers,
    gibbs_residual,
    H_derivatives,
    H_from_distribution,
    integrability_residual,
    mj_closed_form_H,
    project_equilibrium,
    state_functions,
    thermo_functions,
)
from etclosure.oracle import random_rational_timelike
from etclosure.tensors import DenseSymTensor, FourVector, gmu_basis

REST = FourVector([1.0, 0, 0, 0])
BOOSTED = FourVector([1.3, 0.4, -0.2, 0.1])


def test_thermostate_validation():
    with pytest.raises(ValueError):
        ThermoState(1.0, FourVector([0, 1, 0, 0]), 1.0)
    with pytest.raises(ValueError):
        ThermoState(1.0, FourVector([-1, 0, 0, 0]), 1.0)
    with pytest.raises(ValueError):
        ThermoState(1.0, REST, -1.0)
    with pytest.raises(ValueError):
        ThermoState(1.0, REST, 1.0, statistics="maxwellian")
    st = ThermoState(0.5, BOOSTED, 2.0)
    assert st.gamma == pytest.approx(math.sqrt(-BOOSTED.norm_sq()))


def test_multiplier_tensors_shapes():
    lam = Fraction(3, 5)
    mu = FourVector([Fraction(5, 4), Fraction(3, 4), 0, 0])
    m = Fraction(2)
    lam0, mu1 = equilibrium_multipliers(lam, mu, 0, 1, m)
    assert lam0.rank == 0 and lam0.get(()) == lam
    assert mu1.rank == 1
    assert [mu1.get((i,)) for i in range(4)] == list(mu.lowered().components)
    lam2, mu3 = equilibrium_multipliers(lam, mu, 2, 3, m)
    # lambda g_ab (-m^2)^{-1} on lowered indices
    assert lam2.get((0, 0)) == lam * Fraction(-1) / (-m * m)
    assert lam2.get((1, 1)) == lam / (-m * m)
    assert lam2.get((0, 1)) == 0
    # mu_(a g_bc) (-m^2)^{-1}
    low = mu.lowered().components
    want_001 = (low[0] * 0 + low[0] * 0 + low[1] * (-1)) / (3 * (-m * m))
    assert mu3.get((0, 0, 1)) == want_001
    with pytest.raises(ValueError):
        equilibrium_multipliers(lam, mu, 3, 1, m)
    with pytest.raises(ValueError):
        equilibrium_multipliers(lam, mu, 2, 2, m)


@pytest.mark.parametrize("M", [0, 2, 4])
@pytest.mark.parametrize("N", [1, 3])
def test_projection_round_trip_exact(M, N, rng):
    lam = Fraction(7, 3)
    m = Fraction(3, 2)
    mu = random_rational_timelike(rng)
    lam_t, mu_t = equilibrium_multipliers(lam, mu, M, N, m)
    lam_back, mu_back = project_equilibrium(lam_t, mu_t, m)
    assert lam_back == lam
    assert tuple(mu_back.components) == tuple(mu.lowered().components)


def test_projection_identity_for_scalar_vector():
    lam_t = DenseSymTensor.scalar(Fraction(5, 7))
    mu_t = DenseSymTensor.zeros(1).with_entry((0,), Fraction(-2)).with_entry((1,), Fraction(1, 3))
    lam_back, mu_back = project_equilibrium(lam_t, mu_t, 1)
    assert lam_back == Fraction(5, 7)
    assert mu_back.components == (Fraction(-2), Fraction(1, 3), 0, 0)


def test_bessel_quadrature_against_scipy():
    for z in (0.1, 0.5, 1.0, 5.0, 10.0):
        assert bessel_k1_quadrature(z) == pytest.approx(scipy.special.kv(1, z), rel=1e-10)


def test_H_quadrature_matches_closed_form():
    dist = JuttnerFamily()
    for lam in (0.0, 1.0, -0.5):
        for z in (0.1, 1.0, 10.0):
            got = H_from_distribution(dist.F, lam, z, 1.0)
            want = mj_closed_form_H(lam, z, 1.0)
            assert got == pytest.approx(want, rel=1e-8)


def test_H_zero_distribution():
    assert H_from_distribution(lambda X, Y: 0.0, 1.0, 1.0, 1.0) == 0.0


def test_H_scaling_invariance():
    # doubled gamma and halved mass leave gamma*m fixed; the prefactor
    # m^3/gamma drops by 16
    base = mj_closed_form_H(0.3, 1.0, 1.0)
    assert mj_closed_form_H(0.3, 2.0, 0.5) == pytest.approx(base / 16, rel=1e-12)
    got = H_from_distribution(JuttnerFamily().F, 0.3, 2.0, 0.5)
    assert got == pytest.approx(base / 16, rel=1e-8)


def test_state_functions_identities():
    fn = state_functions(2.0, -3.0, -5.0, 0.7, 2.0)
    assert fn.p == 2.0
    assert fn.n == 2.0 * -3.0
    assert fn.e == -2.0 - 2.0 * -5.0
    assert fn.T == 0.5
    assert fn.s == -0.7 - 2.0 * (-5.0) / (-3.0)
    # gamma-independent H has e = -H
    flat = state_functions(2.0, -3.0, 0.0, 0.7, 2.0)
    assert flat.e == -2.0


def test_state_functions_entropy_guard():
    with pytest.raises(EntropyUndefinedError):
        state_functions(1.0, 0.0, -1.0, 0.5, 1.0)


def test_monomial_H_closed_forms():
    # H = exp(-lam) gamma^-4: n = -exp(-lam) gamma^-3, e = 3p, s = -lam - 4
    lam, gamma = 0.4, 1.7
    H = math.exp(-lam) * gamma**-4
    fn = state_functions(H, -H, -4 * H / gamma, lam, gamma)
    assert fn.e == pytest.approx(3 * fn.p, rel=1e-14)
    assert fn.n == pytest.approx(-math.exp(-lam) * gamma**-3, rel=1e-14)
    assert fn.s == pytest.approx(-lam - 4, rel=1e-14)


@pytest.mark.parametrize("z", [0.1, 1.0, 10.0])
def test_gibbs_relation_holds(z):
    st = ThermoState(0.3, FourVector([z, 0, 0, 0]), 1.0)
    assert abs(gibbs_residual(st)) <= 1e-8


@pytest.mark.parametrize("z", [0.1, 1.0, 10.0])
def test_integrability_condition_holds(z):
    st = ThermoState(0.3, FourVector([z, 0, 0, 0]), 1.0)
    assert abs(integrability_residual(st)) <= 1e-8


@pytest.mark.parametrize("stats", STATISTICS)
def test_degenerate_statistics_thermodynamics(stats):
    st = ThermoState(1.0, REST, 1.0, statistics=stats)
    fn = thermo_functions(st)
    assert math.isfinite(fn.H) and fn.H > 0
    assert abs(gibbs_residual(st)) <= 1e-8
    assert abs(integrability_residual(st)) <= 1e-8


def test_statistics_ordering():
    # same state: Fermi blocking lowers H, Bose enhancement raises it
    vals = {}
    for stats in STATISTICS:
        vals[stats] = thermo_functions(ThermoState(1.0, REST, 1.0, statistics=stats)).H
    assert vals["fermion"] < vals["nondegenerate"] < vals["boson"]


def test_H_derivatives_match_closed_form():
    dist = JuttnerFamily()
    lam, gamma, m = 0.6, 1.3, 1.0
    H, H_lam, H_gam = H_derivatives(dist, lam, gamma, m)
    assert H == pytest.approx(mj_closed_form_H(lam, gamma, m), rel=1e-9)
    # MJ factorizes in lambda: H_lambda = -H
    assert H_lam == pytest.approx(-H, rel=1e-8)
    eps = 1e-5
    fd = (mj_closed_form_H(lam, gamma + eps, m) - mj_closed_form_H(lam, gamma - eps, m)) / (2 * eps)
    assert H_gam == pytest.approx(fd, rel=1e-7)


def test_equilibrium_hprime_shapes():
    st = ThermoState(1.0, BOOSTED, 1.0)
    hprime, A, B = equilibrium_hprime(st)
    fn = thermo_functions(st)
    gamma = st.gamma
    u = [c / gamma for c in BOOSTED.components]
    for i in range(4):
        assert hprime.components[i] == pytest.approx(fn.H * BOOSTED.components[i], rel=1e-12)
        assert A.components[i] == pytest.approx(fn.n * u[i], rel=1e-12)
    # B u u = e with u_alpha = g u
    u_low = [-u[0], u[1], u[2], u[3]]
    buu = sum(B.get((i, j)) * u_low[i] * u_low[j] for i in range(4) for j in range(4))
    assert buu == pytest.approx(fn.e, rel=1e-12)
    tr = sum(B.get((i, i)) * (-1 if i == 0 else 1) for i in range(4))
    assert tr == pytest.approx(-fn.e + 3 * fn.p, rel=1e-12)


def test_positivity_of_kinetic_set():
    from etclosure.moments import kinetic_moment

    for z in (0.1, 1.0, 10.0):
        st = ThermoState(0.5, FourVector([z, 0, 0, 0]), 1.0)
        n = kinetic_moment(st, 1).get((0,))
        B = kinetic_moment(st, 2)
        e, p = B.get((0, 0)), B.get((1, 1))
        assert n > 0 and p > 0 and e > 0
        # multiplier-side pressure and energy stay positive too
        fn = thermo_functions(st)
        assert fn.p > 0 and fn.e > 0


def test_extreme_gamma_quadrature_is_finite():
    # the radial integrand overflows cosh at rho ~ 710 unless guarded
    fn = thermo_functions(ThermoState(1.0, FourVector([400.0, 0, 0, 0]), 1.0))
    assert math.isfinite(fn.H) and fn.H > 0
    assert math.isfinite(fn.e)
    # complete underflow degenerates the state functions explicitly
    with pytest.raises(EntropyUndefinedError):
        thermo_functions(ThermoState(1.0, FourVector([800.0, 0, 0, 0]), 1.0))
