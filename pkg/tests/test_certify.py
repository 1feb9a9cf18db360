import math

import numpy as np
import pytest

from lurecert import (CertificationFailure, DimensionError, FeedforwardNet,
                      LureSystem, PositiveLTI, RhoSchedule, SectorInterval,
                      aizerman_check, aizerman_roa, is_metzler, linear_certificate,
                      nn_aizerman_certify, quad_certificate, sector_limits,
                      spectral_abscissa, sublevel_roa, vdot)


def sector(s1, s2, yu=8.0):
    return SectorInterval(sigma1=[[s1]], sigma2=[[s2]], y_upper=[yu])


# --- extreme-loop tests ------------------------------------------------------------

def test_aizerman_check_accepts_published_sector(plant):
    verdict = aizerman_check(plant, sector(-3.0, -1.276))
    assert verdict.metzler_ok and verdict.hurwitz_ok and verdict.stable
    assert verdict.lower_abscissa < verdict.upper_abscissa < 0.0
    assert np.allclose(verdict.closed_upper,
                       [[-8.276, 3.724], [3.448, -1.552]], atol=1e-12)


def test_aizerman_check_flags_positivity_loss(plant):
    verdict = aizerman_check(plant, sector(-3.1, -1.276))
    assert not verdict.metzler_ok
    assert not verdict.stable


def test_aizerman_check_flags_instability(plant):
    verdict = aizerman_check(plant, sector(-3.0, -1.2))
    assert verdict.metzler_ok
    assert not verdict.hurwitz_ok
    assert verdict.upper_abscissa > 0.0


def test_aizerman_check_slope_shape(plant):
    with pytest.raises(DimensionError):
        aizerman_check(plant, SectorInterval(sigma1=[[-1.0], [-1.0]],
                                             sigma2=[[0.0], [0.0]], y_upper=[1.0]))


# --- admissible sector limits --------------------------------------------------------

def test_sector_limits_demo_plant(plant):
    s1, s2 = sector_limits(plant)
    assert s1 == -3.0  # exact: binding off-diagonal is -a21/(bc)21 = -6/2
    assert abs(s2 - (-37.0 / 29.0)) < 1e-5


def test_sector_limits_boundaries_are_tight(plant):
    s1, s2 = sector_limits(plant)
    bc = plant.b @ plant.c
    assert is_metzler(plant.a + s1 * bc)
    assert not is_metzler(plant.a + (s1 - 1e-6) * bc)
    assert spectral_abscissa(plant.a + s2 * bc) < 0.0
    assert spectral_abscissa(plant.a + (s2 + 1e-3) * bc) > 0.0


def test_sector_limits_decoupled_feedback():
    # B C = 0: feedback never enters, sector is the whole line
    plant = PositiveLTI(a=-np.eye(2), b=[[0.0], [0.0]], c=[[1.0, 0.0]])
    s1, s2 = sector_limits(plant)
    assert s1 == -math.inf and s2 == math.inf


def test_sector_limits_decoupled_unstable():
    plant = PositiveLTI(a=[[1.0]], b=[[0.0]], c=[[1.0]])
    with pytest.raises(CertificationFailure):
        sector_limits(plant)


def test_sector_limits_unbounded_above():
    # nilpotent B C leaves the eigenvalues at -1 for every slope
    plant = PositiveLTI(a=-np.eye(2), b=[[1.0], [0.0]], c=[[0.0, 1.0]])
    s1, s2 = sector_limits(plant)
    assert s1 == 0.0  # the only off-diagonal constraint is a12 + s >= 0
    assert s2 == math.inf


def test_sector_limits_needs_scalar_loop():
    plant = PositiveLTI(a=-np.eye(2), b=np.eye(2), c=[[1.0, 0.0]])
    with pytest.raises(DimensionError):
        sector_limits(plant)


# --- network certification ------------------------------------------------------------

def test_nn_certify_demo(demo):
    cert = nn_aizerman_certify(demo)
    assert cert.verdict.stable
    assert 1.0 < cert.y_bar < 1.5
    # certified upper slope must keep the loop strictly stable
    assert cert.sector.gamma2[0, 0] < -37.0 / 29.0
    assert cert.sector.gamma1[0, 0] > -3.0


def test_nn_certify_deterministic(demo):
    assert nn_aizerman_certify(demo).y_bar == nn_aizerman_certify(demo).y_bar


def test_nn_certify_failure_carries_diagnostics(plant):
    net = FeedforwardNet((np.array([[1.0]]), np.array([[-5.0]])), ("tanh",))
    system = LureSystem(plant=plant, net=net)
    with pytest.raises(CertificationFailure) as exc:
        nn_aizerman_certify(system)
    diag = exc.value.diagnostics
    assert not diag["metzler_ok"]
    assert diag["y_bar"] <= 1e-3
    assert diag["gamma1"][0][0] < -3.0


# --- analytic region ------------------------------------------------------------------

def test_aizerman_roa_published_geometry(plant):
    roa = aizerman_roa(plant, sector(-3.0, -1.276))
    assert 0.41 <= roa.ratio <= 0.42
    assert roa.bound[0] == pytest.approx(roa.ratio * 8.0)
    assert roa.v.entries.min() > 0.0


def test_aizerman_roa_scales_with_box(plant):
    small = aizerman_roa(plant, sector(-3.0, -1.276, yu=1.0))
    large = aizerman_roa(plant, sector(-3.0, -1.276, yu=12.2))
    assert large.bound[0] == pytest.approx(12.2 * small.bound[0], rel=1e-6)


def test_aizerman_roa_requires_finite_box(plant):
    with pytest.raises(ValueError):
        aizerman_roa(plant, sector(-3.0, -1.276, yu=np.inf))


def test_aizerman_roa_requires_metzler_upper(plant):
    with pytest.raises(CertificationFailure):
        aizerman_roa(plant, sector(-4.0, -3.5))


def test_linear_certificate_witness(plant):
    cert = linear_certificate(plant, [[-1.5]])
    m = plant.a + plant.b @ np.array([[-1.5]]) @ plant.c
    assert np.all(cert.v.entries @ m < 0.0)
    assert cert.abscissa == pytest.approx(spectral_abscissa(m))


# --- quadratic route -------------------------------------------------------------------

def test_quad_certificate_solves_stated_equation(plant):
    cert = quad_certificate(plant, [[-1.3]])
    m = plant.a + plant.b @ np.array([[-1.3]]) @ plant.c
    q = np.eye(2) + cert.eps * np.ones((2, 2))
    residual = m.T @ cert.p + cert.p @ m + q
    assert np.abs(residual).max() < 1e-8 * (1.0 + np.abs(cert.p).max())
    assert cert.p.min() > 0.0
    assert np.all(np.linalg.eigvalsh(cert.p) > 0.0)
    assert cert.residual_abscissa < 0.0


def test_quad_certificate_rejects_unstable_slope(plant):
    with pytest.raises(CertificationFailure) as exc:
        quad_certificate(plant, [[-1.2]])
    assert exc.value.diagnostics["abscissa"] > 0.0


def test_vdot_matches_linear_formula(plant):
    # identity-net feedback makes vdot exactly the quadratic form of the
    # closed-loop Lyapunov operator
    k = -1.8
    net = FeedforwardNet((np.array([[k]]),), ())
    system = LureSystem(plant=plant, net=net)
    m = plant.a + k * plant.b @ plant.c
    p = quad_certificate(plant, [[k]]).p
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.uniform(0.0, 5.0, 2)
        assert vdot(system, p, x) == pytest.approx(x @ (m.T @ p + p @ m) @ x, rel=1e-10)


def test_sublevel_caps_on_globally_stable_loop(plant):
    net = FeedforwardNet((np.array([[-2.0]]),), ())
    system = LureSystem(plant=plant, net=net)
    p = quad_certificate(plant, [[-2.0]]).p
    res = sublevel_roa(system, p, schedule=RhoSchedule(cap=100.0),
                       samples_per_level=64, seed=0)
    # linear stable dynamics never violate, so growth hits the cap
    assert res.capped
    assert res.violation is None
    assert res.rho_max > 0.0


def test_sublevel_on_demo_system(demo):
    p = quad_certificate(demo.plant, demo.sector.sigma2).p
    res = sublevel_roa(demo, p, samples_per_level=128, seed=0)
    assert res.rho_max > 0.0
    assert not res.capped
    # growth stopped at a genuine counterexample to further expansion
    assert res.violation is not None
    assert res.violation_vdot >= 0.0
    assert vdot(demo, p, res.violation) == pytest.approx(res.violation_vdot)
    # saturation makes the open-loop instability visible far out, so the
    # verified set pokes past the output box the sector was certified on
    assert res.inside_gamma is False


def test_sublevel_deterministic(demo):
    p = quad_certificate(demo.plant, demo.sector.sigma2).p
    a = sublevel_roa(demo, p, samples_per_level=64, seed=7)
    b = sublevel_roa(demo, p, samples_per_level=64, seed=7)
    assert a.rho_max == b.rho_max
    assert a.levels_tested == b.levels_tested


def test_sublevel_boundary_points_on_level_set(demo):
    from lurecert.certify import _boundary_samples
    p = quad_certificate(demo.plant, demo.sector.sigma2).p
    xs = _boundary_samples(p, 3.7, 256, np.random.default_rng(0))
    quad = np.einsum("ki,ij,kj->k", xs, p, xs)
    assert np.allclose(quad, 3.7, rtol=1e-10)
    assert xs.min() >= 0.0


def test_sublevel_rejects_bad_start(demo):
    p = quad_certificate(demo.plant, demo.sector.sigma2).p
    with pytest.raises(ValueError):
        sublevel_roa(demo, p, schedule=RhoSchedule(start=-1.0))
