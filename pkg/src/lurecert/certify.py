"""Stability certificates and region-of-attraction estimates.

Two independent certification routes for a positive plant under sector
feedback, both reducing to matrix conditions on the extreme closed loops
A + B sigma1 C and A + B sigma2 C:

  * a sector route: if the lower extreme is Metzler and the upper extreme
    is Hurwitz, the loop is exponentially stable for every feedback in the
    sector, and a strictly positive left vector of the upper extreme turns
    the output box height into an explicit linear region of attraction;

  * a quadratic route: a Lyapunov matrix P for the upper extreme, positive
    definite and entrywise positive, whose sublevel sets are grown until a
    sampled boundary point stops decreasing.

The two routes are kept deliberately separate so they can cross-check each
other; nothing here shares intermediate results between them.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificationFailure, DimensionError, NumericalError
from .model import nn_eval
from .nnbound import propagate_sector
from .numcore import (ConeVector, cone_vector_max_ratio, is_hurwitz, is_metzler,
                      lyapunov_solve, spectral_abscissa)


@dataclass(frozen=True)
class AizermanVerdict:
    """Outcome of the two extreme-closed-loop tests."""

    closed_lower: np.ndarray
    closed_upper: np.ndarray
    metzler_ok: bool
    hurwitz_ok: bool
    lower_abscissa: float
    upper_abscissa: float

    @property
    def stable(self):
        return self.metzler_ok and self.hurwitz_ok


def _closed_loop(plant, slope):
    slope = np.asarray(slope, dtype=float)
    if slope.shape != (plant.m, plant.p):
        raise DimensionError(
            f"slope matrix must be {(plant.m, plant.p)}, got {slope.shape}"
        )
    return plant.a + plant.b @ slope @ plant.c


def aizerman_check(plant, sector, hurwitz_margin=1e-9):
    """Test the sector [sigma1, sigma2] on the plant.

    The lower extreme must be Metzler (so every slope in the sector keeps
    the loop internally positive; off-diagonals are monotone in the slope
    because B and C are nonnegative) and the upper extreme must be Hurwitz
    (the spectral abscissa is monotone over a Metzler-ordered family, so
    the upper extreme is the worst case).
    """
    lower = _closed_loop(plant, sector.sigma1)
    upper = _closed_loop(plant, sector.sigma2)
    lo_absc = spectral_abscissa(lower)
    up_absc = spectral_abscissa(upper)
    return AizermanVerdict(
        closed_lower=lower,
        closed_upper=upper,
        metzler_ok=is_metzler(lower),
        hurwitz_ok=up_absc < -hurwitz_margin,
        lower_abscissa=lo_absc,
        upper_abscissa=up_absc,
    )


def sector_limits(plant, hurwitz_margin=1e-9, tol=1e-6):
    """Extreme scalar sector [sigma1_min, sigma2_max] the plant admits.

    Scalar loops only (m = p = 1). sigma1_min is closed form: each
    off-diagonal entry of A + sigma B C is affine in sigma with nonnegative
    coefficient, so positivity fails first at
    max over off-diagonals of -a_ij / (BC)_ij. sigma2_max is the largest
    slope keeping A + sigma B C Hurwitz, found by doubling then bisection
    to absolute tolerance ``tol``; +/-inf are returned when a side is
    unconstrained (e.g. BC = 0 on the relevant entries).
    """
    if plant.m != 1 or plant.p != 1:
        raise DimensionError("sector_limits needs a single-input single-output loop")
    bc = plant.b @ plant.c
    n = plant.n
    off = ~np.eye(n, dtype=bool)
    ratios = [
        -plant.a[i, j] / bc[i, j]
        for i in range(n)
        for j in range(n)
        if i != j and bc[i, j] > 0.0
    ]
    sigma1_min = max(ratios) if ratios else -math.inf

    def hurwitz_at(s):
        return is_hurwitz(plant.a + s * bc, margin=hurwitz_margin)

    if np.all(bc[off] == 0.0) and np.all(np.diag(bc) == 0.0):
        # feedback never touches the dynamics
        if hurwitz_at(0.0):
            return sigma1_min, math.inf
        raise CertificationFailure("feedback cannot stabilize: BC = 0 and A is not Hurwitz")

    anchor = sigma1_min if math.isfinite(sigma1_min) else 0.0
    if not hurwitz_at(anchor):
        if math.isfinite(sigma1_min):
            raise CertificationFailure(
                "no stabilizing slope compatible with positivity",
                diagnostics={"sigma1_min": sigma1_min,
                             "abscissa_at_sigma1_min": spectral_abscissa(plant.a + anchor * bc)},
            )
        # unconstrained below: search downward for a stable anchor
        step = 1.0
        while step < 2.0 ** 60 and not hurwitz_at(anchor - step):
            step *= 2.0
        if step >= 2.0 ** 60:
            raise CertificationFailure("no stabilizing slope found in reachable range")
        anchor -= step
    lo = anchor
    step = 1.0
    while hurwitz_at(lo + step):
        lo += step
        step *= 2.0
        if lo > 2.0 ** 60:
            return sigma1_min, math.inf
    hi = lo + step
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hurwitz_at(mid):
            lo = mid
        else:
            hi = mid
    return sigma1_min, lo


@dataclass(frozen=True)
class NNCertification:
    """Certified output box and network sector passing the matrix tests."""

    y_bar: float
    sector: object  # NetworkSector
    verdict: AizermanVerdict


def nn_aizerman_certify(system, y_probe_max=20.0, tol=1e-3, hurwitz_margin=1e-9):
    """Certify the closed loop with the network's own propagated sector.

    Bisects on the output box height y_bar, running the matrix tests
    directly on the propagated slope matrices at each probe (no fixed
    target sector: the network earns whatever sector it can). Returns the
    largest certified height within ``tol``. Raises CertificationFailure
    with the failing condition recorded when even the smallest probe fails.
    """
    if system.plant.p != 1:
        raise DimensionError("certification needs a single plant output")

    def attempt(ybar):
        s = propagate_sector(system.net, [ybar])
        lower = _closed_loop(system.plant, s.gamma1)
        upper = _closed_loop(system.plant, s.gamma2)
        up_absc = spectral_abscissa(upper)
        v = AizermanVerdict(
            closed_lower=lower,
            closed_upper=upper,
            metzler_ok=is_metzler(lower),
            hurwitz_ok=up_absc < -hurwitz_margin,
            lower_abscissa=spectral_abscissa(lower),
            upper_abscissa=up_absc,
        )
        return v, s

    lo = min(tol, 1e-4)
    v0, s0 = attempt(lo)
    if not v0.stable:
        raise CertificationFailure(
            "network sector fails the matrix tests even on a vanishing box",
            diagnostics={
                "y_bar": lo,
                "metzler_ok": v0.metzler_ok,
                "hurwitz_ok": v0.hurwitz_ok,
                "gamma1": s0.gamma1.tolist(),
                "gamma2": s0.gamma2.tolist(),
            },
        )
    v_hi, s_hi = attempt(y_probe_max)
    if v_hi.stable:
        return NNCertification(y_bar=float(y_probe_max), sector=s_hi, verdict=v_hi)
    hi = y_probe_max
    best_v, best_s = v0, s0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v, s = attempt(mid)
        if v.stable:
            lo, best_v, best_s = mid, v, s
        else:
            hi = mid
    return NNCertification(y_bar=float(lo), sector=best_s, verdict=best_v)


@dataclass(frozen=True)
class AizermanROA:
    """Linear region of attraction {x >= 0 : C x <= bound} from a cone vector."""

    v: ConeVector
    ratio: float
    y_upper: np.ndarray
    bound: np.ndarray


def aizerman_roa(plant, sector, slack=1e-9, tol=1e-4):
    """Analytic region of attraction for a certified sector.

    A strictly positive left vector v of the upper extreme closed loop
    makes V(x) = v . x a Lyapunov function, and the sublevel set through
    the output box gives C x0 <= (min v / max v) * y_upper as an explicit
    initial-condition region. The vector maximizing min(v)/max(v) gives
    the largest such region, hence cone_vector_max_ratio.
    """
    yu = np.asarray(sector.y_upper, dtype=float)
    if not np.all(np.isfinite(yu)):
        raise ValueError("region construction needs a finite output box")
    upper = _closed_loop(plant, sector.sigma2)
    if not is_metzler(upper):
        raise CertificationFailure("upper extreme closed loop is not Metzler")
    v = cone_vector_max_ratio(upper, slack=slack, tol=tol)
    ratio = v.ratio
    return AizermanROA(v=v, ratio=ratio, y_upper=yu, bound=ratio * yu)


@dataclass(frozen=True)
class LinearCertificate:
    """Copositive linear Lyapunov witness v > 0 with v^T M < 0."""

    v: ConeVector
    abscissa: float


def linear_certificate(plant, sigma2, slack=1e-9):
    upper = _closed_loop(plant, sigma2)
    v = cone_vector_max_ratio(upper, slack=slack)
    return LinearCertificate(v=v, abscissa=spectral_abscissa(upper))


# --- quadratic route ----------------------------------------------------------

@dataclass(frozen=True)
class QuadCertificate:
    """Doubly positive Lyapunov matrix for the upper extreme closed loop."""

    p: np.ndarray
    sigma2: np.ndarray
    eps: float
    residual_abscissa: float


def quad_certificate(plant, sigma2, eps=1e-3, hurwitz_margin=1e-9):
    """Solve for P with M^T P + P M = -(I + eps * ones), P doubly positive.

    For Metzler Hurwitz M the Lyapunov solution against a positive right
    hand side is automatically entrywise positive (the integral form
    averages e^{M^T t} Q e^{M t}, all entrywise nonnegative with positive
    diagonal mixing); eps > 0 keeps the right hand side strictly positive.
    If rounding still produces a nonpositive entry or a failed Cholesky,
    eps escalates by tens up to 10 before giving up.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    m = _closed_loop(plant, sigma2)
    if not is_hurwitz(m, margin=hurwitz_margin):
        raise CertificationFailure(
            "upper extreme closed loop is not Hurwitz; no quadratic certificate exists",
            diagnostics={"abscissa": spectral_abscissa(m)},
        )
    n = m.shape[0]
    e = eps
    while e <= 10.0:
        q = np.eye(n) + e * np.ones((n, n))
        p = lyapunov_solve(m, q)
        residual_abscissa = spectral_abscissa(m.T @ p + p @ m)
        try:
            np.linalg.cholesky(p)
            definite = True
        except np.linalg.LinAlgError:
            definite = False
        if definite and p.min() > 0.0 and residual_abscissa < 0.0:
            return QuadCertificate(p=p, sigma2=sigma2, eps=e, residual_abscissa=residual_abscissa)
        e *= 10.0
    raise NumericalError("no doubly positive Lyapunov solution found up to eps = 10")


def vdot(system, p, x):
    """Derivative of V(x) = x^T P x along the closed loop at x."""
    x = np.asarray(x, dtype=float)
    f = system.plant.a @ x + system.plant.b @ nn_eval(system.net, system.plant.c @ x)
    return float(2.0 * x @ (p @ f))


@dataclass(frozen=True)
class RhoSchedule:
    """Growth schedule for the sublevel search."""

    start: float | None = None  # default 1e-3 / trace(P)
    factor: float = 1.3
    cap: float = 1e9
    max_levels: int = 1_000_000
    refine_rtol: float = 1e-3


@dataclass(frozen=True)
class SublevelResult:
    rho_max: float
    p: np.ndarray
    capped: bool
    levels_tested: int
    violation: np.ndarray | None
    violation_vdot: float | None
    inside_gamma: bool | None
    seed: int


def _boundary_samples(p, rho, k, rng):
    """Points on {x^T p x = rho} restricted to the positive orthant.

    Directions come from the unit sphere mapped through the inverse
    Cholesky factor; the map mixes coordinates, so points are folded back
    into the orthant by absolute value and renormalized onto the level set
    (folding can only increase x^T p x when p is entrywise positive, so
    the rescale is well defined either way).
    """
    n = p.shape[0]
    r = np.linalg.cholesky(p).T
    z = rng.normal(size=(k, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    x = np.abs(np.linalg.solve(r, z.T).T)
    quad = np.einsum("ki,ij,kj->k", x, p, x)
    return x * np.sqrt(rho / quad)[:, None]


def sublevel_roa(system, p, schedule=RhoSchedule(), samples_per_level=512, seed=0):
    """Largest sampled-certified sublevel set of V(x) = x^T P x.

    Levels grow geometrically from a small start; at each level the
    boundary (positive-orthant part, which is all a positive system can
    reach) is sampled and every sample must have vdot < 0. The first
    failing level is refined against the last passing one by bisection to
    relative tolerance ``refine_rtol``. Hitting the level-count or value
    cap without a violation returns the last level with ``capped=True``
    rather than claiming a global result.
    """
    p = np.asarray(p, dtype=float)
    rng = np.random.default_rng(seed)
    rho = schedule.start if schedule.start is not None else 1e-3 / np.trace(p)
    if rho <= 0.0:
        raise ValueError("schedule start must be positive")

    def level_ok(rho_level):
        xs = _boundary_samples(p, rho_level, samples_per_level, rng)
        for x in xs:
            val = vdot(system, p, x)
            if val >= 0.0:
                return False, x, val
        return True, None, None

    last_pass = 0.0
    levels = 0
    violation, violation_vdot = None, None
    capped = False
    while True:
        ok, x_bad, v_bad = level_ok(rho)
        levels += 1
        if not ok:
            violation, violation_vdot = x_bad, v_bad
            break
        last_pass = rho
        rho *= schedule.factor
        if levels >= schedule.max_levels or rho > schedule.cap:
            capped = True
            break
    if not capped and last_pass > 0.0:
        lo, hi = last_pass, rho
        while hi - lo > schedule.refine_rtol * hi:
            mid = 0.5 * (lo + hi)
            ok, x_bad, v_bad = level_ok(mid)
            levels += 1
            if ok:
                lo = mid
            else:
                hi = mid
                violation, violation_vdot = x_bad, v_bad
        last_pass = lo
    inside_gamma = None
    if system.sector is not None and np.all(np.isfinite(system.sector.y_upper)) and last_pass > 0.0:
        # conservative extent over the whole ellipsoid, not just the orthant part
        pinv_c = np.linalg.solve(p, system.plant.c.T)
        extent = np.sqrt(last_pass * np.einsum("ij,ji->i", system.plant.c, pinv_c))
        inside_gamma = bool(np.all(extent <= system.sector.y_upper))
    return SublevelResult(
        rho_max=float(last_pass),
        p=p,
        capped=capped,
        levels_tested=levels,
        violation=violation,
        violation_vdot=violation_vdot,
        inside_gamma=inside_gamma,
        seed=seed,
    )
