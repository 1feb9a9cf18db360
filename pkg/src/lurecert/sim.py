"""Trajectory simulation and sampling-based region-of-attraction checks.

Fixed-step classical Runge-Kutta (RK4) only: with the step pinned, every
run is reproducible to the bit, which matters because these simulations
cross-validate certificates. Convergence of a trajectory means its state
sup-norm dips below 1e-4 at some recorded time and never re-exceeds 1e-3
afterwards within the horizon; divergence means the sup-norm passed 1e6.
Anything else is censored (undecided at this horizon).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .model import get_activation, nn_eval

CONVERGE_NORM = 1e-4
REEXCURSION_NORM = 1e-3
DIVERGE_NORM = 1e6
ORTHANT_FLOOR = -1e-9


def _closed_loop_field(system):
    a, b, c = system.plant.a, system.plant.b, system.plant.c
    ws = system.net.weights
    fns = [get_activation(name).fn for name in system.net.activations]

    def f(x):
        # x is (n,) or (k, n); inputs stay finite because the integration
        # loops freeze rows before they can overflow
        y = x @ c.T
        h = y if y.ndim == 2 else y[None, :]
        for w, fn in zip(ws[:-1], fns):
            h = fn(h @ w.T)
        u = h @ ws[-1].T
        if y.ndim == 1:
            u = u[0]
        return x @ a.T + u @ b.T

    return f


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _converged_from_norms(norms):
    big = np.flatnonzero(norms > REEXCURSION_NORM)
    start = big[-1] + 1 if big.size else 0
    return bool(np.any(norms[start:] < CONVERGE_NORM))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    converged: bool
    events: dict  # first-occurrence times: left_orthant, left_gamma, diverged


def integrate(system, x0, horizon=50.0, step=1e-3, y_upper=None):
    """Integrate the closed loop from x0 with fixed-step RK4.

    Records state and output at every step. Divergence stops the run; the
    other events (leaving the positive orthant beyond a 1e-9 numerical
    floor, output leaving the box [0, y_upper] if one is given) are recorded
    with their first times but do not stop it, since the trajectory remains
    well defined.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.plant.n,):
        raise DimensionError(f"x0 must have shape ({system.plant.n},), got {x0.shape}")
    if x0.min() < 0.0:
        raise ValueError("x0 must lie in the positive orthant")
    if step <= 0.0 or horizon <= step:
        raise ValueError("need 0 < step < horizon")
    f = _closed_loop_field(system)
    c = system.plant.c
    yu = None if y_upper is None else np.atleast_1d(np.asarray(y_upper, dtype=float))
    n_steps = int(round(horizon / step))
    times = np.arange(n_steps + 1) * step
    states = np.empty((n_steps + 1, system.plant.n))
    outputs = np.empty((n_steps + 1, system.plant.p))
    events = {}
    x = x0.copy()
    last = n_steps
    for i in range(n_steps + 1):
        states[i] = x
        outputs[i] = c @ x
        if "left_orthant" not in events and x.min() < ORTHANT_FLOOR:
            events["left_orthant"] = float(times[i])
        if yu is not None and "left_gamma" not in events and np.any(outputs[i] > yu):
            events["left_gamma"] = float(times[i])
        if np.abs(x).max() > DIVERGE_NORM:
            events["diverged"] = float(times[i])
            last = i
            break
        if i < n_steps:
            x = _rk4_step(f, x, step)
    times, states, outputs = times[: last + 1], states[: last + 1], outputs[: last + 1]
    converged = "diverged" not in events and _converged_from_norms(np.abs(states).max(axis=1))
    return Trajectory(times=times, states=states, outputs=outputs,
                      converged=converged, events=events)


# --- regions and samplers ----------------------------------------------------

@dataclass(frozen=True)
class HalfSpaceRegion:
    """{x >= 0 : normal . x <= bound}; normal must be entrywise positive."""

    normal: np.ndarray
    bound: float


@dataclass(frozen=True)
class EllipsoidRegion:
    """{x >= 0 : x^T p x <= rho} for symmetric positive definite p."""

    p: np.ndarray
    rho: float


def sample_region(region, n_samples, rng):
    """Draw n_samples points from the region with the given generator.

    Half-space regions use rejection from the bounding box; ellipsoids use
    the uniform-ball map through the inverse Cholesky factor with rejection
    into the orthant. Both are deterministic given the generator state.
    """
    if isinstance(region, HalfSpaceRegion):
        normal = np.asarray(region.normal, dtype=float)
        if normal.min() <= 0.0:
            raise ValueError("half-space normal must be entrywise positive")
        hi = region.bound / normal
        out = np.empty((0, normal.size))
        for _ in range(10000):
            cand = rng.uniform(0.0, 1.0, (max(n_samples, 64), normal.size)) * hi
            keep = cand @ normal <= region.bound
            out = np.vstack([out, cand[keep]])
            if len(out) >= n_samples:
                return out[:n_samples]
        raise RuntimeError("half-space rejection sampling stalled")
    if isinstance(region, EllipsoidRegion):
        p = np.asarray(region.p, dtype=float)
        n = p.shape[0]
        r = np.linalg.cholesky(p).T  # p = r^T r
        out = np.empty((0, n))
        for _ in range(10000):
            z = rng.normal(size=(max(4 * n_samples, 256), n))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            z *= rng.uniform(0.0, 1.0, (len(z), 1)) ** (1.0 / n)
            cand = np.sqrt(region.rho) * np.linalg.solve(r, z.T).T
            keep = cand.min(axis=1) >= 0.0
            out = np.vstack([out, cand[keep]])
            if len(out) >= n_samples:
                return out[:n_samples]
        raise RuntimeError("ellipsoid rejection sampling stalled (orthant mass too small)")
    raise TypeError(f"unknown region type {type(region).__name__}")


@dataclass
class RoaClassification:
    samples: np.ndarray
    verdicts: list
    diverged_times: np.ndarray  # nan where not diverged

    @property
    def converged_fraction(self):
        return sum(v == "converged" for v in self.verdicts) / len(self.verdicts)

    def counts(self):
        return {v: self.verdicts.count(v) for v in ("converged", "diverged", "censored")}


def classify_roa(system, region, n_samples=100, seed=0, horizon=50.0, step=1e-3):
    """Sample the region and classify each trajectory's fate.

    All trajectories advance together through one vectorized RK4 loop
    (they are independent, so batching changes nothing but speed).
    Diverged rows are frozen at the origin once flagged so the rest of the
    batch keeps integrating without overflow.
    """
    rng = np.random.default_rng(seed)
    samples = sample_region(region, n_samples, rng)
    f = _closed_loop_field(system)
    n_steps = int(round(horizon / step))
    x = samples.copy()
    diverged = np.zeros(n_samples, dtype=bool)
    div_time = np.full(n_samples, np.nan)
    candidate = np.zeros(n_samples, dtype=bool)
    for i in range(n_steps + 1):
        norms = np.abs(x).max(axis=1)
        newly = (~diverged) & (norms > DIVERGE_NORM)
        if np.any(newly):
            div_time[newly] = i * step
            diverged |= newly
            x[newly] = 0.0
            norms = np.abs(x).max(axis=1)
        candidate = np.where(norms > REEXCURSION_NORM, False, candidate | (norms < CONVERGE_NORM))
        if i < n_steps:
            x = _rk4_step(f, x, step)
            x[diverged] = 0.0
    verdicts = [
        "diverged" if diverged[i] else ("converged" if candidate[i] else "censored")
        for i in range(n_samples)
    ]
    return RoaClassification(samples=samples, verdicts=verdicts, diverged_times=div_time)


# --- direct sector scan -------------------------------------------------------

def gamma_scan(net, sector, y_max, grid=1000):
    """Empirical counterpart of the certified sector search.

    Sweeps the chord N(y)/y over a uniform grid on (0, y_max] and returns
    the largest height whose whole prefix satisfies the sector inequalities,
    refining the first violation by bisection down to y_max/grid/100.
    Unlike the certified search this sees only grid points, so it upper
    bounds the true sector-validity height; agreement with the certified
    value is evidence, not proof.
    """
    if net.input_width != 1:
        raise DimensionError("gamma_scan needs a scalar-input network")
    s1 = np.asarray(sector.sigma1, dtype=float).ravel()
    s2 = np.asarray(sector.sigma2, dtype=float).ravel()

    def point_ok(y):
        chord = nn_eval(net, np.array([y])) / y
        return bool(np.all(chord >= s1) and np.all(chord <= s2))

    ys = np.linspace(y_max / grid, y_max, grid)
    chords = nn_eval(net, ys[:, None]) / ys[:, None]
    ok = np.all(chords >= s1, axis=1) & np.all(chords <= s2, axis=1)
    if ok.all():
        return float(y_max)
    first_bad = int(np.argmin(ok))
    lo = 0.0 if first_bad == 0 else float(ys[first_bad - 1])
    hi = float(ys[first_bad])
    if lo == 0.0 and not point_ok(hi * 1e-6):
        return 0.0
    tol = y_max / grid / 100.0
    if lo == 0.0:
        lo = hi * 1e-6
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if point_ok(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


# --- csv dumps ----------------------------------------------------------------

def trajectory_csv(traj):
    n = traj.states.shape[1]
    p = traj.outputs.shape[1]
    header = ",".join(["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(p)])
    rows = [header]
    for t, x, y in zip(traj.times, traj.states, traj.outputs):
        rows.append(",".join(f"{v:.12g}" for v in [t, *x, *y]))
    return "\n".join(rows) + "\n"


def roa_samples_csv(result):
    n = result.samples.shape[1]
    header = ",".join([f"x0_{i + 1}" for i in range(n)] + ["verdict"])
    rows = [header]
    for x0, v in zip(result.samples, result.verdicts):
        rows.append(",".join([f"{val:.12g}" for val in x0] + [v]))
    return "\n".join(rows) + "\n"
