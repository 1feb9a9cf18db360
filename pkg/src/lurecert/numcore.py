"""Matrix and cone primitives for positive-system stability tests.

Everything works on plain float64 numpy arrays. These routines back
certification code whose output must be reproducible run to run, so all
of them are deterministic: no randomized pivoting, no solver restarts.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from .errors import CertificationFailure, DimensionError, NoSolutionError, NumericalError


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError(f"{name} has non-finite entries")
    return m


def is_metzler(m, tol=0.0):
    """True if every off-diagonal entry of ``m`` is >= -tol.

    Metzler matrices generate positive semigroups: e^{mt} is entrywise
    nonnegative for t >= 0, which is what keeps trajectories inside the
    positive orthant.
    """
    m = _as_square(m)
    off = m[~np.eye(m.shape[0], dtype=bool)]
    return bool(off.size == 0 or off.min() >= -tol)


def spectral_abscissa(m):
    """Largest real part over the eigenvalues of ``m``."""
    m = _as_square(m)
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"eigenvalue iteration failed: {e}") from e
    return float(ev.real.max())


def is_hurwitz(m, margin=1e-9):
    """True if the spectral abscissa of ``m`` is below ``-margin``.

    The strict margin keeps borderline matrices (abscissa within rounding
    of zero) out of certificates.
    """
    return spectral_abscissa(m) < -margin


def lyapunov_solve(m, q):
    """Solve m^T p + p m = -q for symmetric p.

    Uses Kronecker vectorization: stacking columns turns the equation into
    (I (x) m^T + m^T (x) I) vec(p) = -vec(q), an n^2 x n^2 dense solve.
    Intended for the small state dimensions this package handles (n <= ~30);
    the cubic-in-n^2 cost is irrelevant there and the code stays a direct,
    checkable linear solve.
    """
    m = _as_square(m, "m")
    q = _as_square(q, "q")
    if m.shape != q.shape:
        raise DimensionError(f"m and q must agree, got {m.shape} and {q.shape}")
    if not np.allclose(q, q.T, rtol=0.0, atol=1e-10 * (1.0 + np.abs(q).max())):
        raise ValueError("q must be symmetric")
    n = m.shape[0]
    eye = np.eye(n)
    k = np.kron(eye, m.T) + np.kron(m.T, eye)
    try:
        x = np.linalg.solve(k, -q.reshape(-1, order="F"))
    except np.linalg.LinAlgError as e:
        raise NoSolutionError(
            "Lyapunov equation is singular (eigenvalue pair of m sums to zero)"
        ) from e
    p = x.reshape((n, n), order="F")
    return 0.5 * (p + p.T)


def signed_split(w):
    """Split ``w`` into (w_plus, w_minus) with w = w_plus + w_minus.

    w_plus keeps the positive entries, w_minus the negative ones; both are
    returned with the original shape. The split is exact in floating point
    because each entry is copied, never recomputed.
    """
    w = np.asarray(w, dtype=float)
    return np.maximum(w, 0.0), np.minimum(w, 0.0)


@dataclass(frozen=True)
class ConeVector:
    """A strictly positive left vector v with v^T m entrywise negative."""

    entries: np.ndarray

    @property
    def v_min(self):
        return float(self.entries.min())

    @property
    def v_max(self):
        return float(self.entries.max())

    @property
    def ratio(self):
        return self.v_min / self.v_max


def _feasible_point(m, t, slack):
    """A point of {t <= v <= 1, v^T m <= -slack}, or None.

    For n <= 3 the polytope's vertices are enumerated exactly (it lives in
    the unit box, so feasibility implies a feasible vertex); larger n goes
    through an LP feasibility solve.
    """
    n = m.shape[0]
    if n <= 3:
        g = np.vstack([-np.eye(n), np.eye(n), m.T])
        h = np.concatenate([-t * np.ones(n), np.ones(n), -slack * np.ones(n)])
        for rows in combinations(range(len(h)), n):
            gs = g[list(rows)]
            try:
                v = np.linalg.solve(gs, h[list(rows)])
            except np.linalg.LinAlgError:
                continue
            if np.all(g @ v <= h + 1e-9):
                return v
        return None
    res = linprog(
        c=np.zeros(n),
        A_ub=m.T,
        b_ub=-slack * np.ones(n),
        bounds=[(t, 1.0)] * n,
        method="highs",
    )
    return res.x if res.status == 0 else None


def cone_vector_max_ratio(m, slack=1e-9, tol=1e-4):
    """Find v > 0 with v^T m < 0 maximizing min(v)/max(v).

    The ratio is scale invariant, so v is normalized into the unit box and
    the problem becomes the largest t such that {t <= v <= 1, v^T m <= -slack}
    is nonempty. That feasibility is monotone in t, so plain bisection on
    t in (0, 1] to absolute tolerance ``tol`` finds it; each probe is a tiny
    LP (or exact vertex enumeration in low dimension).

    Raises CertificationFailure when no such vector exists at all, which for
    Metzler m means the matrix is not Hurwitz.
    """
    m = _as_square(m)
    t0 = 1e-12
    v = _feasible_point(m, t0, slack)
    if v is None:
        raise CertificationFailure(
            "no strictly positive v with v^T m entrywise negative exists",
            diagnostics={"slack": slack},
        )
    best = v
    lo, hi = t0, 1.0
    v1 = _feasible_point(m, 1.0, slack)
    if v1 is not None:
        lo, best = 1.0, v1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = _feasible_point(m, mid, slack)
        if v is None:
            hi = mid
        else:
            lo, best = mid, v
    if not (best.min() > 0.0 and np.all(best @ m < 0.0)):
        raise NumericalError("cone vector failed strict post-verification")
    return ConeVector(entries=best)
