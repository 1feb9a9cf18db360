"""System models: positive plants, sector intervals, feedforward nets.

A closed loop here is an internally positive linear plant
    xdot = A x + B u,   y = C x
driven by a static feedforward network u = N(y). All model objects are
frozen dataclasses over read-only float64 arrays, validated at
construction, so anything downstream can trust shapes and signs.

The JSON document format mirrors the dataclasses:

    {"A": [[...]], "B": [[...]], "C": [[...]],
     "network": {"weights": [[[...]], ...], "activations": ["tanh", ...]},
     "sector": {"sigma1": [[...]], "sigma2": [[...]], "y_upper": [...]}}

``weights`` lists the layer matrices input to output; ``activations`` has
one entry per hidden layer (the output layer is linear). ``sector`` is
optional metadata: a slope interval the network is claimed to satisfy on
the output box [0, y_upper].
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SystemFormatError


def _frozen_array(x, name, ndim):
    a = np.asarray(x, dtype=float)
    if a.ndim != ndim:
        raise SystemFormatError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SystemFormatError(f"{name} has non-finite entries")
    a.flags.writeable = False
    return a


# --- activations -----------------------------------------------------------

def _tanh_chord(v, side=1.0):
    """Chord slope tanh(v)/v, continued by its limit 1 at v = 0."""
    v = np.asarray(v, dtype=float)
    out = np.ones_like(v)
    nz = np.abs(v) > 1e-8
    out[nz] = np.tanh(v[nz]) / v[nz]
    return out


def _relu_chord(v, side=1.0):
    # at v = 0 the chord is taken from the side the interval lives on
    v = np.asarray(v, dtype=float)
    out = np.where(v > 0.0, 1.0, 0.0)
    return np.where(v == 0.0, 1.0 if side > 0 else 0.0, out)


def _identity_chord(v, side=1.0):
    return np.ones_like(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class Activation:
    """A scalar activation plus the hooks the sector relaxation needs.

    ``chord(v, side)`` is phi(v)/v extended by continuity at 0 (``side``
    disambiguates kinked activations like relu there). ``crossing`` is the
    (lower, upper) slope pair that stays valid on intervals straddling 0,
    used with absolute-value row bounds. ``exact_linear`` marks activations
    whose chord is exact (identity), where no crossing relaxation is needed.
    """

    name: str
    fn: object
    chord: object
    crossing: tuple
    exact_linear: bool = False


ACTIVATIONS = {
    "tanh": Activation("tanh", np.tanh, _tanh_chord, (-1.0, 1.0)),
    "relu": Activation("relu", lambda v: np.maximum(v, 0.0), _relu_chord, (0.0, 1.0)),
    "identity": Activation("identity", lambda v: np.asarray(v, dtype=float),
                           _identity_chord, (1.0, 1.0), exact_linear=True),
}


def get_activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise SystemFormatError(
            f"unknown activation {name!r}; supported: {sorted(ACTIVATIONS)}"
        ) from None


# --- model objects ----------------------------------------------------------

@dataclass(frozen=True)
class PositiveLTI:
    """Internally positive plant (A Metzler, B and C entrywise nonnegative)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = _frozen_array(self.a, "A", 2)
        b = _frozen_array(self.b, "B", 2)
        c = _frozen_array(self.c, "C", 2)
        if a.shape[0] != a.shape[1]:
            raise SystemFormatError(f"A must be square, got shape {a.shape}")
        n = a.shape[0]
        if b.shape[0] != n:
            raise SystemFormatError(f"B must have {n} rows, got shape {b.shape}")
        if c.shape[1] != n:
            raise SystemFormatError(f"C must have {n} columns, got shape {c.shape}")
        off = np.array(a)
        np.fill_diagonal(off, 0.0)
        if off.min() < 0.0:
            i, j = np.unravel_index(np.argmin(off), off.shape)
            raise SystemFormatError(f"A is not Metzler at ({i}, {j}): {a[i, j]}")
        for name, mat in (("B", b), ("C", c)):
            if mat.min() < 0.0:
                i, j = np.unravel_index(np.argmin(mat), mat.shape)
                raise SystemFormatError(f"{name} is not nonnegative at ({i}, {j}): {mat[i, j]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.b.shape[1]

    @property
    def p(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class SectorInterval:
    """Slope interval [sigma1, sigma2] on the output box [0, y_upper].

    sigma1 and sigma2 are m x p slope matrices bounding the feedback map
    entrywise: sigma1 y <= N(y) <= sigma2 y for y in the box. y_upper may
    contain +inf for a global claim.
    """

    sigma1: np.ndarray
    sigma2: np.ndarray
    y_upper: np.ndarray

    def __post_init__(self):
        s1 = _frozen_array(self.sigma1, "sigma1", 2)
        s2 = _frozen_array(self.sigma2, "sigma2", 2)
        yu = np.asarray(self.y_upper, dtype=float)
        if yu.ndim != 1:
            raise SystemFormatError(f"y_upper must be a vector, got shape {yu.shape}")
        if np.any(np.isnan(yu)) or yu.min() <= 0.0:
            raise SystemFormatError("y_upper entries must be positive (inf allowed)")
        if s1.shape != s2.shape:
            raise SystemFormatError(f"sigma1 and sigma2 must agree, got {s1.shape} and {s2.shape}")
        if s2.shape[1] != yu.shape[0]:
            raise SystemFormatError("sector slope columns must match y_upper length")
        if np.any(s1 > s2):
            raise SystemFormatError("sector requires sigma1 <= sigma2 entrywise")
        yu.flags.writeable = False
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "y_upper", yu)


@dataclass(frozen=True)
class FeedforwardNet:
    """Fully connected net without biases: x -> W_last phi(... phi(W_1 x))."""

    weights: tuple
    activations: tuple

    def __post_init__(self):
        ws = tuple(_frozen_array(w, f"weights[{i}]", 2) for i, w in enumerate(self.weights))
        acts = tuple(str(a) for a in self.activations)
        if not ws:
            raise SystemFormatError("network needs at least one weight matrix")
        if len(acts) != len(ws) - 1:
            raise SystemFormatError(
                f"expected {len(ws) - 1} activations for {len(ws)} weight layers, got {len(acts)}"
            )
        for a in acts:
            get_activation(a)
        for i in range(len(ws) - 1):
            if ws[i + 1].shape[1] != ws[i].shape[0]:
                raise SystemFormatError(
                    f"layer {i + 1} expects width {ws[i].shape[0]}, "
                    f"weights[{i + 1}] has {ws[i + 1].shape[1]} columns"
                )
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "activations", acts)

    @property
    def input_width(self):
        return self.weights[0].shape[1]

    @property
    def output_width(self):
        return self.weights[-1].shape[0]

    @property
    def hidden_layers(self):
        return len(self.weights) - 1


@dataclass(frozen=True)
class LureSystem:
    """Positive plant in feedback with a static feedforward network."""

    plant: PositiveLTI
    net: FeedforwardNet
    sector: SectorInterval | None = None

    def __post_init__(self):
        if self.net.input_width != self.plant.p:
            raise SystemFormatError(
                f"network input width {self.net.input_width} != plant output count {self.plant.p}"
            )
        if self.net.output_width != self.plant.m:
            raise SystemFormatError(
                f"network output width {self.net.output_width} != plant input count {self.plant.m}"
            )
        if self.sector is not None:
            s = self.sector
            if s.sigma1.shape != (self.plant.m, self.plant.p):
                raise SystemFormatError(
                    f"sector slopes must be {(self.plant.m, self.plant.p)}, got {s.sigma1.shape}"
                )


def nn_eval(net, y):
    """Evaluate the network on y, shape (p,) or batched (k, p).

    Output has shape (m,) or (k, m) to match. Finite input gives finite
    output: tanh saturates and relu/identity grow at most linearly.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("network input must be finite")
    single = y.ndim == 1
    h = y[None, :] if single else y
    if h.ndim != 2 or h.shape[1] != net.input_width:
        raise DimensionError(f"expected input width {net.input_width}, got shape {y.shape}")
    for w, act in zip(net.weights[:-1], net.activations):
        h = get_activation(act).fn(h @ w.T)
    out = h @ net.weights[-1].T
    return out[0] if single else out


# --- document i/o -----------------------------------------------------------

def system_from_dict(doc):
    """Build a LureSystem from a plain dict in the document format."""
    if not isinstance(doc, dict):
        raise SystemFormatError(f"system document must be an object, got {type(doc).__name__}")
    for key in ("A", "B", "C", "network"):
        if key not in doc:
            raise SystemFormatError(f"system document is missing key {key!r}")
    netdoc = doc["network"]
    if not isinstance(netdoc, dict) or "weights" not in netdoc or "activations" not in netdoc:
        raise SystemFormatError("network block needs 'weights' and 'activations'")
    try:
        plant = PositiveLTI(doc["A"], doc["B"], doc["C"])
        net = FeedforwardNet(tuple(np.asarray(w, dtype=float) for w in netdoc["weights"]),
                             tuple(netdoc["activations"]))
    except (ValueError, TypeError) as e:
        if isinstance(e, SystemFormatError):
            raise
        raise SystemFormatError(f"malformed system document: {e}") from e
    sector = None
    if doc.get("sector") is not None:
        sec = doc["sector"]
        for key in ("sigma1", "sigma2", "y_upper"):
            if key not in sec:
                raise SystemFormatError(f"sector block is missing key {key!r}")
        sector = SectorInterval(sec["sigma1"], sec["sigma2"], sec["y_upper"])
    return LureSystem(plant=plant, net=net, sector=sector)


def system_to_dict(system):
    doc = {
        "A": system.plant.a.tolist(),
        "B": system.plant.b.tolist(),
        "C": system.plant.c.tolist(),
        "network": {
            "weights": [w.tolist() for w in system.net.weights],
            "activations": list(system.net.activations),
        },
    }
    if system.sector is not None:
        doc["sector"] = {
            "sigma1": system.sector.sigma1.tolist(),
            "sigma2": system.sector.sigma2.tolist(),
            "y_upper": system.sector.y_upper.tolist(),
        }
    return doc


def load_system(path):
    """Load and validate a system document from a JSON file."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise SystemFormatError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}") from e
    except OSError as e:
        raise SystemFormatError(f"cannot read {path}: {e}") from e
    return system_from_dict(doc)


def save_system(system, path):
    with open(path, "w") as f:
        json.dump(system_to_dict(system), f, indent=2, sort_keys=True)
        f.write("\n")


# --- bundled demonstration system -------------------------------------------

FIXTURE_SECTOR_LOW = -3.0
FIXTURE_SECTOR_HIGH = -1.276
FIXTURE_Y_UPPER = 8.0

# grid-check margins inside the published interval, so float noise in the
# forward pass can never push a verified net out of sector
_FIXTURE_CHECK_LOW = -2.95
_FIXTURE_CHECK_HIGH = -1.296


def fixture_net(seed=0):
    """Deterministic 1-16-16-1 tanh net in sector [-3, -1.276] on [0, 8].

    Raw weights are drawn from a seeded generator, the input layer is scaled
    to a fixed sensitivity, and the output layer is rescaled so the gain at
    y = 0 is exactly -1.8 (mid sector). The candidate is then verified by a
    dense grid sweep of the chord N(y)/y over (0, 8]; attempts that leave the
    margin-tightened interval are discarded and the generator is re-seeded
    with the attempt index, so the whole construction is reproducible.
    """
    for attempt in range(200):
        rng = np.random.default_rng([int(seed), attempt])
        w1 = rng.uniform(-1.0, 1.0, (16, 1))
        w2 = rng.uniform(-1.0, 1.0, (16, 16)) / 4.0
        w3 = rng.uniform(-1.0, 1.0, (1, 16))
        w1 *= 0.18 / np.abs(w1).max()
        gain = (w3 @ w2 @ w1)[0, 0]
        if abs(gain) < 1e-6:
            continue
        w3 *= -1.8 / gain
        net = FeedforwardNet((w1, w2, w3), ("tanh", "tanh"))
        ys = np.linspace(1e-6, FIXTURE_Y_UPPER, 4001)
        chords = nn_eval(net, ys[:, None])[:, 0] / ys
        if chords.min() >= _FIXTURE_CHECK_LOW and chords.max() <= _FIXTURE_CHECK_HIGH:
            return net
    raise RuntimeError(f"no fixture network found for seed {seed}")


def demo_plant():
    """The bundled two-state positive plant (open-loop unstable)."""
    return PositiveLTI(a=[[-7.0, 5.0], [6.0, 1.0]], b=[[1.0], [2.0]], c=[[1.0, 1.0]])


def demo_system(seed=0):
    """Bundled demonstration closed loop: demo plant + fixture net."""
    sector = SectorInterval(
        sigma1=[[FIXTURE_SECTOR_LOW]],
        sigma2=[[FIXTURE_SECTOR_HIGH]],
        y_upper=[FIXTURE_Y_UPPER],
    )
    return LureSystem(plant=demo_plant(), net=fixture_net(seed), sector=sector)


def write_demo_system(path, seed=0):
    save_system(demo_system(seed), path)
    return path
