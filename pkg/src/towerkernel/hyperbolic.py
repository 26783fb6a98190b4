"""Moebius arithmetic and hyperbolic geometry in the disc and half-plane models.

Maps are stored as determinant-one 2x2 complex matrices.  A matrix and its
negative describe the same isometry, so equality is sign-insensitive.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

DISC = "disc"
HALFPLANE = "halfplane"
MODELS = (DISC, HALFPLANE)

EQ_TOL = 1e-10
_SHAPE_TOL = 1e-12
_PROBES = {
    DISC: (0.0j, 0.5 + 0.0j, -0.3 + 0.4j),
    HALFPLANE: (1j, 2.0 + 0.5j, -1.0 + 3.0j),
}


class ModelMismatchError(ValueError):
    """Two objects from different models were combined."""


def one_minus_abs2(z):
    """1 - |z|^2 evaluated as (1-|z|)(1+|z|), which keeps accuracy near the circle."""
    r = abs(z)
    return (1.0 - r) * (1.0 + r)


def _check_model(model: str) -> None:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


@dataclass(frozen=True)
class ModelPoint:
    coordinate: complex
    model: str = DISC

    def __post_init__(self):
        _check_model(self.model)
        z = complex(self.coordinate)
        object.__setattr__(self, "coordinate", z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ValueError(f"non-finite coordinate {z!r}")
        if self.model == DISC and not abs(z) < 1.0:
            raise ValueError(f"{z!r} is not inside the unit disc")
        if self.model == HALFPLANE and not z.imag > 0.0:
            raise ValueError(f"{z!r} is not in the upper half-plane")

    def __complex__(self) -> complex:
        return self.coordinate


def as_point(p, model: str = DISC) -> ModelPoint:
    """Coerce a bare number to a ModelPoint; ModelPoints pass through."""
    if isinstance(p, ModelPoint):
        return p
    return ModelPoint(complex(p), model)


@dataclass(frozen=True, eq=False)
class MoebiusMap:
    a: complex
    b: complex
    c: complex
    d: complex
    model: str = DISC

    def __post_init__(self):
        _check_model(self.model)
        a, b, c, d = (complex(x) for x in (self.a, self.b, self.c, self.d))
        det = a * d - b * c
        if det == 0 or not cmath.isfinite(det):
            raise ValueError("singular or non-finite matrix")
        # det is formed with cancellation of size |ad| + |bc|; when it already equals 1
        # to that accuracy (products of normalised maps) rescaling would only add error
        size = abs(a * d) + abs(b * c)
        if abs(det - 1.0) > 1e-9 * max(1.0, size):
            s = cmath.sqrt(det)
            a, b, c, d = a / s, b / s, c / s, d / s
        # half-plane maps with positive determinant stay real after scaling
        if self.model == HALFPLANE and det.real > 0 and abs(det.imag) <= _SHAPE_TOL * abs(det):
            a, b, c, d = (complex(x.real, 0.0) if abs(x.imag) <= _SHAPE_TOL * max(1.0, abs(x)) else x
                          for x in (a, b, c, d))
        for name, value in zip("abcd", (a, b, c, d)):
            object.__setattr__(self, name, value)
        if not self.preserves_model():
            raise ValueError(f"matrix does not preserve the {self.model} model")

    @classmethod
    def identity(cls, model: str = DISC) -> "MoebiusMap":
        return cls(1, 0, 0, 1, model)

    @property
    def entries(self) -> tuple[complex, complex, complex, complex]:
        return (self.a, self.b, self.c, self.d)

    def has_model_shape(self, tol: float = _SHAPE_TOL) -> bool:
        """Exact algebraic test: real entries (half-plane) or SU(1,1) shape (disc)."""
        a, b, c, d = self.entries
        scale = max(1.0, abs(a), abs(b), abs(c), abs(d))
        if self.model == HALFPLANE:
            return all(abs(x.imag) <= tol * scale for x in self.entries)
        for sign in (1, -1):
            if (abs(sign * a - d.conjugate()) <= tol * scale
                    and abs(sign * b - c.conjugate()) <= tol * scale):
                return True
        return False

    def preserves_model(self, tol: float = EQ_TOL) -> bool:
        if self.has_model_shape():
            return True
        for p in _PROBES[self.model]:
            den = self.c * p + self.d
            if den == 0:
                return False
            q = (self.a * p + self.b) / den
            if self.model == DISC and not abs(q) < 1.0 + tol:
                return False
            if self.model == HALFPLANE and not q.imag > -tol * max(1.0, abs(q)):
                return False
        return True

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(self.d, -self.b, -self.c, self.a, self.model)

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return compose(self, other)

    def __call__(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def isclose(self, other: "MoebiusMap", tol: float = EQ_TOL) -> bool:
        if self.model != other.model:
            return False
        diffs = []
        for sign in (1, -1):
            diffs.append(max(abs(x - sign * y) for x, y in zip(self.entries, other.entries)))
        return min(diffs) <= tol

    def __eq__(self, other):
        if not isinstance(other, MoebiusMap):
            return NotImplemented
        return self.isclose(other)

    __hash__ = None


def _same_model(*objs) -> str:
    models = {o.model for o in objs}
    if len(models) != 1:
        raise ModelMismatchError(f"mixed models: {sorted(models)}")
    return models.pop()


def compose(m1: MoebiusMap, m2: MoebiusMap) -> MoebiusMap:
    """The map z -> m1(m2(z))."""
    model = _same_model(m1, m2)
    return MoebiusMap(
        m1.a * m2.a + m1.b * m2.c,
        m1.a * m2.b + m1.b * m2.d,
        m1.c * m2.a + m1.d * m2.c,
        m1.c * m2.b + m1.d * m2.d,
        model,
    )


def inverse(m: MoebiusMap) -> MoebiusMap:
    return m.inverse()


def apply(m: MoebiusMap, p: ModelPoint) -> ModelPoint:
    p = as_point(p, m.model)
    _same_model(m, p)
    z = p.coordinate
    den = m.c * z + m.d
    if den == 0:
        raise ValueError("point is sent to infinity; the map does not preserve its model")
    return ModelPoint((m.a * z + m.b) / den, m.model)


def derivative(m: MoebiusMap, p: ModelPoint) -> complex:
    p = as_point(p, m.model)
    _same_model(m, p)
    den = m.c * p.coordinate + m.d
    if den == 0:
        raise ValueError("point is sent to infinity; the map does not preserve its model")
    return 1.0 / den**2


def hyp_distance(p: ModelPoint, q: ModelPoint) -> float:
    """Hyperbolic distance for the curvature -1 metric of either model.

    Uses d = 2 asinh(|p - q| / sqrt((1-|p|^2)(1-|q|^2))) in the disc and
    d = 2 asinh(|p - q| / (2 sqrt(Im p Im q))) in the half-plane; both agree
    with log((1+delta)/(1-delta)) for the pseudo-distance delta but do not
    lose digits when delta is close to 1.
    """
    model = _same_model(p, q)
    z, w = p.coordinate, q.coordinate
    if model == DISC:
        s = abs(z - w) / math.sqrt(one_minus_abs2(z) * one_minus_abs2(w))
    else:
        s = abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag))
    return 2.0 * math.asinh(s)


# Cayley transform z -> (z - i)/(z + i), half-plane to disc.
_CAYLEY = (1.0 + 0j, -1j, 1.0 + 0j, 1j)
_CAYLEY_INV = (1j, 1j, -1.0 + 0j, 1.0 + 0j)  # z -> i(1 + z)/(1 - z)


def cayley_coordinate(z, to_model: str):
    """Vectorisable coordinate change; ``to_model`` is the target model."""
    if to_model == DISC:
        return (z - 1j) / (z + 1j)
    return 1j * (1.0 + z) / (1.0 - z)


def cayley_derivative(z, to_model: str):
    """Derivative of the coordinate change evaluated at a source-model point."""
    if to_model == DISC:
        return 2j / (z + 1j) ** 2
    return 2j / (1.0 - z) ** 2


def _conjugate_entries(m: MoebiusMap, to_model: str) -> tuple:
    # target = C m C^{-1}, with C the coordinate change towards to_model
    c_fwd, c_bwd = (_CAYLEY, _CAYLEY_INV) if to_model == DISC else (_CAYLEY_INV, _CAYLEY)

    def mul(x, y):
        return (x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3],
                x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3])

    return mul(mul(c_fwd, m.entries), c_bwd)


def cayley(obj):
    """Move a ModelPoint or MoebiusMap to the other model."""
    target = HALFPLANE if obj.model == DISC else DISC
    if isinstance(obj, ModelPoint):
        return ModelPoint(cayley_coordinate(obj.coordinate, target), target)
    if isinstance(obj, MoebiusMap):
        entries = _conjugate_entries(obj, target)
        if target == HALFPLANE:
            entries = tuple(complex(x.real, 0.0) if abs(x.imag) <= 1e-13 * max(1.0, abs(x)) else x
                            for x in _normalized(entries))
        return MoebiusMap(*entries, target)
    raise TypeError(f"cannot apply the Cayley transform to {type(obj).__name__}")


def _normalized(entries):
    a, b, c, d = entries
    s = cmath.sqrt(a * d - b * c)
    return (a / s, b / s, c / s, d / s)


def to_model(obj, model: str):
    """Return ``obj`` expressed in ``model`` (no-op when already there)."""
    _check_model(model)
    return obj if obj.model == model else cayley(obj)


def radius_from_tau(tau: float) -> float:
    """Euclidean radius of the disc centred at 0 with hyperbolic radius ``tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return math.tanh(0.5 * tau)


def tau_from_radius(r: float) -> float:
    if not 0.0 <= r < 1.0:
        raise ValueError("radius must lie in [0, 1)")
    return math.log1p(r) - math.log1p(-r)


def ball_kernel_center(tau: float) -> float:
    """Bergman kernel function of B_hyp(0, tau) at its centre, (1/pi)((e^t+1)/(e^t-1))^2."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if math.isinf(tau):
        return 1.0 / math.pi
    em1 = math.expm1(tau)
    return ((em1 + 2.0) / em1) ** 2 / math.pi if tau < 700 else 1.0 / math.pi


def centering_map(z: ModelPoint) -> MoebiusMap:
    """Automorphism sending ``z`` to the model's centre (0 in the disc, i in the half-plane)."""
    z = as_point(z)
    p = z.coordinate
    if z.model == DISC:
        s = math.sqrt(one_minus_abs2(p))
        return MoebiusMap(1 / s, -p / s, -p.conjugate() / s, 1 / s, DISC)
    s = math.sqrt(p.imag)
    return MoebiusMap(1 / s, -p.real / s, 0.0, s, HALFPLANE)


def hyp_ball_euclidean(center: ModelPoint, radius_hyp: float) -> tuple[complex, float]:
    """Euclidean centre and radius of a disc-model hyperbolic ball."""
    if center.model != DISC:
        raise ModelMismatchError("expected a disc-model centre")
    r = radius_from_tau(radius_hyp)
    z = center.coordinate
    s = abs(z) ** 2
    den = 1.0 - s * r * r
    return z * (1.0 - r * r) / den, r * one_minus_abs2(z) / den


@dataclass(frozen=True)
class HypBall:
    center: ModelPoint
    radius_hyp: float

    def __post_init__(self):
        if not self.radius_hyp >= 0:
            raise ValueError("radius_hyp must be nonnegative")

    def contains(self, p: ModelPoint) -> bool:
        return hyp_distance(self.center, p) < self.radius_hyp

    def kernel_at_center(self) -> float:
        """Bergman kernel function of the ball at its centre, in the centre's coordinates."""
        k = ball_kernel_center(self.radius_hyp)
        k *= abs(derivative(centering_map(self.center), self.center)) ** 2
        if self.center.model == HALFPLANE:
            # centering lands on i; one more Cayley step to reach 0 in the disc
            k *= abs(cayley_derivative(1j, DISC)) ** 2
        return k
