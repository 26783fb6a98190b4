"""Bergman-stability experiments on towers of coverings.

For a tower Gamma_j with top subgroup T, the difference between the level-j
kernel and the top kernel, in disc coordinates, is the sum over
Gamma_j \\ T of the kernel terms.  It is computed directly from that index set
(never by subtracting two nearly equal series) together with the bound

    |E_j(z, w)| <= sum (1 - |gamma(0)|^2) / (pi (1-|z|)^2 (1-|w|)^2).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .groups import (
    EnumerationBall,
    GroupSpec,
    TowerSpec,
    enumerate_ball,
    injectivity_radius,
    level_predicate,
    top_predicate,
    tower_index,
)
from .hyperbolic import (
    DISC,
    ModelPoint,
    MoebiusMap,
    as_point,
    ball_kernel_center,
    centering_map,
    derivative,
    one_minus_abs2,
    radius_from_tau,
    to_model,
)
from .kernels import (
    PolarGrid,
    SeriesOptions,
    disc_kernel,
    frontier_tail,
    kahan_member_sum,
    kernel_sums,
    kernel_term_bounds,
)
from .summation import det_fsum

EFFECTIVE_CONSTANT = 12 * 3 ** (2 / 3)
LOG3 = math.log(3.0)


class TermwiseBoundError(AssertionError):
    """A single series term exceeded its displacement bound."""


def _disc_coord(p, model) -> complex:
    return to_model(as_point(p, model), DISC).coordinate


@dataclass
class StabilityResult:
    value: complex
    bound: float
    tail: float
    terms_used: int

    def __iter__(self):
        yield self.value
        yield self.bound


def _level_masks(ball: EnumerationBall, t: TowerSpec, j: int, top=None):
    level = level_predicate(t, j).mask(ball)
    if top is None:
        top_mask = top_predicate(t).mask(ball)
    else:
        top_mask = level_predicate(t, top).mask(ball)
    return level, level & ~top_mask, top_mask


def stability_error(g: GroupSpec, t: TowerSpec, j: int, z, w,
                    opts: SeriesOptions | None = None, top=None) -> StabilityResult:
    """E_j(z, w) in disc coordinates and its displacement bound.

    ``top`` overrides the tower's top subgroup with level ``top`` of the same
    tower.  The termwise inequality is asserted for every summed element.
    """
    opts = opts or SeriesOptions()
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    zd, wd = _disc_coord(z, g.model), _disc_coord(w, g.model)
    _, diff, _ = _level_masks(ball, t, j, top)
    a, b, c, d = ball.a[diff], ball.b[diff], ball.c[diff], ball.d[diff]
    value = complex(kernel_sums(a, b, c, d, [zd], [wd])[0])
    mag, bnd = kernel_term_bounds(a, b, c, d, [zd], [wd])
    if np.any(mag > bnd * (1 + 1e-12)):
        raise TermwiseBoundError("a kernel term exceeds its displacement bound")
    scale = 1.0 / (math.pi * (1 - abs(zd)) ** 2 * (1 - abs(wd)) ** 2)
    truncated = det_fsum(1.0 / np.abs(d) ** 2) * scale
    tail = 0.0
    if top is None or diff.any():
        # 1 - |gamma 0|^2 <= 2 (1 - |gamma 0|)
        tail = 2.0 * frontier_tail(ball)[0] * scale
    return StabilityResult(value, truncated + tail, tail, int(diff.sum()))


def termwise_ej_inequality(gamma: MoebiusMap, z, w) -> bool:
    """|K_D(z, gamma w) gamma'(w)| <= (1 - |gamma(0)|^2)/(pi (1-|z|)^2 (1-|w|)^2).

    Follows from |1 - z conj(gamma w)| >= 1 - |z| and |c w + d| >= |d|(1 - |w|),
    the latter because |c| < |d| for a disc automorphism.
    """
    if gamma.model != DISC:
        raise ValueError("termwise_ej_inequality expects a disc-model map")
    zd, wd = _disc_coord(z, DISC), _disc_coord(w, DISC)
    arr = lambda x: np.array([x])  # noqa: E731
    mag, bnd = kernel_term_bounds(arr(gamma.a), arr(gamma.b), arr(gamma.c), arr(gamma.d), [zd], [wd])
    return bool(mag[0, 0] <= bnd[0, 0] * (1 + 1e-12))


@dataclass(frozen=True)
class EffectiveInputs:
    genus: int
    tau: float
    index: int = 1

    def __post_init__(self):
        if self.genus < 2:
            raise ValueError("genus must be at least 2")
        if not self.tau > 0:
            raise ValueError("injectivity radius must be positive")


def effective_constant() -> float:
    """18 * 4 * (6*4)^(-1/3), checked against its closed form 12 * 3^(2/3)."""
    c = 18 * 4 * (6 * 4) ** (-1 / 3)
    if abs(c - EFFECTIVE_CONSTANT) > 1e-14:
        raise ArithmeticError("effective constant identity failed")
    return c


def effective_bound_rhs(inputs: EffectiveInputs) -> float:
    """(12 * 3^(2/3)/pi) (g-1)^(1/3) exp(-tau/3); stated only for tau >= log 3."""
    if inputs.tau < LOG3 - 1e-15:
        raise ValueError("the effective bound is only stated for tau >= log 3")
    effective_constant()
    return EFFECTIVE_CONSTANT / math.pi * (inputs.genus - 1) ** (1 / 3) * math.exp(-inputs.tau / 3)


def upper_bound_31(tau: float) -> float:
    """(1/pi) e^tau/(e^tau - 1)^2, the excess of the hyperbolic kernel norm over 1/(4 pi)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if math.isinf(tau):
        return 0.0
    e = math.exp(-tau)
    return e / (math.pi * math.expm1(-tau) ** 2)


@dataclass(frozen=True)
class GenusBookkeeping:
    g_j: int
    ratio: Fraction


def genus_bookkeeping(g: int, index: int) -> GenusBookkeeping:
    """Genus of an index-``index`` cover of a genus-``g`` surface, via Gauss-Bonnet."""
    if not (isinstance(g, int) and isinstance(index, int)) or g < 2 or index < 1:
        raise ValueError("need integer genus >= 2 and index >= 1")
    g_j = index * (g - 1) + 1
    ratio = Fraction(g_j, index)
    # hyperbolic area scales with the index: 4 pi (g_j - 1) = index * 4 pi (g - 1)
    assert g_j - 1 == index * (g - 1)
    assert ratio == (g - 1) + Fraction(1, index)
    return GenusBookkeeping(g_j, ratio)


def ball_kernel_at(z: ModelPoint, tau: float) -> float:
    """Kernel function of B_hyp(z, tau) at its centre, disc coordinates."""
    if math.isinf(tau):
        return float(disc_kernel(z.coordinate, z.coordinate).real)
    return ball_kernel_center(tau) * abs(derivative(centering_map(z), z)) ** 2


def ball_kernel_excess(z: ModelPoint, tau: float) -> float:
    """K_B(z, z) - K_D(z, z) for B = B_hyp(z, tau), without cancellation.

    At the centre of the disc the gap is 4 e^tau/(pi (e^tau - 1)^2) =
    4 upper_bound_31(tau); the centering map carries it to z.
    """
    if math.isinf(tau):
        return 0.0
    return 4.0 * upper_bound_31(tau) / one_minus_abs2(z.coordinate) ** 2


@dataclass
class SemicontinuityResult:
    margin: float
    tail: float
    tau: float
    certified: bool

    @property
    def holds(self) -> bool:
        return self.margin >= -2.0 * self.tail


def _level_q_diag(g, t, j, zd, opts, ball):
    level = level_predicate(t, j).mask(ball)
    nonid = level & (ball.lengths > 0)
    a, b, c, d = ball.a[nonid], ball.b[nonid], ball.c[nonid], ball.d[nonid]
    rest = complex(kernel_sums(a, b, c, d, [zd], [zd])[0]).real
    tail = frontier_tail(ball)[0] * 4.0 / (math.pi * (1 - abs(zd)) ** 4)
    return float(disc_kernel(zd, zd).real), rest, tail


def semicontinuity_check(g: GroupSpec, t: TowerSpec, j: int, z,
                         opts: SeriesOptions | None = None) -> SemicontinuityResult:
    """Ball-kernel value at z for radius tau_j(z) minus Q_j(z, z), disc coordinates."""
    opts = opts or SeriesOptions()
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    zp = to_model(as_point(z, g.model), DISC)
    tau, certified = injectivity_radius(g, level_predicate(t, j), zp, opts.max_len, ball)
    _, rest, tail = _level_q_diag(g, t, j, zp.coordinate, opts, ball)
    margin = ball_kernel_excess(zp, tau) - rest
    return SemicontinuityResult(margin, tail, tau, certified)


def trivial_semicontinuity(z) -> SemicontinuityResult:
    """Trivial group: tau is infinite and the margin is exactly zero."""
    zp = to_model(as_point(z), DISC)
    return SemicontinuityResult(ball_kernel_excess(zp, math.inf), 0.0, math.inf, True)


def upper_bound_31_check(g: GroupSpec, t: TowerSpec, j: int, z,
                         opts: SeriesOptions | None = None) -> tuple[float, float, float]:
    """(hyperbolic norm excess over 1/(4 pi), upper_bound_31(tau_j(z)), tail)."""
    opts = opts or SeriesOptions()
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    zp = to_model(as_point(z, g.model), DISC)
    tau, _ = injectivity_radius(g, level_predicate(t, j), zp, opts.max_len, ball)
    _, rest, tail = _level_q_diag(g, t, j, zp.coordinate, opts, ball)
    w2 = one_minus_abs2(zp.coordinate) ** 2 / 4.0
    # |Q|_hyp - 1/(4 pi) = (1-|z|^2)^2/4 * (Q - K_D)
    return rest * w2, upper_bound_31(tau), tail * w2


@dataclass
class L2Check:
    lhs: float
    rhs: float
    slack: float
    tau: float
    insufficient_resolution: bool

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + self.slack


def l2_difference_check(g: GroupSpec, t: TowerSpec, j: int, w, quadrature: tuple[int, int] = (400, 400),
                        opts: SeriesOptions | None = None) -> L2Check:
    """L2 distance of level-j and top kernels over B_j = B_hyp(w, tau_j(w)).

    lhs integrates |E_j(., w)|^2 over B_j (pulled back to a centred disc by the
    centering map); rhs = 2(K_B - K_top)(w, w) + 2(K_B - Q_j)(w, w), the sum of
    the two reproducing-kernel inequalities for the ball.  The slack is the
    change between the full and half-resolution quadrature plus series tails.
    """
    opts = opts or SeriesOptions()
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    wp = to_model(as_point(w, g.model), DISC)
    wd = wp.coordinate
    tau, _ = injectivity_radius(g, level_predicate(t, j), wp, opts.max_len, ball)
    level, diff, top_mask = _level_masks(ball, t, j)
    a, b, c, d = ball.a[diff], ball.b[diff], ball.c[diff], ball.d[diff]
    if math.isinf(tau):
        raise ValueError("no nonidentity level member in the ball; B_j is the whole disc")
    r = radius_from_tau(tau)
    phi_inv = centering_map(wp).inverse()

    def lhs_at(n_r, n_t):
        pts, wts = PolarGrid(0.0, r, n_r, n_t).nodes()
        den = phi_inv.c * pts + phi_inv.d
        zeta = (phi_inv.a * pts + phi_inv.b) / den
        jac = 1.0 / np.abs(den) ** 4
        e = kahan_member_sum(a, b, c, d, zeta, wd)
        vals = np.abs(e) ** 2 * jac * wts
        return math.fsum(vals)

    lhs = lhs_at(*quadrature)
    coarse = lhs_at(max(1, quadrature[0] // 2), max(1, quadrature[1] // 2))
    # gaps measured from K_D so that no O(1) values are subtracted
    excess = ball_kernel_excess(wp, tau)
    top_rest = top_mask & (ball.lengths > 0)
    top_vals = kernel_sums(ball.a[top_rest], ball.b[top_rest], ball.c[top_rest],
                           ball.d[top_rest], [wd], [wd])
    top_gap = complex(top_vals[0]).real
    j_gap = top_gap + complex(kernel_sums(a, b, c, d, [wd], [wd])[0]).real
    rhs = 2.0 * (excess - top_gap) + 2.0 * (excess - j_gap)
    tail = frontier_tail(ball)[0] * 4.0 / (math.pi * (1 - abs(wd)) ** 4)
    slack = abs(lhs - coarse) + 4.0 * tail
    return L2Check(lhs, rhs, slack, tau, bool(slack > 0.1 * abs(rhs)))


# ------------------------------------------------------------------ reports

@dataclass
class TowerRow:
    j: int
    index: float
    tau_j_at_basepoint: float
    tau_certified: bool
    sup_grid_error: float
    ej_bound: float
    hyp_norm_deviation: float
    terms_used: int
    tail: float
    additivity_residual: float


@dataclass
class TowerReport:
    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def as_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def default_grid(n: int = 5, radius: float = 0.7) -> np.ndarray:
    """n x n axis-aligned Cartesian grid inside |z| <= radius (disc coordinates)."""
    a = radius / math.sqrt(2.0)
    xs = np.linspace(-a, a, n)
    return np.array([complex(x, y) for x in xs for y in xs])


def level_row(g: GroupSpec, t: TowerSpec, j: int, grid, basepoint: ModelPoint,
              opts: SeriesOptions, ball: EnumerationBall) -> TowerRow:
    grid = np.asarray(grid, dtype=complex)
    zs = np.repeat(grid, len(grid))
    ws = np.tile(grid, len(grid))
    level, diff, top_mask = _level_masks(ball, t, j)
    sel = lambda m: (ball.a[m], ball.b[m], ball.c[m], ball.d[m])  # noqa: E731
    e_vals = kernel_sums(*sel(diff), zs, ws)
    q_j = kernel_sums(*sel(level), zs, ws)
    q_top = kernel_sums(*sel(top_mask), zs, ws)
    additivity = float(np.max(np.abs((q_j - q_top) - e_vals))) if len(zs) else 0.0

    gap_sum = det_fsum(ball.gap[diff])
    tail_disp, _ = frontier_tail(ball)
    scale = 1.0 / (np.pi * (1 - np.abs(zs)) ** 2 * (1 - np.abs(ws)) ** 2)
    tail = 2.0 * tail_disp * scale
    bound = gap_sum * scale + tail
    err = np.abs(e_vals)
    if np.any(err > bound * (1 + 1e-6) + tail):
        raise TermwiseBoundError("grid error exceeds the E_j bound")

    diag = zs == ws
    hyp_dev = np.pi * one_minus_abs2(zs[diag]) ** 2 * np.abs(e_vals[diag])
    tau, certified = injectivity_radius(g, level_predicate(t, j), basepoint, opts.max_len, ball)
    return TowerRow(
        j=j,
        index=tower_index(t, j),
        tau_j_at_basepoint=tau,
        tau_certified=certified,
        sup_grid_error=float(err.max()),
        ej_bound=float(bound.max()),
        hyp_norm_deviation=float(hyp_dev.max()),
        terms_used=int(level.sum()),
        tail=float(tail.max()),
        additivity_residual=additivity,
    )


def run_tower_report(g: GroupSpec, t: TowerSpec, opts: SeriesOptions, grid=None,
                     basepoint=None, metadata: dict | None = None) -> TowerReport:
    """One row per tower level: index, tau_j, sup grid error, E_j bound, norm deviation."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=complex)
    basepoint = to_model(as_point(0j if basepoint is None else basepoint, DISC), DISC)
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    rows = [level_row(g, t, j, grid, basepoint, opts, ball) for j in range(1, t.levels + 1)]
    meta = dict(metadata or {})
    meta.update({"max_len": opts.max_len, "policy": opts.closure_policy,
                 "elements": len(ball), "grid_points": int(len(grid)),
                 "top": t.top, "kind": t.kind, "schedule": list(t.schedule)})
    return TowerReport(rows, meta)


