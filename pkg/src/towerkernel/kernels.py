"""Bergman kernels, the quotient-kernel series and the Green series on D/Gamma.

Kernel *functions* are used throughout: the inner product of holomorphic
1-forms f dz is the Euclidean L2 product of their coefficients, so the unit
disc has K(z, w) = 1/(pi (1 - z conj(w))^2) and its hyperbolic norm is
1/(4 pi) everywhere.

Series over a group are summed in the disc.  For a det-normalised matrix
(a, b; c, d) one term of the pulled-back kernel is

    K_D(z, gamma w) conj(gamma'(w)) = 1 / (pi (conj(c w + d) - z conj(a w + b))^2),

which needs no subtraction close to the boundary circle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .groups import (
    EnumerationBall,
    GroupSpec,
    MembershipPredicate,
    Word,
    enumerate_ball,
    fit_decay_ratio,
    word_to_matrix,
)
from .hyperbolic import (
    DISC,
    HALFPLANE,
    ModelPoint,
    as_point,
    cayley_coordinate,
    cayley_derivative,
    one_minus_abs2,
    to_model,
)
from .summation import KahanAccumulator, chunked_sum

RAW_BALL = "raw_ball"
INVERSION_CLOSED = "inversion_closed"
RIGHT_COSET_CLOSED = "right_coset_closed"
POLICIES = (RAW_BALL, INVERSION_CLOSED, RIGHT_COSET_CLOSED)

SINGULAR_TOL = 1e-8


class SingularityError(ArithmeticError):
    """Evaluation point lies (numerically) on the orbit of the pole."""


class DivergenceWarning(RuntimeWarning):
    pass


@dataclass
class SeriesOptions:
    max_len: int = 8
    tol: float = 1e-10
    closure_policy: str = RAW_BALL
    coset: Word | None = None  # gamma_0 for right_coset_closed
    element_cap: int = 10**7
    prune_below: float | None = None

    def __post_init__(self):
        if self.max_len < 0:
            raise ValueError("max_len must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.closure_policy not in POLICIES:
            raise ValueError(f"unknown closure policy {self.closure_policy!r}")
        if self.closure_policy == RIGHT_COSET_CLOSED and self.coset is None:
            raise ValueError("right_coset_closed needs a coset representative")


@dataclass
class KernelValue:
    value: complex
    tail_estimate: float
    truncation: dict
    warnings: list = field(default_factory=list)


@dataclass
class GreenValue:
    value: float
    tail_estimate: float
    terms_used: int
    tail_certified: bool = True


# ---------------------------------------------------------------- closed forms

def _coord(p, model=DISC):
    return as_point(p, model).coordinate if isinstance(p, ModelPoint) else p


def disc_kernel(z, w):
    """1/(pi (1 - z conj(w))^2); accepts ModelPoints, numbers or arrays."""
    z, w = _coord(z), _coord(w)
    return 1.0 / (np.pi * (1.0 - z * np.conj(w)) ** 2)


def halfplane_kernel(z, w):
    """-1/(pi (z - conj(w))^2), the half-plane kernel function."""
    z, w = _coord(z, HALFPLANE), _coord(w, HALFPLANE)
    return -1.0 / (np.pi * (z - np.conj(w)) ** 2)


def radius_disc_kernel(r: float):
    """Kernel function of the disc |z| < r."""
    r2 = r * r

    def kernel(z, w):
        return r2 / (np.pi * (r2 - z * np.conj(w)) ** 2)

    kernel.domain = ("disc", 0.0, r)
    return kernel


def hyp_norm_diag(k_diag, z) -> float:
    """Hyperbolic pointwise norm of a diagonal kernel value K*(z, z)."""
    z = as_point(z)
    k = complex(k_diag)
    if abs(k.imag) > 1e-9 * max(1.0, abs(k.real)):
        raise ValueError("diagonal kernel value is not real")
    if k.real < 0:
        raise ValueError("negative diagonal kernel value (series truncation failure?)")
    if z.model == DISC:
        return k.real * one_minus_abs2(z.coordinate) ** 2 / 4.0
    return k.real * z.coordinate.imag ** 2


# ------------------------------------------------------------- series support

def _to_disc(p, model):
    """Disc coordinate of p plus the coordinate-change derivative at p."""
    pt = as_point(p, model)
    if pt.model == DISC:
        return pt.coordinate, 1.0 + 0j, DISC
    return cayley_coordinate(pt.coordinate, DISC), cayley_derivative(pt.coordinate, DISC), HALFPLANE


def summation_set(g: GroupSpec, pred: MembershipPredicate, opts: SeriesOptions,
                  ball: EnumerationBall | None = None, mask=None):
    """Disc matrices (a, b, c, d) of the members summed under ``opts``."""
    ball = ball or enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    if mask is None:
        mask = pred.mask(ball)
    if opts.closure_policy == INVERSION_CLOSED and ball.pruned:
        present = {ball.codes[i] for i in np.flatnonzero(mask)}
        inv = [tuple(k ^ 1 for k in reversed(ball.codes[i])) in present for i in range(len(ball))]
        mask = mask & np.array(inv)
    a, b, c, d = ball.a[mask], ball.b[mask], ball.c[mask], ball.d[mask]
    if opts.closure_policy == RIGHT_COSET_CLOSED:
        g0 = to_model(word_to_matrix(g, opts.coset), DISC)
        a, b, c, d = (a * g0.a + b * g0.c, a * g0.b + b * g0.d,
                      c * g0.a + d * g0.c, c * g0.b + d * g0.d)
    return a, b, c, d


def kernel_sums(a, b, c, d, zs, ws, workers=None) -> np.ndarray:
    """Compensated sums over members of the kernel terms at each (z_k, w_k) pair."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    ws = np.atleast_1d(np.asarray(ws, dtype=complex))

    def block(s, e):
        cw = np.conj(c[s:e, None] * ws[None, :] + d[s:e, None])
        aw = np.conj(a[s:e, None] * ws[None, :] + b[s:e, None])
        return 1.0 / (np.pi * (cw - zs[None, :] * aw) ** 2)

    return chunked_sum(block, len(a), len(zs), workers)


def kernel_term_bounds(a, b, c, d, zs, ws) -> tuple[np.ndarray, np.ndarray]:
    """(|term|, (1-|gamma 0|^2)/(pi (1-|z|)^2 (1-|w|)^2)) for every member and pair."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    ws = np.atleast_1d(np.asarray(ws, dtype=complex))
    cw = np.conj(c[:, None] * ws[None, :] + d[:, None])
    aw = np.conj(a[:, None] * ws[None, :] + b[:, None])
    mag = 1.0 / (np.pi * np.abs(cw - zs[None, :] * aw) ** 2)
    gap = 1.0 / np.abs(d) ** 2
    scale = 1.0 / (np.pi * (1.0 - np.abs(zs)) ** 2 * (1.0 - np.abs(ws)) ** 2)
    return mag, gap[:, None] * scale[None, :]


def frontier_tail(ball: EnumerationBall) -> tuple[float, list]:
    """Geometric extrapolation of sum (1 - |gamma(0)|) beyond the ball, inflated 2x.

    The full group's shells are used; every subgroup sum is dominated by them.
    """
    notes = []
    if ball.rank == 0 or ball.max_len == 0:
        return (0.0 if ball.rank == 0 else math.inf), notes
    inc = ball.shell_sums(ball.lengths > 0)
    last = inc[-1]
    if ball.max_len >= 3 and not (inc[-3] > inc[-2] > inc[-1]) and last > 0:
        notes.append("increments fail to decay across the last 3 shells")
    if last == 0.0:
        return 0.0, notes
    q = fit_decay_ratio(inc)
    if math.isnan(q) or q >= 1.0:
        notes.append("fitted decay ratio >= 1; tail not controlled")
        return math.inf, notes
    return 2.0 * last * q / (1.0 - q), notes


def _warn(notes):
    for n in notes:
        warnings.warn(n, DivergenceWarning, stacklevel=3)


def term_constant(zd, wd) -> float:
    """C(z, w) = 4/(pi (1-|z|)^2 (1-|w|)^2), bounding a term by C (1 - |gamma(0)|)."""
    return 4.0 / (math.pi * (1.0 - abs(zd)) ** 2 * (1.0 - abs(wd)) ** 2)


# ------------------------------------------------------------------ the series

def quotient_kernel_series(g: GroupSpec, pred: MembershipPredicate, z, w,
                           opts: SeriesOptions | None = None) -> KernelValue:
    """Pulled-back quotient kernel Q(z, w) = sum over members of K_D(z, gw) conj(g'(w)).

    The value is returned in the coordinates of the input points (disc or
    half-plane); bare numbers are read in the group's model.
    """
    opts = opts or SeriesOptions()
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    zd, jz, model = _to_disc(z, g.model)
    wd, jw, _ = _to_disc(w, model)
    a, b, c, d = summation_set(g, pred, opts, ball)
    value = complex(kernel_sums(a, b, c, d, [zd], [wd])[0])
    if pred.identity_only:
        tail, notes = 0.0, []
    else:
        tail, notes = frontier_tail(ball)
        tail *= term_constant(zd, wd)
        _warn(notes)
    factor = jz * np.conj(jw)
    return KernelValue(
        value=complex(value * factor),
        tail_estimate=float(tail * abs(factor)),
        truncation={"max_len": opts.max_len, "policy": opts.closure_policy,
                    "terms_used": int(len(a)), "model": model},
        warnings=notes,
    )


def quotient_kernel_batch(g: GroupSpec, pred: MembershipPredicate, zs, ws,
                          opts: SeriesOptions | None = None, mask=None):
    """Vectorised Q over disc-coordinate pairs; returns (values, tails, terms_used)."""
    opts = opts or SeriesOptions()
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    a, b, c, d = summation_set(g, pred, opts, ball, mask)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    ws = np.atleast_1d(np.asarray(ws, dtype=complex))
    values = kernel_sums(a, b, c, d, zs, ws)
    tail = 0.0 if pred.identity_only else frontier_tail(ball)[0]
    consts = 4.0 / (np.pi * (1 - np.abs(zs)) ** 2 * (1 - np.abs(ws)) ** 2)
    return values, tail * consts, len(a)


def _green_parts(a, b, c, d, zd, wd):
    cw = c * wd + d
    aw = a * wd + b
    num = np.abs(zd * cw - aw)
    den = np.abs(np.conj(cw) - zd * np.conj(aw))
    # s = 1 - |pseudo-distance|^2 computed without cancellation
    s = one_minus_abs2(zd) * one_minus_abs2(wd) / den**2
    return num / den, s


def green_series(g: GroupSpec, pred: MembershipPredicate, z, w,
                 opts: SeriesOptions | None = None) -> GreenValue:
    """Green function of D/Gamma (Myrberg series) at the projections of z and w.

    Each term is -log of a Moebius pseudo-distance, evaluated as
    -log1p(-s)/2 with s = 1 - |.|^2 formed multiplicatively.  The tail uses
    term <= 2 (1+|z|)/(1-|z|) (1 - |gamma w|), valid once 1 - |gamma w| is below
    (1-|z|)/(4(1+|z|)); ``tail_certified`` records whether the frontier met it.
    """
    opts = opts or SeriesOptions()
    ball = enumerate_ball(g, opts.max_len, opts.element_cap, opts.prune_below)
    zd, _, model = _to_disc(z, g.model)
    wd, _, _ = _to_disc(w, model)
    a, b, c, d = summation_set(g, pred, opts, ball)
    pseudo, s = _green_parts(a, b, c, d, zd, wd)
    if np.any(pseudo < SINGULAR_TOL):
        raise SingularityError("z lies on the orbit of w within the enumerated ball")
    terms = -0.5 * np.log1p(-np.minimum(s, 1.0))
    value = math.fsum(terms)
    tail, certified = 0.0, True
    if not pred.identity_only:
        tail_disp, notes = frontier_tail(ball)
        _warn(notes)
        rz = abs(zd)
        # 1 - |gamma w| <= 4 (1 - |gamma 0|)/(1 - |w|^2)
        tail = 2.0 * (1 + rz) / (1 - rz) * 4.0 * tail_disp / one_minus_abs2(wd)
        front = ball.lengths == ball.max_len
        if front.any():
            worst = 4.0 * ball.displacement[front].max() / one_minus_abs2(wd)
            certified = bool(worst <= (1 - rz) / (4 * (1 + rz)))
    return GreenValue(value=value, tail_estimate=float(tail), terms_used=int(len(a)),
                      tail_certified=certified)


def green_batch(g: GroupSpec, pred: MembershipPredicate, zs, ws,
                opts: SeriesOptions | None = None) -> np.ndarray:
    """Green series at many disc-coordinate pairs, same truncation set for all."""
    opts = opts or SeriesOptions()
    a, b, c, d = summation_set(g, pred, opts)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    ws = np.atleast_1d(np.asarray(ws, dtype=complex))

    def block(s0, e0):
        pseudo, s = _green_parts(a[s0:e0, None], b[s0:e0, None], c[s0:e0, None],
                                 d[s0:e0, None], zs[None, :], ws[None, :])
        if np.any(pseudo < SINGULAR_TOL):
            raise SingularityError("stencil point lies on the orbit of w")
        return -0.5 * np.log1p(-np.minimum(s, 1.0)) + 0j

    return chunked_sum(block, len(a), len(zs)).real


# --------------------------------------------------------------- annulus oracle

def annulus_kernel_oracle(rho: float, z, w, N: int = 60):
    """Bergman kernel of {rho < |zeta| < 1} from the orthonormal monomial basis.

    Sum over n = -N..N of z^n conj(w)^n / ||zeta^n||^2 with
    ||zeta^n||^2 = pi (1 - rho^(2n+2))/(n+1) and 2 pi log(1/rho) at n = -1.
    Negative powers are rewritten in terms of rho^2/(z conj(w)) to stay finite.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if N < 1:
        raise ValueError("N must be at least 1")
    z = np.asarray(_coord(z), dtype=complex)
    w = np.asarray(_coord(w), dtype=complex)
    for p in (z, w):
        ap = np.abs(p)
        if np.any(ap <= rho) or np.any(ap >= 1.0):
            raise ValueError("point outside the annulus")
    v = z * np.conj(w)
    rho2 = rho * rho
    n = np.arange(0, N + 1)
    shape = np.broadcast(z, w).shape
    vv = v.reshape(-1, 1)
    pos = (n + 1) * vv ** n / (np.pi * -np.expm1((2 * n + 2) * math.log(rho)))
    total = pos.sum(axis=1)
    total = total + 1.0 / (vv[:, 0] * 2.0 * np.pi * math.log(1.0 / rho))
    k = np.arange(2, N + 1)
    if k.size:
        u = rho2 / vv
        neg = (k - 1) * u ** k / (np.pi * rho2 * -np.expm1((2 * k - 2) * math.log(rho)))
        total = total + neg.sum(axis=1)
    out = total.reshape(shape)
    return complex(out) if out.ndim == 0 else out


def annulus_modulus(lam: float) -> float:
    """Inner radius of the annulus H/<w -> lam w>: exp(-2 pi^2 / log lam)."""
    if not lam > 1.0:
        raise ValueError("lambda must exceed 1")
    return math.exp(-2.0 * math.pi**2 / math.log(lam))


def annulus_covering(lam: float, zeta):
    """Covering map H -> annulus, exp(2 pi i log(zeta)/log lam), and its derivative."""
    zeta = np.asarray(zeta, dtype=complex)
    k = 2j * np.pi / math.log(lam)
    p = np.exp(k * np.log(zeta))
    return p, p * k / zeta


def annulus_pullback_oracle(lam: float, z, w, N: int = 60):
    """Annulus kernel pulled back to half-plane coordinates by the covering map."""
    if not lam > 1.0:
        raise ValueError("lambda must exceed 1")
    z, w = _coord(z, HALFPLANE), _coord(w, HALFPLANE)
    pz, dz = annulus_covering(lam, z)
    pw, dw = annulus_covering(lam, w)
    k = annulus_kernel_oracle(annulus_modulus(lam), pz, pw, N)
    out = k * dz * np.conj(dw)
    return complex(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------- derivative checks

def _laplacian9(f, x, y, h):
    s = 0.0
    for dx, dy, wgt in ((1, 0, 4), (-1, 0, 4), (0, 1, 4), (0, -1, 4),
                        (1, 1, 1), (1, -1, 1), (-1, 1, 1), (-1, -1, 1)):
        s += wgt * f(x + dx * h, y + dy * h)
    return (s - 20.0 * f(x, y)) / (6.0 * h * h)


def bergman_metric_fd(evaluator, z, h: float = 1e-3, richardson: bool = True) -> float:
    """d^2 log K*(z, z)/dz dzbar by the 3x3 nine-point Laplacian stencil.

    With ``richardson`` the O(h^2) error is removed by combining steps h and h/2.
    """
    z0 = complex(_coord(z))

    def logk(x, y):
        p = complex(x, y)
        k = complex(evaluator(p, p))
        if not k.real > 0:
            raise ValueError("nonpositive kernel value in the stencil")
        return math.log(k.real)

    lap = _laplacian9(logk, z0.real, z0.imag, h)
    if richardson:
        lap_half = _laplacian9(logk, z0.real, z0.imag, h / 2)
        lap = (4.0 * lap_half - lap) / 3.0
    return lap / 4.0


def mixed_wirtinger_fd(fn, z: complex, w: complex, h: float) -> complex:
    """d^2 fn/dz dwbar of a real function of two complex variables, central differences.

    ``fn`` takes arrays of z and w (same length) and returns real values.
    """
    steps = [(sx, sy) for sx in (1, -1) for sy in (1, -1)]
    zs, ws = [], []
    for zdir, wdir in ((1, 1), (1, 1j), (1j, 1), (1j, 1j)):
        for sx, sy in steps:
            zs.append(z + sx * h * zdir)
            ws.append(w + sy * h * wdir)
    vals = np.asarray(fn(np.array(zs), np.array(ws)), dtype=float).reshape(4, 4)
    sign = np.array([1.0, -1.0, -1.0, 1.0])
    g_xu, g_xv, g_yu, g_yv = (vals @ sign) / (4.0 * h * h)
    return 0.25 * complex(g_xu + g_yv, g_xv - g_yu)


def schiffer_check(g: GroupSpec, pred: MembershipPredicate, z, w, h: float = 1e-3,
                   opts: SeriesOptions | None = None) -> float:
    """|Q(z, w) + (2/pi) d^2 g/dz dwbar| with the Green function differenced numerically."""
    opts = opts or SeriesOptions()
    zd, _, model = _to_disc(z, g.model)
    wd, _, _ = _to_disc(w, model)
    if abs(zd - wd) < 10 * h:
        raise SingularityError("z and w too close for the difference stencil")
    q = quotient_kernel_series(g, pred, ModelPoint(zd, DISC), ModelPoint(wd, DISC), opts).value
    mixed = mixed_wirtinger_fd(lambda zs, ws: green_batch(g, pred, zs, ws, opts), zd, wd, h)
    return abs(q - (-2.0 / math.pi) * mixed)


# ---------------------------------------------------------- reproducing check

@dataclass(frozen=True)
class PolarGrid:
    """Tensor quadrature in polar coordinates on {inner < |zeta| < outer}.

    Gauss-Legendre in the radial variable (r, or log r when ``log_radial``,
    the natural choice on an annulus) and the midpoint rule in the angle,
    which is spectrally accurate for periodic integrands.
    """

    inner: float
    outer: float
    n_r: int = 400
    n_theta: int = 400
    log_radial: bool = False

    def nodes(self):
        th = (np.arange(self.n_theta) + 0.5) * (2 * np.pi / self.n_theta)
        dth = 2 * np.pi / self.n_theta
        x, wx = np.polynomial.legendre.leggauss(self.n_r)
        if self.log_radial:
            if self.inner <= 0:
                raise ValueError("log-radial grid needs a positive inner radius")
            lo, hi = math.log(self.inner), math.log(self.outer)
            r = np.exp(lo + (x + 1) * (hi - lo) / 2)
            wr = r * r * wx * (hi - lo) / 2
        else:
            half = (self.outer - self.inner) / 2
            r = self.inner + (x + 1) * half
            wr = r * wx * half
        pts = r[:, None] * np.exp(1j * th)[None, :]
        wts = np.repeat(wr[:, None], self.n_theta, axis=1) * dth
        return pts.ravel(), wts.ravel()

    def contains(self, z: complex) -> bool:
        r = abs(z)
        return (self.inner < r or self.inner == 0.0) and r < self.outer


def reproducing_check(kernel, f, z, grid: PolarGrid) -> float:
    """|f(z) - integral of K(z, zeta) f(zeta) dA(zeta)| on the grid's domain."""
    z = complex(_coord(z))
    dom = getattr(kernel, "domain", None)
    if dom is not None and (abs(dom[1] - grid.inner) > 1e-12 or abs(dom[2] - grid.outer) > 1e-12):
        raise ValueError("quadrature domain does not match the kernel's domain")
    if not grid.contains(z):
        raise ValueError("evaluation point outside the quadrature domain")
    pts, wts = grid.nodes()
    integrand = kernel(z, pts) * f(pts) * wts
    total = math.fsum(integrand.real) + 1j * math.fsum(integrand.imag)
    return abs(f(z) - total)


def annulus_kernel(rho: float, N: int = 60):
    """Annulus kernel as a callable with its domain attached."""

    def kernel(z, w):
        return annulus_kernel_oracle(rho, np.broadcast_to(z, np.shape(w)), w, N)

    kernel.domain = ("annulus", rho, 1.0)
    return kernel


def kahan_member_sum(a, b, c, d, zs, w):
    """Q(zeta, w) for many zeta and one w, accumulated member by member."""
    zs = np.asarray(zs, dtype=complex)
    acc = KahanAccumulator(zs.shape)
    for k in range(len(a)):
        alpha = np.conj(c[k] * w + d[k])
        beta = np.conj(a[k] * w + b[k])
        acc.add(1.0 / (np.pi * (alpha - zs * beta) ** 2))
    return acc.value
