"""Quick internal consistency checks, run by ``towerkernel selftest``."""

from __future__ import annotations

import math

from .groups import GroupSpec, identity_only, whole_group
from .hyperbolic import DISC, HALFPLANE, ModelPoint, MoebiusMap, ball_kernel_center, radius_from_tau
from .kernels import SeriesOptions, annulus_pullback_oracle, green_series, quotient_kernel_series
from .tower import LOG3, EffectiveInputs, effective_bound_rhs, genus_bookkeeping, upper_bound_31


def _cyclic(lam: float) -> GroupSpec:
    s = math.sqrt(lam)
    return GroupSpec(HALFPLANE, [MoebiusMap(s, 0, 0, 1 / s, HALFPLANE)])


def run_selftest() -> list[tuple[str, bool, str]]:
    out = []
    trivial = GroupSpec(DISC, [])
    k = quotient_kernel_series(trivial, identity_only(), 0j, 0j, SeriesOptions(max_len=0)).value
    out.append(("trivial kernel", abs(k - 1 / math.pi) < 1e-15, f"{k.real:.6g}"))
    gv = green_series(trivial, identity_only(), 0j, 0.5 + 0j, SeriesOptions(max_len=0)).value
    out.append(("trivial green", abs(gv - math.log(2)) < 1e-14, f"{gv:.6g}"))

    lam = math.exp(2 * math.pi)
    g = _cyclic(lam)
    z, w = ModelPoint(0.3 + 1.2j, HALFPLANE), ModelPoint(-0.4 + 0.8j, HALFPLANE)
    q = quotient_kernel_series(g, whole_group(), z, w, SeriesOptions(max_len=8)).value
    o = annulus_pullback_oracle(lam, z, w, 60)
    rel = abs(q - o) / abs(o)
    out.append(("annulus oracle", rel < 1e-8, f"relative error {rel:.3g}"))

    err = max(abs(ball_kernel_center(t) - 1 / (math.pi * radius_from_tau(t) ** 2))
              for t in (0.5, 1.0, 2.0, 5.0))
    out.append(("ball kernel center", err < 1e-12, f"max error {err:.3g}"))
    d31 = abs(upper_bound_31(LOG3) - 3 / (4 * math.pi))
    out.append(("upper bound at log 3", d31 < 1e-14, f"error {d31:.3g}"))
    rhs = effective_bound_rhs(EffectiveInputs(2, LOG3))
    d11 = abs(rhs - 12 * 3 ** (1 / 3) / math.pi)
    out.append(("effective bound", d11 < 1e-12, f"{rhs:.6g}"))
    b = genus_bookkeeping(3, 7)
    out.append(("genus bookkeeping", b.g_j == 15, f"g_j={b.g_j}"))
    return out
