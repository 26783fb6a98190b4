"""Free groups of Moebius maps: words, ball enumeration, towers of normal subgroups.

Groups are assumed free on their generators (Schottky or cyclic).  Freeness,
discreteness and convergence type are asserted by the caller, never verified.
Every ball is stored with disc-model matrices because all series downstream
are summed in the disc.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field

import numpy as np

from .hyperbolic import (
    DISC,
    ModelPoint,
    MoebiusMap,
    as_point,
    compose,
    one_minus_abs2,
    to_model,
)

DEFAULT_ELEMENT_CAP = 10**7

CYCLIC_POWERS = "cyclic_powers"
ABELIAN_MOD = "abelian_mod"
TOP_TRIVIAL = "trivial"
TOP_COMMUTATOR = "commutator"


class ResourceCapError(RuntimeError):
    """The requested enumeration would exceed the element cap."""


def _reduce(letters):
    out = []
    for gen, sign in letters:
        if out and out[-1][0] == gen and out[-1][1] == -sign:
            out.pop()
        else:
            out.append((gen, sign))
    return tuple(out)


@dataclass(frozen=True)
class Word:
    """Freely reduced word; letters are (generator index, +1 or -1)."""

    letters: tuple = ()

    def __post_init__(self):
        letters = tuple((int(g), int(s)) for g, s in self.letters)
        for g, s in letters:
            if g < 0 or s not in (1, -1):
                raise ValueError(f"bad letter {(g, s)!r}")
        object.__setattr__(self, "letters", _reduce(letters))

    @classmethod
    def parse(cls, text: str) -> "Word":
        """'aBa' style: lowercase a, b, ... are generators, uppercase their inverses."""
        text = text.strip()
        if text in ("", "1"):
            return cls(())
        letters = []
        for ch in text:
            idx = string.ascii_lowercase.index(ch.lower())
            letters.append((idx, 1 if ch.islower() else -1))
        return cls(tuple(letters))

    @classmethod
    def from_codes(cls, codes) -> "Word":
        return cls(tuple((k >> 1, -1 if k & 1 else 1) for k in codes))

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(2 * g + (1 if s < 0 else 0) for g, s in self.letters)

    def inverse(self) -> "Word":
        return Word(tuple((g, -s) for g, s in reversed(self.letters)))

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __pow__(self, n: int) -> "Word":
        base = self if n >= 0 else self.inverse()
        return Word(base.letters * abs(n))

    def __len__(self) -> int:
        return len(self.letters)

    def is_identity(self) -> bool:
        return not self.letters

    def __str__(self) -> str:
        if not self.letters:
            return "1"
        return "".join(string.ascii_lowercase[g] if s > 0 else string.ascii_uppercase[g]
                       for g, s in self.letters)


@dataclass(eq=False)
class GroupSpec:
    model: str
    generators: list
    asserted_free_discrete: bool = True
    asserted_convergence_type: bool = True

    def __post_init__(self):
        self.generators = list(self.generators)
        for m in self.generators:
            if m.model != self.model:
                raise ValueError("generator model differs from the group model")
        for i, m in enumerate(self.generators):
            for n in self.generators[i + 1:]:
                if m.isclose(n):
                    raise ValueError("generators must be pairwise distinct")
        self._disc = [to_model(m, DISC) for m in self.generators]

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def disc_generators(self) -> list:
        return self._disc

    def key(self) -> tuple:
        return (self.model,) + tuple(x for m in self.generators for x in m.entries)


@dataclass(frozen=True)
class TowerSpec:
    kind: str
    schedule: tuple
    top: str = TOP_TRIVIAL
    rank: int = 1

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(int(m) for m in self.schedule))
        if self.kind not in (CYCLIC_POWERS, ABELIAN_MOD):
            raise ValueError(f"unknown tower kind {self.kind!r}")
        if self.top not in (TOP_TRIVIAL, TOP_COMMUTATOR):
            raise ValueError(f"unknown top {self.top!r}")
        if not self.schedule:
            raise ValueError("tower schedule is empty")
        if any(m < 1 for m in self.schedule):
            raise ValueError("schedule entries must be positive")
        for m, n in zip(self.schedule, self.schedule[1:]):
            if not (m < n and n % m == 0):
                raise ValueError("schedule must be a strictly increasing divisibility chain")
        if self.kind == CYCLIC_POWERS and self.rank != 1:
            raise ValueError("cyclic_powers towers need a rank-1 group")
        if self.kind == ABELIAN_MOD and self.top == TOP_TRIVIAL and self.rank > 1:
            raise ValueError("abelian_mod towers on rank >= 2 intersect in the commutator subgroup")

    @property
    def levels(self) -> int:
        return len(self.schedule)

    def modulus(self, j: int) -> int:
        if not 1 <= j <= len(self.schedule):
            raise ValueError(f"invalid tower level {j}; expected 1..{len(self.schedule)}")
        return self.schedule[j - 1]


@dataclass
class EnumerationBall:
    """All reduced words of length <= max_len, ordered by (length, letter codes).

    Matrices are disc-model and det-normalised.  ``gap`` holds 1 - |gamma(0)|^2,
    computed as 1/|d|^2 so that it stays accurate for far-away elements.
    """

    max_len: int
    rank: int
    codes: list
    lengths: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    abel: np.ndarray
    pruned: bool = False
    shell_start: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def gap(self) -> np.ndarray:
        return 1.0 / np.abs(self.d) ** 2

    @property
    def displacement(self) -> np.ndarray:
        """1 - |gamma(0)| for every element."""
        g = self.gap
        return g / (1.0 + np.sqrt(np.clip(1.0 - g, 0.0, None)))

    def word(self, i: int) -> Word:
        return Word.from_codes(self.codes[i])

    def matrix(self, i: int) -> MoebiusMap:
        return MoebiusMap(self.a[i], self.b[i], self.c[i], self.d[i], DISC)

    def elements(self):
        for i in range(len(self)):
            yield self.word(i), self.matrix(i), float(self.displacement[i])

    def shell_sums(self, mask=None) -> np.ndarray:
        """Per-length sums of 1 - |gamma(0)| over the (optionally masked) elements."""
        disp = self.displacement
        if mask is not None:
            disp = np.where(mask, disp, 0.0)
        out = np.zeros(self.max_len + 1)
        for length in range(self.max_len + 1):
            sel = self.lengths == length
            out[length] = math.fsum(disp[sel])
        return out


def ball_count(rank: int, max_len: int) -> int:
    """Number of reduced words of length <= max_len in the free group of this rank."""
    if rank == 0 or max_len == 0:
        return 1
    if rank == 1:
        return 2 * max_len + 1
    return 1 + 2 * rank * ((2 * rank - 1) ** max_len - 1) // (2 * rank - 2)


_BALL_CACHE: dict = {}


def enumerate_ball(g: GroupSpec, max_len: int, cap: int = DEFAULT_ELEMENT_CAP,
                   prune_below: float | None = None) -> EnumerationBall:
    """Enumerate every reduced word of length <= max_len with its matrix.

    Matrices are built prefix-incrementally one length shell at a time.  When
    ``prune_below`` is given, a word whose 1 - |gamma(0)|^2 is already below it
    is not extended; the ball is then incomplete and flagged ``pruned``.
    """
    if max_len < 0:
        raise ValueError("max_len must be nonnegative")
    total = ball_count(g.rank, max_len)
    if prune_below is None and total > cap:
        raise ResourceCapError(f"ball of length {max_len} has {total} elements, cap is {cap}")
    key = (g.key(), max_len, prune_below)
    if key in _BALL_CACHE:
        return _BALL_CACHE[key]

    rank = g.rank
    gens = []
    for m in g.disc_generators:
        gens.append(m.entries)
        gens.append(m.inverse().entries)
    gens = np.array(gens, dtype=complex).reshape(-1, 4)
    n_letters = 2 * rank
    unit = np.zeros((max(n_letters, 1), max(rank, 1)), dtype=np.int64)
    for k in range(n_letters):
        unit[k, k >> 1] = -1 if k & 1 else 1

    codes = [()]
    lengths = [np.zeros(1, dtype=np.int64)]
    mats = [np.array([[1, 0, 0, 1]], dtype=complex)]
    abel = [np.zeros((1, max(rank, 1)), dtype=np.int64)]
    last = np.array([-1])
    shell_start = [0]
    prev_codes = [()]
    prev_mats = mats[0]
    prev_abel = abel[0]
    count = 1
    for length in range(1, max_len + 1):
        if rank == 0 or len(prev_codes) == 0:
            break
        alive = np.ones(len(prev_codes), dtype=bool)
        if prune_below is not None:
            alive = 1.0 / np.abs(prev_mats[:, 3]) ** 2 >= prune_below
        letters = np.arange(n_letters)
        ok = (letters[None, :] != (last[:, None] ^ 1)) | (last[:, None] < 0)
        ok &= alive[:, None]
        pi, ki = np.nonzero(ok)  # row-major: prefix order, then letter order
        count += len(pi)
        if count > cap:
            raise ResourceCapError(f"enumeration exceeded the cap of {cap} elements")
        pa, pb, pc, pd = (prev_mats[pi, t] for t in range(4))
        ga, gb, gc, gd = (gens[ki, t] for t in range(4))
        new_mats = np.stack([pa * ga + pb * gc, pa * gb + pb * gd,
                             pc * ga + pd * gc, pc * gb + pd * gd], axis=1)
        new_abel = prev_abel[pi] + unit[ki]
        new_codes = [prev_codes[i] + (k,) for i, k in zip(pi.tolist(), ki.tolist())]
        shell_start.append(sum(len(c) for c in mats))
        codes.extend(new_codes)
        mats.append(new_mats)
        abel.append(new_abel)
        lengths.append(np.full(len(pi), length, dtype=np.int64))
        prev_codes, prev_mats, prev_abel, last = new_codes, new_mats, new_abel, ki
    allm = np.vstack(mats)
    ball = EnumerationBall(
        max_len=max_len,
        rank=rank,
        codes=codes,
        lengths=np.concatenate(lengths),
        a=allm[:, 0].copy(), b=allm[:, 1].copy(), c=allm[:, 2].copy(), d=allm[:, 3].copy(),
        abel=np.vstack(abel)[:, :rank] if rank else np.zeros((len(codes), 0), dtype=np.int64),
        pruned=prune_below is not None,
        shell_start=shell_start,
    )
    if len(_BALL_CACHE) > 16:
        _BALL_CACHE.clear()
    _BALL_CACHE[key] = ball
    return ball


def word_to_matrix(g: GroupSpec, w: Word) -> MoebiusMap:
    """Ordered product of generator matrices (model of the group)."""
    m = MoebiusMap.identity(g.model)
    for gen, sign in Word(w.letters).letters:
        if gen >= g.rank:
            raise IndexError(f"generator index {gen} out of range for rank {g.rank}")
        step = g.generators[gen] if sign > 0 else g.generators[gen].inverse()
        m = compose(m, step)
    return m


def abelianization(w: Word, rank: int | None = None) -> tuple[int, ...]:
    """Signed exponent sum of each generator."""
    if rank is None:
        rank = max((gen for gen, _ in w.letters), default=-1) + 1
    out = [0] * rank
    for gen, sign in w.letters:
        out[gen] += sign
    return tuple(out)


class MembershipPredicate:
    """Indicator of a normal subgroup, usable on single words or whole balls."""

    def __init__(self, name: str, modulus: int | None = None, exact_zero: bool = False,
                 identity_only: bool = False):
        self.name = name
        self.modulus = modulus
        self.exact_zero = exact_zero
        self.identity_only = identity_only

    def __call__(self, w: Word) -> bool:
        if self.identity_only:
            return w.is_identity()
        ab = abelianization(w)
        if self.exact_zero:
            return all(x == 0 for x in ab)
        if self.modulus is None:
            return True
        return all(x % self.modulus == 0 for x in ab)

    def mask(self, ball: EnumerationBall) -> np.ndarray:
        if self.identity_only:
            return ball.lengths == 0
        if self.exact_zero:
            return np.all(ball.abel == 0, axis=1)
        if self.modulus is None:
            return np.ones(len(ball), dtype=bool)
        return np.all(ball.abel % self.modulus == 0, axis=1)

    def __repr__(self) -> str:
        return f"MembershipPredicate({self.name})"


def whole_group() -> MembershipPredicate:
    return MembershipPredicate("whole")


def identity_only() -> MembershipPredicate:
    return MembershipPredicate("identity", identity_only=True)


def level_predicate(t: TowerSpec, j: int) -> MembershipPredicate:
    m = t.modulus(j)
    # for rank 1 the exponent-sum test is exactly membership in <gamma^m>
    return MembershipPredicate(f"level{j}(m={m})", modulus=m)


def top_predicate(t: TowerSpec) -> MembershipPredicate:
    if t.top == TOP_TRIVIAL:
        return identity_only()
    return MembershipPredicate("commutator", exact_zero=True)


def tower_member(t: TowerSpec, j, w: Word) -> bool:
    """Membership of ``w`` in level j (1-based) or, with j='top', in the top subgroup."""
    if j == "top":
        return top_predicate(t)(w)
    return level_predicate(t, j)(w)


def tower_index(t: TowerSpec, j) -> float:
    """[Gamma : Gamma_j]; the top subgroup has infinite index."""
    if j == "top":
        return math.inf
    m = t.modulus(j)
    return m if t.kind == CYCLIC_POWERS else m ** t.rank


def _point_in_disc(x) -> ModelPoint:
    return to_model(as_point(x), DISC)


def orbit_distances(ball: EnumerationBall, x: ModelPoint, mask=None) -> np.ndarray:
    """Hyperbolic distance from x to gamma(x) for every ball element (disc formulas).

    Uses sinh(d/2)^2 = |x - gamma x|^2 |c x + d|^2 / (1 - |x|^2)^2, which avoids
    forming 1 - |gamma x|^2 by subtraction.
    """
    z = _point_in_disc(x).coordinate
    a, b, c, d = ball.a, ball.b, ball.c, ball.d
    if mask is not None:
        a, b, c, d = a[mask], b[mask], c[mask], d[mask]
    den = c * z + d
    num = a * z + b - z * den
    s = np.abs(num) / one_minus_abs2(z)
    return 2.0 * np.arcsinh(s)


def injectivity_radius(g: GroupSpec, pred: MembershipPredicate, x, max_len: int,
                       ball: EnumerationBall | None = None) -> tuple[float, bool]:
    """Half the smallest displacement of x over nonidentity subgroup members in the ball.

    Certified only for rank 1, where displacement grows with |n| along powers of
    the generator so the smallest admissible power in the ball is the minimiser.
    For rank >= 2 the value is an upper bound for the true radius.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    ball = ball or enumerate_ball(g, max_len)
    mask = pred.mask(ball) & (ball.lengths > 0)
    if not mask.any():
        return math.inf, False
    dist = orbit_distances(ball, x, mask)
    return 0.5 * float(dist.min()), g.rank == 1 and not ball.pruned


def dirichlet_contains(g: GroupSpec, pred: MembershipPredicate, x, z, max_len: int,
                       ball: EnumerationBall | None = None) -> bool:
    """Ball-truncated test for z lying in the Dirichlet domain centred at x.

    Strict inequality d(z, x) < d(z, gamma x) for every enumerated nonidentity
    member; ties count as outside.  Elements beyond the ball are not examined.
    """
    ball = ball or enumerate_ball(g, max_len)
    xd = _point_in_disc(x).coordinate
    zd = _point_in_disc(z).coordinate
    mask = pred.mask(ball) & (ball.lengths > 0)
    if not mask.any():
        return True
    a, b, c, d = ball.a[mask], ball.b[mask], ball.c[mask], ball.d[mask]
    # compare sinh^2(d/2) scaled by (1-|z|^2): |z-y|^2/(1-|y|^2)
    den = c * xd + d
    gx = (a * xd + b) / den
    gap_gx = one_minus_abs2(xd) / np.abs(den) ** 2
    to_orbit = np.abs(zd - gx) ** 2 / gap_gx
    to_x = abs(zd - xd) ** 2 / one_minus_abs2(xd)
    return bool(np.all(to_x < to_orbit))


@dataclass
class ConvergenceDiagnostic:
    partial_sums: np.ndarray
    increments: np.ndarray
    ratio: float
    likely_convergent: bool

    def table(self) -> list[tuple[int, float, float]]:
        return [(length, float(s), float(i))
                for length, (s, i) in enumerate(zip(self.partial_sums, self.increments))]


def fit_decay_ratio(increments: np.ndarray, start: int | None = None) -> float:
    """Least-squares geometric ratio of the positive increments from ``start`` on.

    Defaults to fitting the second half of the shells so the pre-asymptotic
    first shells do not bias the rate.
    """
    n = len(increments) - 1
    if start is None:
        start = max(1, (n + 1) // 2)
    ls = np.arange(len(increments))
    sel = (ls >= start) & (increments > 0)
    if sel.sum() < 2:
        sel = (ls >= 1) & (increments > 0)
    if sel.sum() == 0:
        return 0.0
    if sel.sum() == 1:
        return math.nan
    slope, _ = np.polyfit(ls[sel], np.log(increments[sel]), 1)
    return float(math.exp(slope))


def convergence_diagnostic(g: GroupSpec, max_len: int, pred: MembershipPredicate | None = None,
                           ball: EnumerationBall | None = None) -> ConvergenceDiagnostic:
    """Partial sums of 1 - |gamma(0)| over nonidentity members, shell by shell."""
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    ball = ball or enumerate_ball(g, max_len)
    mask = ball.lengths > 0
    if pred is not None:
        mask &= pred.mask(ball)
    inc = ball.shell_sums(mask)
    partial = np.cumsum(inc)
    ratio = fit_decay_ratio(inc)
    likely = bool(ratio < 1.0) if not math.isnan(ratio) else False
    return ConvergenceDiagnostic(partial, inc, ratio, likely)


def displacement_sandwich(ball: EnumerationBall, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(lower, 1 - |gamma z|, upper) for the two-sided displacement estimate."""
    zc = _point_in_disc(z).coordinate
    disp0 = ball.displacement
    den = ball.c * zc + ball.d
    gap = one_minus_abs2(zc) / np.abs(den) ** 2  # 1 - |gamma z|^2
    mid = gap / (1.0 + np.sqrt(np.clip(1.0 - gap, 0.0, None)))
    w = one_minus_abs2(zc)
    return w * disp0 / 4.0, mid, 4.0 * disp0 / w
