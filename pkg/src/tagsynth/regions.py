"""Clock-region abstraction.

A region is a tuple ⟨l, h, ⟨C₋₁, C₀, C₁, …, C_n⟩⟩ where h gives each clock's
integer part (clamped to c_x), C₋₁ holds the clocks strictly beyond their
maximal constant, C₀ the clocks with integer value, and C₁ … C_n group the
remaining clocks by fractional part in strictly ascending order. Two
valuations in the same region satisfy the same clock constraints (with
constants ≤ c_x) and their time/discrete successors stay region-aligned,
which is what makes the finite abstraction sound.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import AbstractionError
from .model import eval_constraint, holds_throughout, apply_reset


@dataclass(frozen=True)
class Region:
    """loc; h as a name-sorted tuple of (clock, int); blocks[0]=C₋₁,
    blocks[1]=C₀, blocks[2:]=fractional blocks (ascending, nonempty)."""
    loc: str
    h: tuple
    blocks: tuple

    def __post_init__(self):
        clocks = {x for x, _ in self.h}
        seen = set()
        for i, b in enumerate(self.blocks):
            if i >= 2 and not b:
                raise AbstractionError("empty fractional block in region")
            if b & seen:
                raise AbstractionError("overlapping region blocks")
            seen |= b
        if seen != clocks:
            raise AbstractionError("region blocks do not partition the clocks")
        object.__setattr__(self, "_hd", dict(self.h))
        object.__setattr__(self, "_hash",
                           hash((self.loc, self.h, self.blocks)))

    def __hash__(self):
        return self._hash

    def h_of(self, x: str) -> int:
        return self._hd[x]

    def is_beyond(self, x: str) -> bool:
        return x in self.blocks[0]

    def is_integer(self, x: str) -> bool:
        return x in self.blocks[1]

    def is_maximal(self) -> bool:
        return len(self.blocks[0]) == len(self.h)

    def frac_index(self, x: str) -> int:
        """1-based index of x's fractional block; 0 if x is not fractional."""
        for i, b in enumerate(self.blocks[2:], start=1):
            if x in b:
                return i
        return 0


def pretty(r: Region) -> str:
    hs = ",".join(f"{x}={v}" for x, v in r.h)
    bs = "|".join(",".join(sorted(b)) if b else "-" for b in r.blocks)
    return f"⟨{r.loc} ; {hs} ; {bs}⟩"


def _sort_key(r: Region):
    return (r.loc, r.h, tuple(tuple(sorted(b)) for b in r.blocks))


def region_of_unchecked(model, loc: str, kappa: dict) -> Region:
    """Region membership without the invariant precondition (internal: chain
    walking passes through invariant-violating regions on purpose)."""
    beyond, integer, by_frac = [], [], {}
    h = []
    for x in model.clocks:
        v = kappa[x]
        c = model.cmax[x]
        if v > c:
            beyond.append(x)
            h.append((x, c))
        else:
            ip = int(v)  # values are >= 0, so truncation is floor
            fr = v - ip
            h.append((x, ip))
            if fr == 0:
                integer.append(x)
            else:
                by_frac.setdefault(fr, []).append(x)
    blocks = [frozenset(beyond), frozenset(integer)]
    blocks.extend(frozenset(by_frac[fr]) for fr in sorted(by_frac))
    return Region(loc, tuple(sorted(h)), tuple(blocks))


def region_of(model, loc: str, kappa: dict) -> Region:
    return _region_of(model, loc, tuple(sorted(kappa.items())))


@lru_cache(maxsize=4096)
def _region_of(model, loc, kappa_items):
    kappa = dict(kappa_items)
    model.check_state(loc, kappa)
    return region_of_unchecked(model, loc, kappa)


def sample(model, r: Region) -> dict:
    """Canonical representative: block C_k gets fractional part k/(n+1);
    beyond clocks sit at c_x + 1. region_of(sample(R)) = R."""
    n = len(r.blocks) - 2
    kappa = {}
    for x, hx in r.h:
        if x in r.blocks[0]:
            kappa[x] = Fraction(model.cmax[x] + 1)
        elif x in r.blocks[1]:
            kappa[x] = Fraction(hx)
        else:
            kappa[x] = hx + Fraction(r.frac_index(x), n + 1)
    return kappa


def sample_random(model, r: Region, rng: random.Random) -> dict:
    """A random representative of R (used by sampling-based property checks)."""
    n = len(r.blocks) - 2
    den = 64
    fracs = sorted(rng.sample(range(1, den), n)) if n else []
    kappa = {}
    for x, hx in r.h:
        if x in r.blocks[0]:
            kappa[x] = model.cmax[x] + 1 + Fraction(rng.randint(0, 8), 4)
        elif x in r.blocks[1]:
            kappa[x] = Fraction(hx)
        else:
            kappa[x] = hx + Fraction(fracs[r.frac_index(x) - 1], den)
    return kappa


def time_successor(model, r: Region) -> Region:
    """The next region entered as time passes (the maximal region loops).

    If C₀ is nonempty its clocks leave the integer hyperplane first: those at
    c_x go beyond, the rest open a new smallest fractional block. Otherwise
    the top fractional block is the first to reach the next integer.
    """
    beyond, integer, frac = r.blocks[0], r.blocks[1], r.blocks[2:]
    if r.is_maximal():
        return r
    if integer:
        to_beyond = frozenset(x for x in integer if r.h_of(x) == model.cmax[x])
        stay = integer - to_beyond
        new_frac = ((stay,) if stay else ()) + frac
        return Region(r.loc, r.h, (beyond | to_beyond, frozenset()) + new_frac)
    top = frac[-1]
    new_h = tuple((x, v + 1) if x in top else (x, v) for x, v in r.h)
    return Region(r.loc, new_h, (beyond, top) + frac[:-1])


def chain(model, r: Region) -> list:
    """The time-successor chain from r up to and including the maximal region."""
    out = [r]
    while True:
        s = time_successor(model, out[-1])
        if s == out[-1]:
            return out
        out.append(s)


def discrete_successor(model, r: Region, edge):
    """Region reached by taking `edge` from r, or None if the edge is disabled
    there (guard fails on r, or the target invariant fails after the reset).
    The source invariant is deliberately not checked here; move availability
    layers that on top."""
    if edge.source != r.loc:
        raise AbstractionError(
            f"edge from {edge.source!r} applied to region at {r.loc!r}")
    kappa = sample(model, r)
    if not eval_constraint(edge.guard, kappa):
        return None
    kappa2 = apply_reset(kappa, edge.reset)
    if not eval_constraint(model.invariant(edge.target), kappa2):
        return None
    return region_of_unchecked(model, edge.target, kappa2)


def _ordered_set_partitions(items):
    """All ordered partitions of `items` into nonempty blocks."""
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for part in _ordered_set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + (part[i] | {first},) + part[i + 1:]
        for i in range(len(part) + 1):
            yield part[:i] + (frozenset((first,)),) + part[i:]


def enumerate_regions(model) -> list:
    """All regions whose valuations satisfy their location invariant, in a
    deterministic order. Count is bounded by |L|·∏(c_x+1)·|C|!·2^(2|C|)."""
    clocks = sorted(model.clocks)
    per_clock = []
    for x in clocks:
        c = model.cmax[x]
        opts = [(-1, c)]
        opts.extend((0, hx) for hx in range(c + 1))
        opts.extend((1, hx) for hx in range(c))
        per_clock.append(opts)

    def assignments(i):
        if i == len(clocks):
            yield ()
            return
        for rest in assignments(i + 1):
            for opt in per_clock[i]:
                yield (opt,) + rest

    out = []
    for loc in model.locations:
        inv = model.invariant(loc)
        for assign in assignments(0):
            beyond = frozenset(x for x, (k, _) in zip(clocks, assign) if k == -1)
            integer = frozenset(x for x, (k, _) in zip(clocks, assign) if k == 0)
            fractional = [x for x, (k, _) in zip(clocks, assign) if k == 1]
            h = tuple(sorted((x, hx) for x, (_, hx) in zip(clocks, assign)))
            for part in _ordered_set_partitions(fractional):
                r = Region(loc, h, (beyond, integer) + part)
                if eval_constraint(inv, sample(model, r)):
                    out.append(r)
    out.sort(key=_sort_key)
    return out


def delay_intervals(model, loc: str, kappa: dict) -> tuple:
    """Partition the delay axis by the region of ⟨loc, κ+Δ⟩.

    Returns ((region, (lo, hi, lo_open, hi_open)), …) in increasing delay
    order; hi=None means unbounded. The regions visited are exactly the
    time-successor chain of region_of(loc, κ): region changes happen only
    when some not-yet-beyond clock crosses an integer ≤ c_x, and each region
    occupies one contiguous interval.
    """
    return _delay_intervals(model, loc, tuple(sorted(kappa.items())))


@lru_cache(maxsize=4096)
def _delay_intervals(model, loc, kappa_items):
    kappa = dict(kappa_items)
    bps = set()
    for x in model.clocks:
        v = kappa[x]
        c = model.cmax[x]
        if v <= c:
            m = int(v) if v == int(v) else int(v) + 1
            while m <= c:
                bps.add(m - v)
                m += 1
    bps = sorted(bps)
    spans = []
    if not bps:
        spans.append((Fraction(0), None, False, True))
    else:
        if bps[0] > 0:
            spans.append((Fraction(0), bps[0], False, True))
        for i, b in enumerate(bps):
            spans.append((b, b, False, False))
            nxt = bps[i + 1] if i + 1 < len(bps) else None
            spans.append((b, nxt, True, True))
    out = []
    for lo, hi, lo_open, hi_open in spans:
        rep = interval_point((lo, hi, lo_open, hi_open))
        reg = region_of_unchecked(model, loc, {x: v + rep for x, v in kappa.items()})
        out.append((reg, (lo, hi, lo_open, hi_open)))
    return tuple(out)


def interval_point(interval) -> Fraction:
    """A canonical point inside a delay interval (midpoint; lo+1 if unbounded)."""
    lo, hi, lo_open, hi_open = interval
    if hi is None:
        return lo + 1
    if lo == hi:
        return lo
    return (lo + hi) / 2


def has_move_into(model, player: int, loc: str, kappa: dict, target: Region) -> bool:
    """Does player i have an available move from the concrete state ⟨loc, κ⟩
    whose destination lies in `target`? Availability requires the source
    invariant throughout the delay (transition point included), and for edge
    moves the guard at the transition point plus the target invariant after
    the reset."""
    inv = model.invariant(loc)
    for reg, interval in delay_intervals(model, loc, kappa):
        rep = interval_point(interval)
        if not holds_throughout(inv, kappa, rep):
            return False
        if reg == target:
            return True  # stutter move ⟨Δ, ⊥_i⟩
        for e in model.edges_from(loc):
            if e.player != player:
                continue
            if discrete_successor(model, reg, e) == target:
                return True
    return False


def bisimulation_check(model, r: Region, r2: Region, k: int = 10, seed: int = 0) -> bool:
    """Property-test utility: across k random representatives of r, the
    players' ability to move into r2 must not depend on the representative."""
    rng = random.Random(seed)
    samples = [sample(model, r)] + [sample_random(model, r, rng) for _ in range(k - 1)]
    for player in (1, 2):
        answers = {has_move_into(model, player, r.loc, kappa, r2) for kappa in samples}
        if len(answers) > 1:
            return False
    return True
