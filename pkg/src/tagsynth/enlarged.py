"""Observation predicates layered over game transitions.

Receptiveness cannot be judged from raw regions alone: whether time diverges
depends on how clock values moved during each transition. The enlarged state
carries, per round, the blame flag bl₁ (did player 1's move determine the
transition?) and three per-clock history predicates evaluated at the
transition point κ′ = κ + Δ, just before the reset:

  V_{>0}(x)   κ′(x) > 0
  V_{≥1}(x)   κ′(x) ≥ 1
  V*(x)       κ(x) > c_x and κ′(x) > c_x  (stayed beyond its constant)

All three are region properties of the delay-target region, so they lift to
the finite abstraction exactly. The alternative tick encoding replaces the V
predicates with a wraparound clock z (c_z = 1) whose crossings of 1 set a
tick flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import AbstractionError, ModelError
from .model import BOT1, BOT2, Stutter
from .regions import Region, chain, discrete_successor, region_of_unchecked


@dataclass(frozen=True)
class PredicateState:
    bl1: bool
    gt0: frozenset  # clocks with V_{>0}
    ge1: frozenset  # clocks with V_{≥1}
    star: frozenset  # clocks with V*_{>max}

    def __post_init__(self):
        if not self.ge1 <= self.gt0:
            raise ModelError("V_{≥1} must imply V_{>0}")
        object.__setattr__(self, "_hash",
                           hash((self.bl1, self.gt0, self.ge1, self.star)))

    def __hash__(self):
        return self._hash


def initial_predicates() -> PredicateState:
    return PredicateState(False, frozenset(), frozenset(), frozenset())


@dataclass(frozen=True)
class EnlargedRegion:
    region: Region
    preds: PredicateState

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.region, self.preds)))

    def __hash__(self):
        return self._hash

    @property
    def loc(self):
        return self.region.loc


@dataclass(frozen=True)
class TickRegion:
    """Region over C ∪ {z}; tick records whether z crossed 1 on the last
    transition; bl₁ as in PredicateState."""
    region: Region
    tick: bool
    bl1: bool

    def __post_init__(self):
        object.__setattr__(self, "_hash",
                           hash((self.region, self.tick, self.bl1)))

    def __hash__(self):
        return self._hash

    @property
    def loc(self):
        return self.region.loc


TICK_CLOCK = "z"


def blame1(winner: int, tie: bool, same_successor_on_tie: bool) -> bool:
    """Bl₁ asks for Δ₁ ≤ Δ₂ and that player 1's move maps the state to the
    actual successor; on a tie that reduces to the successors coinciding."""
    return winner == 1 or (tie and same_successor_on_tie)


def update_predicates(model, loc: str, kappa: dict, move, winner: int,
                      tie: bool, same_successor_on_tie: bool) -> PredicateState:
    """Concrete-level predicate update for the executed round (move is the
    winning move; its delay fixes the transition point)."""
    prime = {x: v + move.delay for x, v in kappa.items()}
    gt0 = frozenset(x for x in model.clocks if prime[x] > 0)
    ge1 = frozenset(x for x in model.clocks if prime[x] >= 1)
    star = frozenset(
        x for x in model.clocks
        if kappa[x] > model.cmax[x] and prime[x] > model.cmax[x]
    )
    return PredicateState(blame1(winner, tie, same_successor_on_tie), gt0, ge1, star)


def region_gt0(target: Region, x: str) -> bool:
    return not (target.is_integer(x) and target.h_of(x) == 0)


def region_ge1(target: Region, x: str) -> bool:
    return target.is_beyond(x) or target.h_of(x) >= 1


def region_zero(r: Region, x: str) -> bool:
    """The state property 'x = 0' (C₀ membership with integer part 0)."""
    return r.is_integer(x) and r.h_of(x) == 0


def lift_region_update(model, src: EnlargedRegion, target: Region, action,
                       winner: int, tie: bool, same_successor_on_tie: bool) -> EnlargedRegion:
    """Region-level twin of update_predicates: the transition point is the
    delay-target region on src's chain, so every V predicate is decided by
    block membership; the base successor is the target itself for ⊥ or the
    action's edge destination."""
    positions = chain(model, src.region)
    if target not in positions:
        raise AbstractionError("delay target is not on the time-successor chain")
    gt0 = frozenset(x for x in model.clocks if region_gt0(target, x))
    ge1 = frozenset(x for x in model.clocks if region_ge1(target, x))
    star = frozenset(x for x in model.clocks if src.region.is_beyond(x))
    preds = PredicateState(blame1(winner, tie, same_successor_on_tie), gt0, ge1, star)
    base = _apply_action(model, target, action)
    return EnlargedRegion(base, preds)


def _apply_action(model, target: Region, action) -> Region:
    if action is None or isinstance(action, Stutter):
        return target
    for e in model.edges_for(target.loc, action):
        succ = discrete_successor(model, target, e)
        if succ is not None:
            return succ
    raise AbstractionError(f"action {action!r} not enabled at the delay target")


def advance_z(z: Fraction, delta: Fraction):
    """Advance the tick clock: returns (z after wraparound, crossed 1?)."""
    if not 0 <= z < 1:
        raise ModelError("tick clock must lie in [0,1) at states")
    total = z + delta
    return total % 1, total >= 1


def extend_with_tick_clock(model):
    """The same automaton over C ∪ {z}. z appears in no constraint, so its
    maximal constant is the floor value 1."""
    from .model import TimedGameModel

    if TICK_CLOCK in model.clocks:
        raise ModelError(f"clock name {TICK_CLOCK!r} is reserved for the tick encoding")
    return TimedGameModel(
        name=model.name,
        locations=model.locations,
        clocks=model.clocks + (TICK_CLOCK,),
        actions1=model.actions1,
        actions2=model.actions2,
        edges=model.edges,
        invariants=model.invariants,
        initial_location=model.initial_location,
    )


def tick_update(model, loc: str, kappa_with_z: dict, move, winner: int,
                tie: bool, same_successor_on_tie: bool) -> TickRegion:
    """Concrete-level tick-structure update. `model` is the z-extended model
    (extend_with_tick_clock); kappa_with_z includes the tick clock z (in
    [0,1)); the move's delay advances z modulo 1 and sets tick if z reached
    or passed 1."""
    from .model import eval_constraint

    z_after, crossed = advance_z(kappa_with_z[TICK_CLOCK], move.delay)
    prime = {x: v + move.delay for x, v in kappa_with_z.items()}
    prime[TICK_CLOCK] = z_after
    loc2 = loc
    if not (move.action is None or isinstance(move.action, Stutter)):
        edge = None
        for e in model.edges_for(loc, move.action):
            if eval_constraint(e.guard, prime):  # guards never mention z
                edge = e
                break
        if edge is None:
            raise AbstractionError(f"action {move.action!r} not enabled")
        for x in edge.reset:
            prime[x] = Fraction(0)
        loc2 = edge.target
    reg = region_of_unchecked(model, loc2, prime)
    return TickRegion(reg, crossed, blame1(winner, tie, same_successor_on_tie))
