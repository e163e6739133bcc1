"""Timed automaton games: clock constraints, valuations, moves, model validation.

A timed automaton game is an automaton ⟨L, C, A1, A2, E, inv⟩ whose actions are
partitioned between player 1 (the controller) and player 2 (the environment).
Both players simultaneously propose a move ⟨delay, action⟩; the shorter delay
wins. Time is exact rational throughout — region membership must be decided
exactly, and floats would corrupt the abstraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ModelError, NotAStateError


# ---------------------------------------------------------------------------
# Clock constraints
#
# Grammar: theta ::= x <= d | d <= x | !theta | (theta & theta) | true
# with d a nonnegative integer. No diagonal constraints (x - y <= d) and no
# parametric constants; the guard language is deliberately this small.
# ---------------------------------------------------------------------------

class ClockConstraint:
    __slots__ = ()


@dataclass(frozen=True)
class TrueConstraint(ClockConstraint):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class AtomLE(ClockConstraint):
    """x <= d"""
    clock: str
    bound: int

    def __post_init__(self):
        if self.bound < 0:
            raise ModelError(f"negative constant in constraint: {self.clock}<={self.bound}")

    def __str__(self):
        return f"{self.clock}<={self.bound}"


@dataclass(frozen=True)
class AtomGE(ClockConstraint):
    """d <= x"""
    bound: int
    clock: str

    def __post_init__(self):
        if self.bound < 0:
            raise ModelError(f"negative constant in constraint: {self.bound}<={self.clock}")

    def __str__(self):
        return f"{self.bound}<={self.clock}"


@dataclass(frozen=True)
class Neg(ClockConstraint):
    inner: ClockConstraint

    def __str__(self):
        return f"!({self.inner})"


@dataclass(frozen=True)
class Conj(ClockConstraint):
    left: ClockConstraint
    right: ClockConstraint

    def __str__(self):
        return f"({self.left} & {self.right})"


TRUE = TrueConstraint()


def eval_constraint(theta: ClockConstraint, kappa: dict) -> bool:
    """Decide kappa |= theta by structural recursion (exact arithmetic)."""
    if isinstance(theta, TrueConstraint):
        return True
    if isinstance(theta, AtomLE):
        if theta.clock not in kappa:
            raise ModelError(f"unknown clock {theta.clock!r} in constraint")
        return kappa[theta.clock] <= theta.bound
    if isinstance(theta, AtomGE):
        if theta.clock not in kappa:
            raise ModelError(f"unknown clock {theta.clock!r} in constraint")
        return theta.bound <= kappa[theta.clock]
    if isinstance(theta, Neg):
        return not eval_constraint(theta.inner, kappa)
    if isinstance(theta, Conj):
        return eval_constraint(theta.left, kappa) and eval_constraint(theta.right, kappa)
    raise ModelError(f"not a clock constraint: {theta!r}")


def constraint_clocks(theta: ClockConstraint) -> set:
    """All clock names mentioned in theta."""
    if isinstance(theta, (AtomLE, AtomGE)):
        return {theta.clock}
    if isinstance(theta, Neg):
        return constraint_clocks(theta.inner)
    if isinstance(theta, Conj):
        return constraint_clocks(theta.left) | constraint_clocks(theta.right)
    return set()


def constraint_constants(theta: ClockConstraint):
    """Yield (clock, constant) pairs for every atom in theta."""
    if isinstance(theta, AtomLE):
        yield (theta.clock, theta.bound)
    elif isinstance(theta, AtomGE):
        yield (theta.clock, theta.bound)
    elif isinstance(theta, Neg):
        yield from constraint_constants(theta.inner)
    elif isinstance(theta, Conj):
        yield from constraint_constants(theta.left)
        yield from constraint_constants(theta.right)


def holds_throughout(theta: ClockConstraint, kappa: dict, delta: Fraction) -> bool:
    """Does theta hold at kappa + t for every t in [0, delta]?

    Constraint truth along a delay changes only where some clock crosses an
    integer atom boundary, so it suffices to check the boundary breakpoints,
    the endpoints, and a midpoint of each open segment between them.
    """
    if delta < 0:
        raise ModelError("negative delay")
    if isinstance(theta, TrueConstraint):
        return True
    points = {Fraction(0), Fraction(delta)}
    for clock, d in constraint_constants(theta):
        t = Fraction(d) - kappa[clock]
        if 0 <= t <= delta:
            points.add(t)
    pts = sorted(points)
    samples = list(pts)
    for a, b in zip(pts, pts[1:]):
        samples.append((a + b) / 2)
    return all(
        eval_constraint(theta, {x: v + t for x, v in kappa.items()}) for t in samples
    )


# ---------------------------------------------------------------------------
# Moves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stutter:
    """The per-player stutter symbol (never parseable as a user action name)."""
    player: int

    def __str__(self):
        return f"_|_{self.player}"


BOT1 = Stutter(1)
BOT2 = Stutter(2)


@dataclass(frozen=True)
class Move:
    """A timed move ⟨delay, action⟩; action is an action name or a Stutter."""
    delay: Fraction
    action: object

    def __post_init__(self):
        if self.delay < 0:
            raise ModelError("move delay must be >= 0")

    def __str__(self):
        return f"<{self.delay},{self.action}>"


# ---------------------------------------------------------------------------
# Edges and the model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    source: str
    player: int
    action: str
    guard: ClockConstraint
    target: str
    reset: frozenset

    def __str__(self):
        rs = ",".join(sorted(self.reset))
        return f"{self.source} -> {self.target} : p{self.player}.{self.action} when {self.guard} reset {{{rs}}}"


@dataclass(frozen=True)
class TimedGameModel:
    name: str
    locations: tuple
    clocks: tuple
    actions1: tuple
    actions2: tuple
    edges: tuple
    invariants: dict
    initial_location: str | None = None
    cmax: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "cmax", max_constants(self))
        by_loc = {}
        by_loc_action = {}
        for e in self.edges:
            by_loc.setdefault(e.source, []).append(e)
            by_loc_action.setdefault((e.source, e.action), []).append(e)
        object.__setattr__(self, "_edges_from", by_loc)
        object.__setattr__(self, "_edges_from_action", by_loc_action)

    # dict fields block the generated hash; identity hashing is fine since
    # models are built once and passed around.
    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        if not isinstance(other, TimedGameModel):
            return NotImplemented
        return (
            self.name == other.name
            and self.locations == other.locations
            and self.clocks == other.clocks
            and self.actions1 == other.actions1
            and self.actions2 == other.actions2
            and self.edges == other.edges
            and self.invariants == other.invariants
            and self.initial_location == other.initial_location
        )

    def invariant(self, loc: str) -> ClockConstraint:
        try:
            return self.invariants[loc]
        except KeyError:
            raise ModelError(f"unknown location {loc!r}") from None

    def edges_from(self, loc: str):
        return self._edges_from.get(loc, [])

    def edges_for(self, loc: str, action: str):
        return self._edges_from_action.get((loc, action), [])

    def player_of(self, action) -> int:
        if isinstance(action, Stutter):
            return action.player
        if action in self.actions1:
            return 1
        if action in self.actions2:
            return 2
        raise ModelError(f"unknown action {action!r}")

    def zero_valuation(self) -> dict:
        return {x: Fraction(0) for x in self.clocks}

    def check_state(self, loc: str, kappa: dict):
        """Raise unless ⟨loc, kappa⟩ is a legal state."""
        if loc not in self.locations:
            raise ModelError(f"unknown location {loc!r}")
        for x in self.clocks:
            if kappa.get(x) is None or kappa[x] < 0:
                raise ModelError(f"clock {x!r} missing or negative in valuation")
        if not eval_constraint(self.invariant(loc), kappa):
            raise NotAStateError(f"invariant of {loc!r} violated at {kappa}")


def max_constants(model: TimedGameModel) -> dict:
    """Per-clock maximal constant c_x (floor 1: clocks never constrained, or
    constrained only with constant 0, still get c_x = 1)."""
    cmax = {x: 1 for x in model.clocks}
    constraints = [e.guard for e in model.edges] + list(model.invariants.values())
    for theta in constraints:
        for clock, d in constraint_constants(theta):
            if clock in cmax:
                cmax[clock] = max(cmax[clock], d)
    return cmax


def apply_reset(kappa: dict, reset) -> dict:
    out = dict(kappa)
    for x in reset:
        out[x] = Fraction(0)
    return out


def validate_model(model: TimedGameModel) -> list:
    """Structural + determinism + progress diagnostics (returned, never raised).

    Determinism and progress are checked at region granularity: finitely many
    cases, each decided exactly on a sample valuation. This is necessary but
    not sufficient for full receptive well-formedness, which is not decided
    here.
    """
    diags = []
    declared = set(model.clocks)
    locs = set(model.locations)

    if set(model.actions1) & set(model.actions2):
        diags.append("action sets of the two players overlap: "
                     + ",".join(sorted(set(model.actions1) & set(model.actions2))))
    for loc, theta in model.invariants.items():
        if loc not in locs:
            diags.append(f"invariant given for undeclared location {loc!r}")
        for x in constraint_clocks(theta):
            if x not in declared:
                diags.append(f"invariant of {loc!r} references undeclared clock {x!r}")
    for loc in model.locations:
        if loc not in model.invariants:
            diags.append(f"location {loc!r} has no invariant")
    for e in model.edges:
        if e.source not in locs:
            diags.append(f"edge from undeclared location {e.source!r}")
        if e.target not in locs:
            diags.append(f"edge to undeclared location {e.target!r}")
        actions = model.actions1 if e.player == 1 else model.actions2
        if e.action not in actions:
            diags.append(f"edge action {e.action!r} is not a player-{e.player} action")
        for x in constraint_clocks(e.guard):
            if x not in declared:
                diags.append(f"guard of edge {e} references undeclared clock {x!r}")
        for x in e.reset:
            if x not in declared:
                diags.append(f"reset of edge {e} references undeclared clock {x!r}")
    if model.initial_location is not None and model.initial_location not in locs:
        diags.append(f"initial location {model.initial_location!r} undeclared")
    if diags:
        return diags  # region machinery needs a structurally sound model

    from . import regions as _regions

    all_regions = _regions.enumerate_regions(model)
    by_loc_regions = {}
    for r in all_regions:
        by_loc_regions.setdefault(r.loc, []).append(r)

    # Determinism: same-location same-action edges with different effect must
    # have disjoint guards. A state and a move must determine the successor,
    # so edges that differ in (target, reset) conflict; exact duplicates are
    # flagged as such.
    for (loc, action), edges in sorted(model._edges_from_action.items()):
        if len(edges) < 2:
            continue
        for i in range(len(edges)):
            for j in range(i + 1, len(edges)):
                a, b = edges[i], edges[j]
                if (a.target, a.reset) == (b.target, b.reset):
                    diags.append(f"duplicate edge on action {action!r} at {loc!r}")
                    continue
                for r in by_loc_regions.get(loc, []):
                    kappa = _regions.sample(model, r)
                    if eval_constraint(a.guard, kappa) and eval_constraint(b.guard, kappa):
                        diags.append(
                            f"nondeterministic action {action!r} at {loc!r}: edges to "
                            f"{a.target!r} and {b.target!r} overlap on region {_regions.pretty(r)}"
                        )
                        break

    # Progress: at every region, each player can either let time diverge
    # (invariant holds along the whole chain) or take one of its own edges
    # after a legal delay.
    for loc in model.locations:
        inv = model.invariant(loc)
        bad = {1: None, 2: None}
        for r in by_loc_regions.get(loc, []):
            chain = _regions.chain(model, r)
            ok_prefix = []
            for t in chain:
                if eval_constraint(inv, _regions.sample(model, t)):
                    ok_prefix.append(t)
                else:
                    break
            if not ok_prefix:
                continue  # the region hosts no states of this location
            time_open = len(ok_prefix) == len(chain)
            for player in (1, 2):
                if time_open or bad[player] is not None:
                    continue
                found = False
                for t in ok_prefix:
                    for e in model.edges_from(loc):
                        if e.player != player:
                            continue
                        if _regions.discrete_successor(model, t, e) is not None:
                            found = True
                            break
                    if found:
                        break
                if not found:
                    bad[player] = r
        for player in (1, 2):
            if bad[player] is not None:
                diags.append(
                    f"progress requirement violated for player {player} at {loc}"
                    f" (e.g. region {_regions.pretty(bad[player])})"
                )
    return diags
