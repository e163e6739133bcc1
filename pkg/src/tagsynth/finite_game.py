"""The finite concurrent game over enlarged regions and its turn-based form.

States are enlarged regions (base region + predicate state) or, for the
alternative tick encoding, regions over C ∪ {z} with tick/bl₁ flags. A
player-1 move names a delay target on the time-successor chain plus an action
or ⊥₁; player-2 moves additionally carry a scheduler index i ∈ {1,2} that
resolves ties in player 2's favor. The joint transition compares chain
positions: the earlier target wins, and on equal targets the scheduler index
picks the executing player.

Move availability follows the concrete game: the source invariant must hold
along the chain up to and including the transition point, the edge guard at
the transition point, and the target invariant after the reset. ⟨position 0,
⊥⟩ is always available, so move sets are never empty.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModelError
from .model import TrueConstraint, eval_constraint
from .regions import Region, chain, discrete_successor, enumerate_regions, sample
from .enlarged import (
    TICK_CLOCK,
    EnlargedRegion,
    PredicateState,
    TickRegion,
    blame1,
    extend_with_tick_clock,
    initial_predicates,
    lift_region_update,
    region_gt0,
    region_ge1,
    region_zero,
    _apply_action,
)


def _region_key(r: Region):
    return (r.loc, r.h, tuple(tuple(sorted(b)) for b in r.blocks))


def _preds_key(p: PredicateState):
    return (p.bl1, tuple(sorted(p.gt0)), tuple(sorted(p.ge1)), tuple(sorted(p.star)))


def state_key(s):
    if isinstance(s, EnlargedRegion):
        return (_region_key(s.region),) + _preds_key(s.preds)
    return (_region_key(s.region), s.tick, s.bl1)


# ---------------------------------------------------------------------------
# Encodings
# ---------------------------------------------------------------------------

class PredicatesEncoding:
    """States are EnlargedRegions; delay targets are plain chain regions."""

    name = "predicates"

    def __init__(self, model):
        self.model = model

    def initial_states(self, full=False):
        regions = enumerate_regions(self.model)
        if not full:
            return [EnlargedRegion(r, initial_predicates()) for r in regions]
        out = []
        clocks = list(self.model.clocks)
        n = len(clocks)
        for r in regions:
            for bl1 in (False, True):
                for g in range(1 << n):
                    gt0 = frozenset(x for i, x in enumerate(clocks) if g >> i & 1)
                    for e in range(1 << n):
                        ge1 = frozenset(x for i, x in enumerate(clocks) if e >> i & 1)
                        if not ge1 <= gt0:
                            continue
                        for st in range(1 << n):
                            star = frozenset(x for i, x in enumerate(clocks) if st >> i & 1)
                            out.append(EnlargedRegion(r, PredicateState(bl1, gt0, ge1, star)))
        return out

    def positions(self, region: Region):
        """[(handle, region-at-position), …] in chain order."""
        return [(t, t) for t in chain(self.model, region)]

    def successor(self, state, handle, action, winner, tie, same):
        return lift_region_update(self.model, state, handle, action, winner, tie, same)

    def atoms(self):
        out = ["Y", "bl1"]
        for x in sorted(self.model.clocks):
            out += [f"{x}=0", f"V>0({x})", f"V>=1({x})", f"V*({x})", f"{x}>c"]
        return tuple(out)

    def label_atoms(self, state, safeY):
        atoms = set()
        if state.loc in safeY:
            atoms.add("Y")
        if state.preds.bl1:
            atoms.add("bl1")
        for x in self.model.clocks:
            if region_zero(state.region, x):
                atoms.add(f"{x}=0")
            if x in state.preds.gt0:
                atoms.add(f"V>0({x})")
            if x in state.preds.ge1:
                atoms.add(f"V>=1({x})")
            if x in state.preds.star:
                atoms.add(f"V*({x})")
            if state.region.is_beyond(x):
                atoms.add(f"{x}>c")
        return atoms


def tick_step(model_z, r: Region):
    """One step of the wrapped time-successor: like time_successor, except
    that when z's fractional block reaches 1 the z component wraps to integer
    0 instead of advancing. Returns (next region, z crossed this step)."""
    beyond, integer, frac = r.blocks[0], r.blocks[1], r.blocks[2:]
    if integer:
        to_beyond = frozenset(x for x in integer if r.h_of(x) == model_z.cmax[x])
        stay = integer - to_beyond
        new_frac = ((stay,) if stay else ()) + frac
        return Region(r.loc, r.h, (beyond | to_beyond, frozenset()) + new_frac), False
    top = frac[-1]
    if TICK_CLOCK in top:
        new_h = tuple((x, v + 1) if x in top and x != TICK_CLOCK else (x, v)
                      for x, v in r.h)
        return Region(r.loc, new_h, (beyond, top) + frac[:-1]), True
    new_h = tuple((x, v + 1) if x in top else (x, v) for x, v in r.h)
    return Region(r.loc, new_h, (beyond, top) + frac[:-1]), False


def wrapped_chain(model_z, r0: Region):
    """Positions of the tick encoding: (region, crossed) pairs along the
    wrapped flow, each listed at its first occurrence. `crossed` is sticky —
    it records whether z wrapped at least once since the delay started —
    so the sequence eventually cycles and enumeration stops there."""
    out = []
    seen = set()
    cur, crossed = r0, False
    while True:
        key = (_region_key(cur), crossed)
        if key in seen:
            return out
        seen.add(key)
        out.append(((cur, crossed), cur))
        cur, just = tick_step(model_z, cur)
        crossed = crossed or just


class TickEncoding:
    """States are TickRegions over C ∪ {z}; delay targets are (region,
    crossed) pairs on the wrapped chain."""

    name = "tick"

    def __init__(self, model):
        self.base_model = model
        self.model = extend_with_tick_clock(model)

    def initial_states(self, full=False):
        out = []
        flags = [(False, False)] if not full else [(a, b) for a in (False, True) for b in (False, True)]
        for r in enumerate_regions(self.model):
            if not (r.is_integer(TICK_CLOCK) and r.h_of(TICK_CLOCK) == 0):
                continue
            for tick, bl1 in flags:
                out.append(TickRegion(r, tick, bl1))
        return out

    def positions(self, region: Region):
        return wrapped_chain(self.model, region)

    def successor(self, state, handle, action, winner, tie, same):
        target, crossed = handle
        base = _apply_action(self.model, target, action)
        return TickRegion(base, crossed, blame1(winner, tie, same))

    def atoms(self):
        return ("Y", "bl1", "tick")

    def label_atoms(self, state, safeY):
        atoms = set()
        if state.loc in safeY:
            atoms.add("Y")
        if state.bl1:
            atoms.add("bl1")
        if state.tick:
            atoms.add("tick")
        return atoms


# ---------------------------------------------------------------------------
# Game construction
# ---------------------------------------------------------------------------

class FiniteConcurrentGame:
    """states, per-state move sets, and δ^F. Moves are tuples:
    m₁ = (chain index, target handle, action or None), m₂ additionally
    carries the scheduler index i."""

    def __init__(self, model, adapter, full=False):
        self.model = model
        self.adapter = adapter
        self.encoding = adapter.name
        self._region_cache = {}
        self._delta_cache = {}
        self._succ_cache = {}
        self.states = []
        self.gamma1 = {}
        self.gamma2 = {}
        self.full = full
        self._build(full)

    def _region_info(self, region: Region):
        key = _region_key(region)
        info = self._region_cache.get(key)
        if info is not None:
            return info
        model = self.adapter.model
        inv = model.invariant(region.loc)
        trivial_inv = isinstance(inv, TrueConstraint)
        info = []
        for k, (handle, reg) in enumerate(self.adapter.positions(region)):
            if not trivial_inv and not eval_constraint(inv, sample(model, reg)):
                break  # invariant must hold along the whole delay prefix
            acts1 = tuple(
                a for a in model.actions1
                if any(discrete_successor(model, reg, e) is not None
                       for e in model.edges_for(region.loc, a))
            )
            acts2 = tuple(
                a for a in model.actions2
                if any(discrete_successor(model, reg, e) is not None
                       for e in model.edges_for(region.loc, a))
            )
            info.append((k, handle, acts1, acts2))
        self._region_cache[key] = info
        return info

    def moves1(self, state):
        return self.gamma1[state]

    def moves2(self, state):
        return self.gamma2[state]

    def _move_sets(self, state):
        info = self._region_info(state.region)
        m1, m2 = [], []
        for k, handle, acts1, acts2 in info:
            m1.append((k, handle, None))
            m1.extend((k, handle, a) for a in acts1)
            for i in (1, 2):
                m2.append((k, handle, None, i))
                m2.extend((k, handle, a, i) for a in acts2)
        return tuple(m1), tuple(m2)

    def delta(self, state, m1, m2):
        key = (state, m1, m2)
        out = self._delta_cache.get(key)
        if out is not None:
            return out
        k1, t1, a1 = m1
        k2, t2, a2, i = m2
        if k1 < k2:
            succ = self._succ(state, t1, a1, 1, False, False)
        elif k2 < k1:
            succ = self._succ(state, t2, a2, 2, False, False)
        else:
            # Same chain position: the scheduler bit carried by player 2's
            # move picks whose action fires, and blame follows that pick.
            # Concrete rounds where both moves coincide (equal delay, same
            # outcome) always charge player 1 and are routed to i=1, so the
            # i=2 branch stands only for strict undercuts and diverging
            # simultaneous moves -- both leave player 1 blameless.
            if i == 1:
                succ = self._succ(state, t1, a1, 1, True, True)
            else:
                succ = self._succ(state, t2, a2, 2, True, False)
        self._delta_cache[key] = succ
        return succ

    def _succ(self, state, t, a, who, tie, same):
        # Many move pairs share one executed outcome; cache per outcome.
        key = (state, t, a, who, tie, same)
        out = self._succ_cache.get(key)
        if out is None:
            out = self._succ_cache[key] = self.adapter.successor(
                state, t, a, who, tie, same)
        return out

    def _build(self, full):
        seeds = self.adapter.initial_states(full)
        seen = set(seeds)
        work = list(seeds)
        while work:
            state = work.pop()
            m1s, m2s = self._move_sets(state)
            self.gamma1[state] = m1s
            self.gamma2[state] = m2s
            for m1 in m1s:
                for m2 in m2s:
                    succ = self.delta(state, m1, m2)
                    if succ not in seen:
                        seen.add(succ)
                        work.append(succ)
        self.states = sorted(seen, key=state_key)

    def successors(self, state, m1):
        """Deduplicated δ^F outcomes of m₁ against every player-2 move."""
        out = set()
        for m2 in self.gamma2[state]:
            out.add(self.delta(state, m1, m2))
        return out


def build_finite_game(model, encoding="predicates", full=False) -> FiniteConcurrentGame:
    if encoding == "predicates":
        adapter = PredicatesEncoding(model)
    elif encoding == "tick":
        adapter = TickEncoding(model)
    else:
        raise ModelError(f"unknown encoding {encoding!r}")
    return FiniteConcurrentGame(model, adapter, full=full)


def cpre1(game: FiniteConcurrentGame, Z) -> set:
    """{s | ∃m₁ ∀m₂: δ^F(s,m₁,m₂) ∈ Z}."""
    Z = set(Z)
    out = set()
    for s in game.states:
        for m1 in game.gamma1[s]:
            if all(game.delta(s, m1, m2) in Z for m2 in game.gamma2[s]):
                out.add(s)
                break
    return out


def safety_fixpoint(game: FiniteConcurrentGame, safeY) -> set:
    """νZ.(Y ∩ CPre₁(Z)): the states from which player 1 surely stays in Y."""
    Z = {s for s in game.states if s.loc in safeY}
    while True:
        nxt = {s for s in cpre1(game, Z) if s.loc in safeY}
        if nxt == Z:
            return Z
        Z = nxt


# ---------------------------------------------------------------------------
# Turn arena
# ---------------------------------------------------------------------------

@dataclass
class TurnArena:
    ap: tuple              # atomic proposition names; labels are bitmasks
    owner: list            # 1 or 2 per node
    succ: list             # sorted successor index lists
    labels: list           # int bitmask per node
    observable: list       # True at game-state nodes
    info: list             # state, or (state, m1) at player-2 nodes
    state_node: dict       # state -> its player-1 node index

    @property
    def n(self):
        return len(self.owner)

    def label_set(self, v):
        return {a for i, a in enumerate(self.ap) if self.labels[v] >> i & 1}

    def predecessors(self):
        pred = [[] for _ in range(self.n)]
        for v, ws in enumerate(self.succ):
            for w in ws:
                pred[w].append(v)
        return pred


def _arena_from(game, safeY, keep_states, keep_move):
    adapter = game.adapter
    ap = adapter.atoms()
    ap_index = {a: i for i, a in enumerate(ap)}
    states = [s for s in game.states if keep_states(s)]
    owner, succ, labels, observable, info = [], [], [], [], []
    state_node = {}
    node_entries = []
    for s in states:
        mask = 0
        for a in adapter.label_atoms(s, safeY):
            mask |= 1 << ap_index[a]
        state_node[s] = len(node_entries)
        node_entries.append((1, s, mask, True))
        for m1 in game.gamma1[s]:
            if keep_move(s, m1):
                node_entries.append((2, (s, m1), mask, False))
    for own, inf, mask, obs in node_entries:
        owner.append(own)
        labels.append(mask)
        observable.append(obs)
        info.append(inf)
        succ.append([])
    for v, (own, inf, _, _) in enumerate(node_entries):
        if own == 1:
            s = inf
            outs = [v + 1 + j for j, m1 in enumerate(
                [m for m in game.gamma1[s] if keep_move(s, m)])]
        else:
            s, m1 = inf
            outs = sorted({state_node[t] for t in game.successors(s, m1)})
        if not outs:
            raise ModelError("turn arena node without successors (internal)")
        succ[v] = outs
    return TurnArena(ap, owner, succ, labels, observable, info, state_node)


def to_turn_arena(game: FiniteConcurrentGame, safeY) -> TurnArena:
    """∃m₁∀m₂ as player-1-then-player-2 alternation over all states; node
    count is Σ_states (1 + |Γ₁^F|). Player-2 nodes copy their state's label."""
    return _arena_from(game, safeY, lambda s: True, lambda s, m1: True)


def safe_restricted_arena(game: FiniteConcurrentGame, safeY):
    """The arena of the νZ.(Y ∩ CPre₁(Z)) winning part, keeping only player-1
    moves whose every outcome stays inside it. Every play in this arena
    satisfies □Y, so a prefix-independent objective can be solved on it
    directly; conversely any strategy winning □Y ∧ objective can never afford
    a move with an outcome outside the fixpoint (player 2 would force ¬Y)."""
    W = safety_fixpoint(game, safeY)
    arena = _arena_from(
        game, safeY,
        lambda s: s in W,
        lambda s, m1: all(t in W for t in game.successors(s, m1)),
    )
    return arena, W


def arena_safety_winning(arena: TurnArena, good) -> set:
    """Greatest fixpoint of 'stay in good' on the turn arena (test utility;
    good is a node predicate)."""
    alive = {v for v in range(arena.n) if good(v)}
    while True:
        nxt = set()
        for v in alive:
            outs = [w for w in arena.succ[v] if w in alive]
            if arena.owner[v] == 1:
                if outs:
                    nxt.add(v)
            else:
                if len(outs) == len(arena.succ[v]) and arena.succ[v]:
                    nxt.add(v)
        if nxt == alive:
            return alive
        alive = nxt
