"""Top-level synthesis pipeline.

From a model and a safe location set Y this module computes the player-1
sure-winning enlarged regions for "stay in Y with a receptive strategy" and
extracts a finite-memory region controller. The safety part is handled
structurally (the turn arena is restricted to the greatest fixpoint of
Y-constrained controllable predecessors), the receptiveness part is one of
three interchangeable objectives solved as a Muller game; their winning
base-region sets provably coincide, which the cross-validation mode checks.

Winning sets are reported over base regions at the all-false predicate
initialization; the tick encoding reports the projection of its winning
states with z = 0 and both flags false, with z dropped from the region.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .controller import Controller, Prescription, observation_key
from .enlarged import EnlargedRegion, TICK_CLOCK, initial_predicates
from .errors import CapacityError, ModelError
from .finite_game import build_finite_game, safe_restricted_arena
from .model import BOT1, Move, TimedGameModel
from .muller import _proper_subclosures, _sccs, reachable_lassos, solve_muller
from .objectives import (build_phi_dagger, build_phi_star,
                         build_tick_objective, formula_to_muller)
from .regions import Region, _sort_key, delay_intervals, interval_point, region_of
from .zielonka import build_zielonka

_TREE_CACHE = {}


def _tree_for(condition):
    """Zielonka trees depend only on the formula skeleton over the derived
    atoms, so one tree serves every model with the same clock count."""
    key = (str(condition.skeleton), condition.positive)
    tree = _TREE_CACHE.get(key)
    if tree is None:
        tree = _TREE_CACHE[key] = build_zielonka(condition)
    return tree


OBJECTIVES = ("phi-dagger", "phi-star", "tick")


def objective_formula(objective, clocks, literal_as_printed=False):
    if objective == "phi-dagger":
        return build_phi_dagger(clocks)
    if objective == "phi-star":
        return build_phi_star(clocks, literal_as_printed)
    if objective == "tick":
        return build_tick_objective()
    raise ModelError(f"unknown objective {objective!r} (expected one of {OBJECTIVES})")


@dataclass
class WinningCertificate:
    encoding: str
    winning: frozenset      # winning abstract states of the solved encoding
    winning_regions: tuple  # base regions at all-false initialization, sorted
    arena_nodes: int
    m_f: int
    per_encoding: dict = None  # encoding -> frozenset of base regions


def _drop_tick_clock(r: Region) -> Region:
    h = tuple((x, v) for x, v in r.h if x != TICK_CLOCK)
    blocks = tuple(frozenset(b) - {TICK_CLOCK} for b in r.blocks)
    return Region(r.loc, h, blocks)


def base_projection(win_states, encoding):
    """Winning base regions at the all-false initialization."""
    out = set()
    if encoding == "tick":
        for s in win_states:
            r = s.region
            if (not s.tick and not s.bl1
                    and r.is_integer(TICK_CLOCK) and r.h_of(TICK_CLOCK) == 0):
                out.add(_drop_tick_clock(r))
    else:
        init = initial_predicates()
        for s in win_states:
            if s.preds == init:
                out.add(s.region)
    return out


def _pipeline(model, Y, objective, literal_as_printed=False):
    Y = frozenset(Y)
    unknown = Y - set(model.locations)
    if unknown:
        raise ModelError(f"safe set names unknown locations {sorted(unknown)}")
    game = build_finite_game(model, "tick" if objective == "tick" else "predicates")
    arena, W = safe_restricted_arena(game, Y)
    formula = objective_formula(objective, model.clocks, literal_as_printed)
    condition = formula_to_muller(formula)
    tree = _tree_for(condition)
    win_nodes, strat = solve_muller(arena, condition, tree)
    win_states = frozenset(arena.info[v] for v in win_nodes if arena.observable[v])
    cert = WinningCertificate(
        encoding=objective,
        winning=win_states,
        winning_regions=tuple(sorted(base_projection(win_states, objective),
                                     key=_sort_key)),
        arena_nodes=arena.n,
        m_f=tree.m_f,
    )
    return game, arena, condition, tree, win_nodes, strat, cert


def sure_safe(model: TimedGameModel, Y, encoding="phi-dagger",
              literal_as_printed=False) -> WinningCertificate:
    """The player-1 sure-winning enlarged-region set for □Y under a
    receptive strategy, via the selected objective encoding."""
    return _pipeline(model, Y, encoding, literal_as_printed)[6]


def cross_validate(model, Y) -> dict:
    """Winning base-region sets of all three encodings (they must agree)."""
    return {enc: frozenset(sure_safe(model, Y, enc).winning_regions)
            for enc in OBJECTIVES}


def synthesize(model: TimedGameModel, Y, objective="phi-dagger", name=None,
               do_cross_validate=False):
    """Returns (controller or None, certificate). None means the winning set
    is empty — a distinct negative result, not an error."""
    if objective == "tick":
        raise ModelError("the tick encoding certifies winning regions but "
                         "exports no controller; synthesize with phi-dagger "
                         "or phi-star")
    game, arena, condition, tree, win_nodes, strat, cert = _pipeline(
        model, Y, objective)
    if do_cross_validate:
        cert.per_encoding = cross_validate(model, Y)
    if not cert.winning:
        return None, cert

    init = initial_predicates()
    starts = sorted(
        (v for v in win_nodes
         if arena.observable[v] and arena.info[v].preds == init),
    )
    observations = sorted({arena.info[v] for v in win_nodes if arena.observable[v]},
                          key=observation_key)
    obs_idx = {observation_key(o): i for i, o in enumerate(observations)}
    memmap = {0: 0}
    rows = {}
    seen = set()
    queue = [(0, v) for v in starts]
    for item in queue:
        seen.add(item)
    qi = 0
    while qi < len(queue):
        mem, v = queue[qi]
        qi += 1
        state = arena.info[v]
        mem2 = strat.update(mem, v)
        w = strat.move(mem2, v)
        _, m1 = arena.info[w]
        k, handle, action = m1
        if mem2 not in memmap:
            memmap[mem2] = len(memmap)
        rows[(memmap[mem], obs_idx[observation_key(state)])] = Prescription(
            memmap[mem2], handle, action)
        for u in arena.succ[w]:
            nxt = (strat.update(mem2, w), u)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)

    used = {oi for (_, oi) in rows}
    kept = [i for i in range(len(observations)) if i in used]
    remap = {i: j for j, i in enumerate(kept)}
    ctrl = Controller(
        name=name or f"{model.name}.{objective}",
        objective=objective,
        policy="region-midpoint",
        memory_states=len(memmap),
        observations=tuple(observations[i] for i in kept),
        rows={(m, remap[oi]): row for (m, oi), row in rows.items()},
        initial_memory=0,
    )
    return ctrl, cert


# ---------------------------------------------------------------------------
# Controller checking and enumeration
# ---------------------------------------------------------------------------

def _controller_move(game, state, row):
    """The finite-game move a prescription denotes, validated against Γ₁."""
    positions = game.adapter.positions(state.region)
    k = None
    for i, (handle, _) in enumerate(positions):
        if handle == row.target:
            k = i
            break
    if k is None:
        return None
    m1 = (k, row.target, row.action)
    return m1 if m1 in game.moves1(state) else None


def check_controller_universal(model, Y, ctrl: Controller, starts,
                               objective="phi-dagger", game=None):
    """Exhaustive product-lasso check: does the controller keep every
    consistent play from `starts` (enlarged regions, memory 0) inside Y with
    an accepted closure? Returns (True, None) or (False, reason)."""
    if game is None:
        game = build_finite_game(model)
    condition = formula_to_muller(objective_formula(objective, model.clocks))
    index = {}
    succ = []
    letters = []
    infos = []

    def add(mem, s):
        key = (mem, s)
        i = index.get(key)
        if i is None:
            i = index[key] = len(infos)
            infos.append(key)
            succ.append(None)
            letters.append(condition.derived_letter(
                game.adapter.label_atoms(s, Y)))
        return i

    start_idx = [add(ctrl.initial_memory, s) for s in starts]
    qi = 0
    while qi < len(infos):
        mem, s = infos[qi]
        i = index[(mem, s)]
        qi += 1
        if succ[i] is not None:
            continue
        if s.loc not in Y:
            return False, f"reachable unsafe state in {s.loc}"
        row = ctrl.lookup(mem, s)
        if row is None:
            return False, f"no prescription at memory {mem} for {s.loc}"
        m1 = _controller_move(game, s, row)
        if m1 is None:
            return False, f"prescribed move unavailable at {s.loc}"
        succ[i] = sorted({add(row.next_mem, game.delta(s, m1, m2))
                          for m2 in game.moves2(s)})
    for i in range(len(infos)):
        if succ[i] is None:
            succ[i] = []
    for b in sorted(reachable_lassos(succ, letters, start_idx, condition.k)):
        if not condition.accepts(*b):
            return False, f"rejected recurrence closure {b}"
    return True, None


def enumerate_memoryless_region_strategies(model, Y, scope=None, cap=100000):
    """Every single-memory mapping from reachable enlarged regions (optionally
    restricted to base regions in `scope`) to available moves, as Controller
    objects. The candidate count is the product of the choice-set sizes;
    above `cap` a CapacityError is raised."""
    game = build_finite_game(model)
    states = [s for s in game.states
              if scope is None or s.region in scope]
    states.sort(key=observation_key)
    total = 1
    for s in states:
        total *= len(game.moves1(s))
        if total > cap:
            raise CapacityError(
                f"memoryless candidate space exceeds cap ({cap})")

    observations = tuple(states)

    def rec(i, rows):
        if i == len(states):
            yield Controller(
                name=f"{model.name}.memoryless",
                objective="phi-dagger",
                policy="region-midpoint",
                memory_states=1,
                observations=observations,
                rows=dict(rows),
                initial_memory=0,
            )
            return
        for (k, handle, action) in game.moves1(states[i]):
            rows[(0, i)] = Prescription(0, handle, action)
            yield from rec(i + 1, rows)
        del rows[(0, i)]

    yield from rec(0, {})


def _first_rejected_closure(succ, letters, k, accepts):
    """First rejected (pos, neg) closure realizable as a cycle in the graph,
    returned together with the node set of a witness cycle (an SCC of the
    letters-restricted subgraph whose literal union is that closure), or
    None. Same closure enumeration as reachable_lassos, stopped early."""
    full = (1 << k) - 1
    todo = [(full, full)]
    seen_b = set()
    while todo:
        b = todo.pop()
        if b in seen_b:
            continue
        seen_b.add(b)
        keep = [v for v in range(len(succ))
                if letters[v] & ~b[0] == 0 and (~letters[v] & full) & ~b[1] == 0]
        if not keep:
            continue
        sub_index = {v: i for i, v in enumerate(keep)}
        sub_succ = [[sub_index[w] for w in succ[v] if w in sub_index]
                    for v in keep]
        for comp in _sccs(sub_succ):
            if len(comp) == 1 and comp[0] not in sub_succ[comp[0]]:
                continue
            pos = neg = 0
            for i in comp:
                w = letters[keep[i]]
                pos |= w
                neg |= ~w & full
            if not accepts(pos, neg):
                return (pos, neg), {keep[i] for i in comp}
            for sub in _proper_subclosures((pos, neg)):
                if sub not in seen_b:
                    todo.append(sub)
    return None


def no_memoryless_region_winner(model, Y, starts, objective="phi-dagger"):
    """Exhaustive search over memoryless region strategies, assigning moves
    only at observations actually reached. Returns (True, None) if no
    candidate wins, else (False, winning Controller).

    The search is depth-first with conflict-directed backjumping. A losing
    evaluation reports the conflict set: the assignments on a rejected cycle
    plus those on a path reaching it (or reaching an unsafe state). Any
    reassignment of observations outside the conflict set leaves that same
    rejected closure reachable, so when a level's observation is absent from
    the conflict its remaining alternatives are skipped; the skip discards
    only candidates that provably lose, keeping the search exhaustive."""
    game = build_finite_game(model)
    condition = formula_to_muller(objective_formula(objective, model.clocks))
    starts = sorted(set(starts), key=observation_key)
    letter_cache = {}

    def letter(s):
        w = letter_cache.get(s)
        if w is None:
            w = letter_cache[s] = condition.derived_letter(
                game.adapter.label_atoms(s, Y))
        return w

    def evaluate(assign):
        """BFS under the partial assignment. Returns ("open", frontier),
        ("win", None), or ("lose", conflict observation set)."""
        order = list(starts)
        nidx = {s: i for i, s in enumerate(order)}
        parent = {s: None for s in starts}
        succ = [None] * len(order)
        frontier = []
        qi = 0
        while qi < len(order):
            s = order[qi]
            qi += 1
            if s.loc not in Y:
                conf = set()
                p = parent[s]
                while p is not None:
                    conf.add(p)
                    p = parent[p]
                return "lose", conf
            m1 = assign.get(s)
            if m1 is None:
                frontier.append(s)
                succ[nidx[s]] = []
                continue
            outs = sorted({game.delta(s, m1, m2) for m2 in game.moves2(s)},
                          key=observation_key)
            row = []
            for t in outs:
                if t not in nidx:
                    nidx[t] = len(order)
                    order.append(t)
                    parent[t] = s
                    succ.append(None)
                row.append(nidx[t])
            succ[nidx[s]] = row
        letters = [letter(s) for s in order]
        hit = _first_rejected_closure(succ, letters, condition.k,
                                      condition.accepts)
        if hit is not None:
            _, comp = hit
            conf = {order[i] for i in comp}
            p = order[min(comp)]
            while p is not None:
                conf.add(p)
                p = parent[p]
            return "lose", conf & set(assign)
        if frontier:
            return "open", frontier
        return "win", None

    # Depth-first over frontier observations (fewest-moves first), with an
    # explicit stack: one frame per assigned observation holding the not yet
    # tried moves and the union of child conflicts seen so far.
    assign = {}
    stack = []
    winner = None
    unwinding = False
    conflict = None
    while True:
        if not unwinding:
            verdict, payload = evaluate(assign)
            if verdict == "win":
                winner = dict(assign)
                break
            if verdict == "lose":
                conflict = payload
                unwinding = True
                continue
            s = min(payload, key=lambda t: (len(game.moves1(t)),
                                            observation_key(t)))
            moves = iter(game.moves1(s))
            stack.append((s, moves, set()))
            assign[s] = next(moves)
            continue
        if not stack:
            break  # exhausted: no memoryless candidate wins
        s, moves, union = stack[-1]
        del assign[s]
        if s not in conflict:
            stack.pop()  # backjump: siblings of s fail by the same conflict
            continue
        union |= conflict
        m1 = next(moves, None)
        if m1 is None:
            union.discard(s)
            conflict = union
            stack.pop()
            continue
        assign[s] = m1
        unwinding = False
    if winner is None:
        return True, None
    observations = tuple(sorted(winner, key=observation_key))
    rows = {}
    for i, o in enumerate(observations):
        k, handle, action = winner[o]
        rows[(0, i)] = Prescription(0, handle, action)
    return False, Controller(
        name=f"{model.name}.memoryless",
        objective=objective,
        policy="region-midpoint",
        memory_states=1,
        observations=observations,
        rows=rows,
        initial_memory=0,
    )


def controller_from_policy(model, Y, starts, policy, memory_states, name,
                           objective="phi-dagger"):
    """Build a controller table by closing `policy(mem, state) -> (next_mem,
    chain index, action)` over all reachable (memory, state) pairs from the
    given enlarged-region starts. Utility for hand-written strategies."""
    game = build_finite_game(model)
    table = {}
    seen = set()
    queue = [(0, s) for s in sorted(set(starts), key=observation_key)]
    seen.update(queue)
    qi = 0
    while qi < len(queue):
        mem, s = queue[qi]
        qi += 1
        next_mem, k, action = policy(mem, s)
        positions = game.adapter.positions(s.region)
        if not 0 <= k < len(positions):
            raise ModelError(f"policy picked chain index {k} beyond the chain")
        handle = positions[k][0]
        m1 = (k, handle, action)
        if m1 not in game.moves1(s):
            raise ModelError(f"policy move {m1!r} unavailable at {s.loc}")
        table[(mem, s)] = (next_mem, handle, action)
        for m2 in game.moves2(s):
            nxt = (next_mem, game.delta(s, m1, m2))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    observations = tuple(sorted({s for (_, s) in table}, key=observation_key))
    oidx = {observation_key(o): i for i, o in enumerate(observations)}
    rows = {}
    for (mem, s), (next_mem, handle, action) in table.items():
        rows[(mem, oidx[observation_key(s)])] = Prescription(next_mem, handle, action)
    return Controller(
        name=name,
        objective=objective,
        policy="region-midpoint",
        memory_states=memory_states,
        observations=observations,
        rows=rows,
        initial_memory=0,
    )


# ---------------------------------------------------------------------------
# Concretization
# ---------------------------------------------------------------------------

def concretize(model, ctrl: Controller, memory, loc, kappa, preds) -> Move:
    """Turn the prescription at (memory, observed enlarged region) into a
    concrete timed move with region_of(κ+Δ) = the prescribed target:
    (i) in the all-clocks-beyond region: Δ = 3/2 (any Δ > 1 works; fixed for
    determinism); (ii) else, for the first clock y with κ(y) ≤ c_y that can
    end up above 1/2 inside the target's delay interval, the midpoint of
    that clipped interval; (iii) else the interval's canonical point."""
    cache = getattr(ctrl, "_concretize_cache", None)
    if cache is None:
        cache = ctrl._concretize_cache = {}
    key = (memory, loc, tuple(sorted(kappa.items())), preds)
    hit = cache.get(key)
    if hit is not None:
        return hit
    move = _concretize(model, ctrl, memory, loc, kappa, preds)
    cache[key] = move
    return move


def _concretize(model, ctrl, memory, loc, kappa, preds) -> Move:
    region = region_of(model, loc, kappa)
    er = EnlargedRegion(region, preds)
    row = ctrl.lookup(memory, er)
    if row is None:
        raise ModelError(f"controller has no prescription at memory {memory} "
                         f"for region {region!r}")
    action = BOT1 if row.action is None else row.action
    if all(region.is_beyond(x) for x in model.clocks):
        return Move(Fraction(3, 2), action)
    intervals = delay_intervals(model, loc, kappa)
    interval = None
    for reg, iv in intervals:
        if reg == row.target:
            interval = iv
            break
    if interval is None:
        raise ModelError("prescribed target region is not reachable by any "
                         "delay (internal consistency error)")
    lo, hi, lo_open, hi_open = interval
    for y in sorted(model.clocks):
        if kappa[y] > model.cmax[y]:
            continue
        bound = Fraction(1, 2) - kappa[y]  # Δ > bound puts y above 1/2
        if lo == hi and hi is not None:
            if lo > bound:
                return Move(lo, action)
            continue
        lo_eff = max(lo, bound)
        if hi is None:
            return Move(lo_eff + 1, action)
        if lo_eff < hi:
            return Move((lo_eff + hi) / 2, action)
    return Move(interval_point(interval), action)
