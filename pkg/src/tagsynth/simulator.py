"""Concrete-semantics play of a timed game under a region controller.

The simulator runs the real (dense-time, exact-rational) game: both players
submit timed moves each round, the shorter delay wins (ties go to a
scheduler choice), and the framework validates every move against the rules
— invariant along the whole delay including the transition point, guard at
the transition point, target invariant after the reset — raising
RuleViolation naming the offender otherwise. Blame and the observation
predicates are updated exactly as in the region abstraction, which lets an
optional cross-check compare every concrete round against the finite game's
transition function.

A run PASSes if it stays in the safe set and is not a zeno trap for player
1: either total elapsed time reaches the threshold, or the trailing rounds
form a long enough blame-free suffix (player 1 kept proposing, player 2 kept
preempting — time converging then is the environment's fault).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction

from .enlarged import EnlargedRegion, initial_predicates, update_predicates
from .errors import AbstractionError, ModelError, RuleViolation
from .finite_game import build_finite_game
from .gamespec import preds_token, region_token
from .model import BOT2, Move, Stutter, apply_reset, eval_constraint, holds_throughout
from .regions import delay_intervals, region_of
from .synthesis import concretize


@dataclass
class PlayState:
    loc: str
    kappa: dict
    preds: object
    elapsed: Fraction


@dataclass
class Verdict:
    passed: bool
    reason: str
    elapsed: Fraction
    rounds: int
    blameless_suffix: int


def initial_play(model, loc=None, kappa=None) -> PlayState:
    if loc is None:
        loc = model.initial_location
    if loc is None:
        raise ModelError("model declares no initial location")
    if kappa is None:
        kappa = model.zero_valuation()
    model.check_state(loc, dict(kappa))
    return PlayState(loc, dict(kappa), initial_predicates(), Fraction(0))


def validate_move(model, player, loc, kappa, move: Move):
    """None if the move is legal for `player` at (loc, κ), else the reason."""
    act = move.action
    if isinstance(act, Stutter):
        if act.player != player:
            return f"player {player} used the other player's stutter"
        if not holds_throughout(model.invariant(loc), kappa, move.delay):
            return f"invariant of {loc} breaks during the delay"
        return None
    if act not in (model.actions1 if player == 1 else model.actions2):
        return f"action {act!r} is not a player-{player} action"
    if not holds_throughout(model.invariant(loc), kappa, move.delay):
        return f"invariant of {loc} breaks during the delay"
    prime = {x: v + move.delay for x, v in kappa.items()}
    for edge in model.edges_for(loc, act):
        if eval_constraint(edge.guard, prime):
            after = apply_reset(prime, edge.reset)
            if eval_constraint(model.invariant(edge.target), after):
                return None
            return (f"invariant of {edge.target} fails after taking "
                    f"{act} (post-reset)")
    return f"no {act}-edge from {loc} is enabled at the transition point"


def _outcome(model, loc, kappa, move: Move):
    """(location, valuation) the move maps the state to, assuming legality."""
    prime = {x: v + move.delay for x, v in kappa.items()}
    if isinstance(move.action, Stutter):
        return loc, prime
    for edge in model.edges_for(loc, move.action):
        if eval_constraint(edge.guard, prime):
            after = apply_reset(prime, edge.reset)
            if eval_constraint(model.invariant(edge.target), after):
                return edge.target, after
    raise ModelError("outcome requested for an illegal move (internal)")


def step(model, play: PlayState, m1: Move, m2: Move, tie_choice=2):
    """One joint round. Returns (next play state, winner, blamed1)."""
    reason = validate_move(model, 1, play.loc, play.kappa, m1)
    if reason is not None:
        raise RuleViolation(1, reason)
    reason = validate_move(model, 2, play.loc, play.kappa, m2)
    if reason is not None:
        raise RuleViolation(2, reason)
    d1, d2 = m1.delay, m2.delay
    tie = d1 == d2
    if tie:
        winner = tie_choice
        out1 = _outcome(model, play.loc, play.kappa, m1)
        out2 = _outcome(model, play.loc, play.kappa, m2)
        same = out1 == out2
        chosen = out1 if winner == 1 else out2
    else:
        winner = 1 if d1 < d2 else 2
        same = False
        chosen = _outcome(model, play.loc, play.kappa, m1 if winner == 1 else m2)
    move = m1 if winner == 1 else m2
    preds = update_predicates(model, play.loc, play.kappa, move,
                              winner, tie, same)
    nxt = PlayState(chosen[0], chosen[1], preds, play.elapsed + min(d1, d2))
    return nxt, winner, preds.bl1


# ---------------------------------------------------------------------------
# Adversaries: callables (model, play, rng) -> Move
# ---------------------------------------------------------------------------

def _interior_point(interval, rng):
    lo, hi, lo_open, hi_open = interval
    if lo == hi and hi is not None:
        return lo
    if hi is None:
        return lo + Fraction(rng.randrange(1, 65), 16)
    return lo + (hi - lo) * Fraction(rng.randrange(1, 16), 16)


def _available_actions2(model, loc, prime):
    out = []
    for a in sorted(model.actions2):
        for edge in model.edges_for(loc, a):
            if eval_constraint(edge.guard, prime):
                after = apply_reset(prime, edge.reset)
                if eval_constraint(model.invariant(edge.target), after):
                    out.append(a)
                break
    return out


def random_adversary(model, play, rng):
    """Uniform-ish legal move: random delay region, random interior rational
    delay, then a random available player-2 action or the stutter."""
    intervals = delay_intervals(model, play.loc, play.kappa)
    inv = model.invariant(play.loc)
    for _ in range(8):
        _, interval = intervals[rng.randrange(len(intervals))]
        d = _interior_point(interval, rng)
        if not holds_throughout(inv, play.kappa, d):
            continue
        prime = {x: v + d for x, v in play.kappa.items()}
        acts = [None] + _available_actions2(model, play.loc, prime)
        a = acts[rng.randrange(len(acts))]
        return Move(d, BOT2 if a is None else a)
    return Move(Fraction(0), BOT2)


class ZenoAttacker:
    """Tries to trap the controller in a time-convergent play: delays shrink
    geometrically with repeat visits to the current region, and among the
    affordable moves it prefers destinations where every clock is below 1 or
    already beyond its constant — the shapes a convergent play gets stuck
    in. Falls back to a zero-delay stutter, which is always legal."""

    def __init__(self):
        self.visits = {}
        self._move_cache = {}

    def __call__(self, model, play, rng):
        r = region_of(model, play.loc, play.kappa)
        v = self.visits.get(r, 0)
        self.visits[r] = v + 1
        cap = Fraction(1, 2 ** min(v + 1, 64))
        key = (play.loc, tuple(sorted(play.kappa.items())), cap)
        hit = self._move_cache.get(key)
        if hit is not None:
            return hit
        move = self._choose(model, play, cap)
        self._move_cache[key] = move
        return move

    def _choose(self, model, play, cap):
        inv = model.invariant(play.loc)
        options = []
        for reg, interval in delay_intervals(model, play.loc, play.kappa):
            clipped = self._clip(interval, cap)
            if clipped is None:
                continue
            d = self._point(clipped)
            if not holds_throughout(inv, play.kappa, d):
                continue
            prime = {x: v2 + d for x, v2 in play.kappa.items()}
            dests = [(None, reg)]
            for a in _available_actions2(model, play.loc, prime):
                for edge in model.edges_for(play.loc, a):
                    if eval_constraint(edge.guard, prime):
                        after = apply_reset(prime, edge.reset)
                        dests.append((a, region_of(model, edge.target, after)))
                        break
            for a, dest in dests:
                small = all(dest.is_beyond(x) or dest.h_of(x) == 0
                            for x in model.clocks)
                options.append((not small, d, a is not None, a or "", d, a))
        if not options:
            return Move(Fraction(0), BOT2)
        *_, d, a = min(options)
        return Move(d, BOT2 if a is None else a)

    @staticmethod
    def _clip(interval, cap):
        lo, hi, lo_open, hi_open = interval
        if lo >= cap:
            return None
        if lo == hi and hi is not None:
            return (lo, lo)
        hi2 = cap if hi is None else min(hi, cap)
        if lo >= hi2:
            return None
        return (lo, hi2)

    @staticmethod
    def _point(clipped):
        lo, hi = clipped
        return lo if lo == hi else (lo + hi) / 2


class ScriptedAdversary:
    """Plays a fixed list of moves, then zero-delay stutters."""

    def __init__(self, moves):
        self.moves = list(moves)
        self.i = 0

    def __call__(self, model, play, rng):
        if self.i < len(self.moves):
            m = self.moves[self.i]
            self.i += 1
            return m
        return Move(Fraction(0), BOT2)


def parse_script(text) -> list:
    """JSON array of {"delay": "p/q", "action": name or null} into moves."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"bad adversary script: {exc}") from None
    if not isinstance(raw, list):
        raise ModelError("adversary script must be a JSON array of moves")
    moves = []
    for i, item in enumerate(raw):
        try:
            delay = Fraction(item["delay"])
            action = item.get("action")
        except (TypeError, KeyError, ValueError) as exc:
            raise ModelError(f"bad move #{i} in adversary script: {exc}") from None
        moves.append(Move(delay, BOT2 if action is None else action))
    return moves


class InteractiveAdversary:
    """Prompts on stdin for 'DELAY [ACTION]'; blank line = stutter now."""

    def __call__(self, model, play, rng):
        while True:
            clocks = ", ".join(f"{x}={play.kappa[x]}" for x in sorted(play.kappa))
            print(f"[{play.loc} | {clocks} | {preds_token(play.preds)} | "
                  f"elapsed {play.elapsed}]")
            line = input("player-2 move (DELAY [ACTION]): ").strip()
            if not line:
                return Move(Fraction(0), BOT2)
            parts = line.split()
            try:
                delay = Fraction(parts[0])
            except (ValueError, ZeroDivisionError):
                print(f"cannot read {parts[0]!r} as a rational delay")
                continue
            action = parts[1] if len(parts) > 1 else None
            move = Move(delay, BOT2 if action is None else action)
            reason = validate_move(model, 2, play.loc, play.kappa, move)
            if reason is not None:
                print(f"illegal: {reason}")
                continue
            return move


def make_adversary(name, script=None):
    if name == "random":
        return random_adversary
    if name == "zeno":
        return ZenoAttacker()
    if name == "scripted":
        return ScriptedAdversary(script or [])
    if name == "interactive":
        return InteractiveAdversary()
    raise ModelError(f"unknown adversary {name!r}")


# ---------------------------------------------------------------------------
# The runner
# ---------------------------------------------------------------------------

def _frac(f) -> str:
    return f"{f.numerator}/{f.denominator}"


def _move_record(m: Move):
    return {"delay": _frac(m.delay), "action": str(m.action)}


def _check_region_faithful(game, prev: PlayState, m1, m2, nxt: PlayState):
    """The concrete round must match δ^F on the abstraction of its inputs.

    The scheduler bit is recovered from the round itself: i=1 when player 1
    moved strictly first or the executed outcome equals player 1's outcome
    on an exact tie, i=2 otherwise.  That is the convention under which the
    region game's blame flag reproduces the concrete one.
    """
    model = game.model
    src = EnlargedRegion(region_of(model, prev.loc, prev.kappa), prev.preds)
    positions = [h for h, _ in game.adapter.positions(src.region)]

    def abstract(move, player):
        target = region_of(model, prev.loc,
                           {x: v + move.delay for x, v in prev.kappa.items()})
        try:
            k = positions.index(target)
        except ValueError:
            raise AbstractionError("delay target off the region chain") from None
        action = None if isinstance(move.action, Stutter) else move.action
        return (k, target, action)

    if m1.delay < m2.delay:
        i = 1
    elif m2.delay < m1.delay:
        i = 2
    else:
        i = 1 if _outcome(model, prev.loc, prev.kappa, m1) == (nxt.loc,
                                                              nxt.kappa) else 2

    k1, t1, a1 = abstract(m1, 1)
    k2, t2, a2 = abstract(m2, 2)
    abs_succ = game.delta(src, (k1, t1, a1), (k2, t2, a2, i))
    concrete = EnlargedRegion(region_of(model, nxt.loc, nxt.kappa), nxt.preds)
    if abs_succ != concrete:
        raise AbstractionError(
            f"concrete round disagrees with the region game at "
            f"{region_token(src.region)}")


def run(model, Y, ctrl, adversary, rounds=200, seed=0, threshold=None,
        suffix=None, trace_path=None, check_regions=False, tie_choice=2,
        initial_loc=None, initial_kappa=None, keep_records=True):
    """Play `rounds` joint rounds. Returns (records, Verdict); also writes
    the records as JSON lines to trace_path when given. Deterministic for a
    fixed seed: all randomness flows from one seeded generator and all
    arithmetic is exact. keep_records=False skips building the in-memory
    round records (the verdict is unaffected) unless a trace is requested."""
    Y = frozenset(Y)
    rng = random.Random(seed)
    keep_records = keep_records or trace_path is not None
    if threshold is None:
        threshold = Fraction(rounds, 4)
    if suffix is None:
        suffix = max(1, rounds // 4)
    play = initial_play(model, initial_loc, initial_kappa)
    game = build_finite_game(model) if check_regions else None
    records = []
    mem = ctrl.initial_memory
    blameless = 0
    played = 0
    fail_reason = None

    er = EnlargedRegion(region_of(model, play.loc, play.kappa), play.preds)
    if ctrl.lookup(mem, er) is None:
        verdict = Verdict(False, "initial state outside the controller's "
                          "winning set", play.elapsed, 0, 0)
        _write_trace(trace_path, records)
        return records, verdict

    for rnd in range(rounds):
        er = EnlargedRegion(region_of(model, play.loc, play.kappa), play.preds)
        row = ctrl.lookup(mem, er)
        if row is None:
            fail_reason = (f"controller has no prescription at round {rnd} "
                           f"({region_token(er.region)})")
            break
        m1 = concretize(model, ctrl, mem, play.loc, play.kappa, play.preds)
        m2 = adversary(model, play, rng)
        prev = play
        play, winner, bl1 = step(model, play, m1, m2, tie_choice)
        if check_regions:
            _check_region_faithful(game, prev, m1, m2, play)
        if keep_records:
            records.append({
                "round": rnd,
                "location": prev.loc,
                "clocks": {x: _frac(v) for x, v in prev.kappa.items()},
                "region": region_token(er.region),
                "predicates": preds_token(prev.preds),
                "memory": mem,
                "move1": _move_record(m1),
                "move2": _move_record(m2),
                "winner": winner,
                "blamed1": bl1,
                "next_location": play.loc,
                "elapsed": _frac(play.elapsed),
            })
        mem = row.next_mem
        blameless = 0 if bl1 else blameless + 1
        played = rnd + 1
        if play.loc not in Y:
            fail_reason = f"left the safe set at round {rnd} ({play.loc})"
            break

    if fail_reason is not None:
        verdict = Verdict(False, fail_reason, play.elapsed, played, blameless)
    elif play.elapsed >= threshold:
        verdict = Verdict(True, f"time diverged: elapsed {play.elapsed} >= "
                          f"{threshold}", play.elapsed, played, blameless)
    elif blameless >= suffix:
        verdict = Verdict(True, f"blame-free suffix of {blameless} rounds "
                          f"(time convergence is the environment's doing)",
                          play.elapsed, played, blameless)
    else:
        verdict = Verdict(False, f"zeno trap: elapsed {play.elapsed} < "
                          f"{threshold} with blame-free suffix "
                          f"{blameless} < {suffix}", play.elapsed, played,
                          blameless)
    _write_trace(trace_path, records)
    return records, verdict


def _write_trace(trace_path, records):
    if trace_path is None:
        return
    with open(trace_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
