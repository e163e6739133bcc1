"""The .tg game-description DSL and the .ctrl controller format.

Game grammar (UTF-8, `#` starts a line comment, whitespace-insensitive):

    game <ident>
    clocks <ident>+
    p1-actions <ident>+
    p2-actions <ident>+
    loc <ident> [initial] inv <constraint>
    edge <ident> -> <ident> : <player>.<action> when <constraint> reset {<ident>*}
    safe <ident>+

    constraint := true | <clock> <= <int> | <int> <= <clock>
                | !( constraint ) | ( constraint & constraint [& ...] )

Locations and edges may interleave; exactly one location carries `initial`.
Integers are decimal and nonnegative. Keywords are reserved words.

Controller files are line-oriented: five `key: value` header lines, then
one `obs <idx> <region> <preds>` line per observation and one
`row <mem> <obsidx> <nextmem> <region> <action>` line per table row, where
a region prints as `loc;x=0,y=1;x|-|y` (integer parts, then the blocks
beyond|integer|fractional... with `-` for an empty block), predicates as
`bl1=0;gt0=x;ge1=;star=` and the stutter action as `_|_1`. Field order is
fixed, so serialization is byte-stable and parse ∘ serialize = identity.
"""

from __future__ import annotations

import re

from .controller import Controller, Prescription
from .enlarged import EnlargedRegion, PredicateState
from .errors import GameSpecError
from .model import (AtomGE, AtomLE, Conj, Edge, Neg, TimedGameModel, TRUE,
                    constraint_clocks)
from .regions import Region

KEYWORDS = {"game", "clocks", "p1-actions", "p2-actions", "loc", "edge",
            "safe", "initial", "inv", "when", "reset", "true"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<kw>p1-actions|p2-actions)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<sym><=|->|[:.{}()&!])
""", re.VERBOSE)


class _Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.value!r} at {self.line}:{self.col}"


def _lex(text):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GameSpecError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind == "kw" or (kind == "ident" and value in KEYWORDS):
                tokens.append(_Token("kw", value, line, col))
            elif kind in ("ident", "int", "sym"):
                tokens.append(_Token(kind, value, line, col))
            col += len(value)
        pos = m.end()
    tokens.append(_Token("eof", "<end of input>", line, col))
    return tokens


class _Parser:
    def __init__(self, text):
        self.toks = _lex(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise GameSpecError(f"{msg}, found {tok.value!r}", tok.line, tok.col)

    def expect_kw(self, word):
        t = self.next()
        if t.kind != "kw" or t.value != word:
            self.fail(f"expected '{word}'", t)
        return t

    def expect_sym(self, sym):
        t = self.next()
        if t.kind != "sym" or t.value != sym:
            self.fail(f"expected '{sym}'", t)
        return t

    def ident(self, what="identifier"):
        t = self.next()
        if t.kind != "ident":
            self.fail(f"expected {what}", t)
        return t

    def ident_list(self, what):
        out = [self.ident(what)]
        while self.peek().kind == "ident":
            out.append(self.next())
        return out

    def integer(self):
        t = self.next()
        if t.kind != "int":
            self.fail("expected integer", t)
        return int(t.value)

    def constraint(self):
        t = self.peek()
        if t.kind == "kw" and t.value == "true":
            self.next()
            return TRUE
        if t.kind == "ident":
            name = self.next()
            self.expect_sym("<=")
            return AtomLE(name.value, self.integer())
        if t.kind == "int":
            d = self.integer()
            self.expect_sym("<=")
            name = self.ident("clock name")
            return AtomGE(d, name.value)
        if t.kind == "sym" and t.value == "!":
            self.next()
            self.expect_sym("(")
            inner = self.constraint()
            self.expect_sym(")")
            return Neg(inner)
        if t.kind == "sym" and t.value == "(":
            self.next()
            left = self.constraint()
            self.expect_sym("&")
            left = Conj(left, self.constraint())
            while self.peek().kind == "sym" and self.peek().value == "&":
                self.next()
                left = Conj(left, self.constraint())
            self.expect_sym(")")
            return left
        self.fail("expected constraint")


def parse_gamespec(text):
    """Parse a .tg document; returns (TimedGameModel, safe location set).
    Syntax errors and undeclared references raise GameSpecError with the
    source position."""
    p = _Parser(text)
    p.expect_kw("game")
    name = p.ident("game name").value
    p.expect_kw("clocks")
    clock_toks = p.ident_list("clock name")
    p.expect_kw("p1-actions")
    a1_toks = p.ident_list("action name")
    p.expect_kw("p2-actions")
    a2_toks = p.ident_list("action name")

    def check_dups(toks, what):
        seen = {}
        for t in toks:
            if t.value in seen:
                raise GameSpecError(f"duplicate {what} {t.value!r}", t.line, t.col)
            seen[t.value] = t

    check_dups(clock_toks, "clock")
    check_dups(a1_toks + a2_toks, "action")
    clocks = tuple(t.value for t in clock_toks)
    actions1 = tuple(t.value for t in a1_toks)
    actions2 = tuple(t.value for t in a2_toks)

    locations = []
    invariants = {}
    initial = None
    edge_specs = []
    while True:
        t = p.peek()
        if t.kind == "kw" and t.value == "loc":
            p.next()
            lt = p.ident("location name")
            if lt.value in invariants:
                raise GameSpecError(f"duplicate location {lt.value!r}", lt.line, lt.col)
            is_initial = False
            if p.peek().kind == "kw" and p.peek().value == "initial":
                p.next()
                is_initial = True
            p.expect_kw("inv")
            inv = p.constraint()
            locations.append(lt.value)
            invariants[lt.value] = inv
            if is_initial:
                if initial is not None:
                    raise GameSpecError("second 'initial' location", lt.line, lt.col)
                initial = lt.value
            _check_clocks(inv, clocks, lt)
        elif t.kind == "kw" and t.value == "edge":
            p.next()
            src = p.ident("location name")
            p.expect_sym("->")
            dst = p.ident("location name")
            p.expect_sym(":")
            player_tok = p.ident("player (p1 or p2)")
            if player_tok.value not in ("p1", "p2"):
                p.fail("expected 'p1' or 'p2'", player_tok)
            p.expect_sym(".")
            action = p.ident("action name")
            p.expect_kw("when")
            guard = p.constraint()
            p.expect_kw("reset")
            p.expect_sym("{")
            resets = []
            while p.peek().kind == "ident":
                resets.append(p.next())
            p.expect_sym("}")
            edge_specs.append((src, dst, player_tok, action, guard, resets))
        else:
            break
    p.expect_kw("safe")
    safe_toks = p.ident_list("location name")
    t = p.next()
    if t.kind != "eof":
        raise GameSpecError(f"unexpected {t.value!r} after 'safe' list", t.line, t.col)

    if not locations:
        raise GameSpecError("no locations declared", 1, 1)
    if initial is None:
        raise GameSpecError("no location marked 'initial'", 1, 1)

    loc_set = set(locations)
    edges = []
    for src, dst, player_tok, action, guard, resets in edge_specs:
        for t in (src, dst):
            if t.value not in loc_set:
                raise GameSpecError(f"undeclared location {t.value!r}", t.line, t.col)
        player = 1 if player_tok.value == "p1" else 2
        declared = actions1 if player == 1 else actions2
        if action.value not in declared:
            raise GameSpecError(
                f"action {action.value!r} not declared for {player_tok.value}",
                action.line, action.col)
        _check_clocks(guard, clocks, src)
        for r in resets:
            if r.value not in clocks:
                raise GameSpecError(f"undeclared clock {r.value!r} in reset",
                                    r.line, r.col)
        edges.append(Edge(src.value, player, action.value, guard, dst.value,
                          frozenset(r.value for r in resets)))
    for t in safe_toks:
        if t.value not in loc_set:
            raise GameSpecError(f"undeclared location {t.value!r} in safe set",
                                t.line, t.col)

    model = TimedGameModel(
        name=name,
        locations=tuple(locations),
        clocks=clocks,
        actions1=actions1,
        actions2=actions2,
        edges=tuple(edges),
        invariants=invariants,
        initial_location=initial,
    )
    return model, frozenset(t.value for t in safe_toks)


def _check_clocks(theta, clocks, where):
    for x in sorted(constraint_clocks(theta)):
        if x not in clocks:
            raise GameSpecError(f"undeclared clock {x!r} in constraint",
                                where.line, where.col)


def serialize_gamespec(model: TimedGameModel, safe) -> str:
    lines = [f"game {model.name}"]
    lines.append("clocks " + " ".join(model.clocks))
    lines.append("p1-actions " + " ".join(model.actions1))
    lines.append("p2-actions " + " ".join(model.actions2))
    for l in model.locations:
        flag = " initial" if l == model.initial_location else ""
        lines.append(f"loc {l}{flag} inv {model.invariants[l]}")
    for e in model.edges:
        resets = " ".join(sorted(e.reset))
        lines.append(f"edge {e.source} -> {e.target} : p{e.player}.{e.action} "
                     f"when {e.guard} reset {{{resets}}}")
    lines.append("safe " + " ".join(sorted(safe)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Controller format
# ---------------------------------------------------------------------------

STUTTER_TOKEN = "_|_1"


def region_token(r: Region) -> str:
    hpart = ",".join(f"{x}={v}" for x, v in r.h)
    blocks = "|".join(",".join(sorted(b)) if b else "-" for b in r.blocks)
    return f"{r.loc};{hpart};{blocks}"


def parse_region_token(tok: str, line=0) -> Region:
    parts = tok.split(";")
    if len(parts) != 3:
        raise GameSpecError(f"malformed region {tok!r}", line, 1)
    loc, hpart, bpart = parts
    h = []
    for item in hpart.split(","):
        if not item:
            continue
        if "=" not in item:
            raise GameSpecError(f"malformed integer part {item!r}", line, 1)
        x, v = item.split("=", 1)
        if not v.isdigit():
            raise GameSpecError(f"malformed integer part {item!r}", line, 1)
        h.append((x, int(v)))
    blocks = []
    for b in bpart.split("|"):
        blocks.append(frozenset() if b == "-" else frozenset(b.split(",")))
    try:
        return Region(loc, tuple(sorted(h)), tuple(blocks))
    except Exception as exc:
        raise GameSpecError(f"ill-formed region {tok!r}: {exc}", line, 1)


def preds_token(p: PredicateState) -> str:
    return (f"bl1={1 if p.bl1 else 0}"
            f";gt0={','.join(sorted(p.gt0))}"
            f";ge1={','.join(sorted(p.ge1))}"
            f";star={','.join(sorted(p.star))}")


def parse_preds_token(tok: str, line=0) -> PredicateState:
    fields = {}
    for item in tok.split(";"):
        if "=" not in item:
            raise GameSpecError(f"malformed predicates {tok!r}", line, 1)
        k, v = item.split("=", 1)
        fields[k] = v
    try:
        bl1 = {"0": False, "1": True}[fields.pop("bl1")]
        sets = {k: frozenset(x for x in fields.pop(k).split(",") if x)
                for k in ("gt0", "ge1", "star")}
        if fields:
            raise KeyError(next(iter(fields)))
        return PredicateState(bl1, sets["gt0"], sets["ge1"], sets["star"])
    except KeyError as exc:
        raise GameSpecError(f"malformed predicates {tok!r} ({exc})", line, 1)


def serialize_controller(ctrl: Controller) -> str:
    """Byte-stable text form; observations keep their index order, rows are
    sorted by (memory, observation)."""
    lines = [
        f"controller: {ctrl.name}",
        f"objective: {ctrl.objective}",
        f"policy: {ctrl.policy}",
        f"memory_states: {ctrl.memory_states}",
        f"initial_memory: {ctrl.initial_memory}",
    ]
    clocks = sorted({x for o in ctrl.observations for x, _ in o.region.h})
    if clocks:
        mem_bits = max(ctrl.memory_states - 1, 0).bit_length()
        pred_bits = 3 * len(clocks) + 1
        lines.append(f"# execution state: {mem_bits} memory bit(s) "
                     f"(lg {ctrl.memory_states}) + {pred_bits} predicate bits "
                     f"(3 per clock + blame) = {mem_bits + pred_bits} bits "
                     f"beside the clock region")
    for i, o in enumerate(ctrl.observations):
        lines.append(f"obs {i} {region_token(o.region)} {preds_token(o.preds)}")
    for (mem, oi) in sorted(ctrl.rows):
        row = ctrl.rows[(mem, oi)]
        action = STUTTER_TOKEN if row.action is None else row.action
        lines.append(f"row {mem} {oi} {row.next_mem} "
                     f"{region_token(row.target)} {action}")
    return "\n".join(lines) + "\n"


def parse_controller(text: str) -> Controller:
    header = {}
    observations = []
    rows = {}
    expect_header = ["controller", "objective", "policy", "memory_states",
                     "initial_memory"]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if expect_header:
            key = expect_header.pop(0)
            if not line.startswith(key + ":"):
                raise GameSpecError(f"expected '{key}:' header", lineno, 1)
            header[key] = line[len(key) + 1:].strip()
            continue
        parts = line.split()
        if parts[0] == "obs":
            if len(parts) != 4:
                raise GameSpecError("obs line needs index, region, predicates",
                                    lineno, 1)
            if not parts[1].isdigit() or int(parts[1]) != len(observations):
                raise GameSpecError(
                    f"observation index {parts[1]} out of order", lineno, 1)
            observations.append(EnlargedRegion(
                parse_region_token(parts[2], lineno),
                parse_preds_token(parts[3], lineno)))
        elif parts[0] == "row":
            if len(parts) != 6:
                raise GameSpecError(
                    "row line needs mem, obs, next-mem, region, action",
                    lineno, 1)
            if not (parts[1].isdigit() and parts[2].isdigit() and parts[3].isdigit()):
                raise GameSpecError("malformed row indices", lineno, 1)
            mem, oi, nxt = int(parts[1]), int(parts[2]), int(parts[3])
            if oi >= len(observations):
                raise GameSpecError(f"row references unknown observation {oi}",
                                    lineno, 1)
            if (mem, oi) in rows:
                raise GameSpecError(f"duplicate row ({mem}, {oi})", lineno, 1)
            action = None if parts[5] == STUTTER_TOKEN else parts[5]
            rows[(mem, oi)] = Prescription(nxt, parse_region_token(parts[4], lineno),
                                           action)
        else:
            raise GameSpecError(f"unknown directive {parts[0]!r}", lineno, 1)
    if expect_header:
        raise GameSpecError(f"missing '{expect_header[0]}:' header", 1, 1)
    for key in ("memory_states", "initial_memory"):
        if not header[key].isdigit():
            raise GameSpecError(f"{key} must be a nonnegative integer", 1, 1)
    ctrl = Controller(
        name=header["controller"],
        objective=header["objective"],
        policy=header["policy"],
        memory_states=int(header["memory_states"]),
        observations=tuple(observations),
        rows=rows,
        initial_memory=int(header["initial_memory"]),
    )
    problems = ctrl.validate()
    if problems:
        raise GameSpecError("; ".join(problems), 1, 1)
    return ctrl
