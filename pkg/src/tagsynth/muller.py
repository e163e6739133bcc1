"""Muller game solving on turn arenas, with strategy machines.

The solver is the classic recursive scheme driven by the Zielonka tree. At a
tree node t with label B (all node letters in the current subgame lie inside
B) the favored player sigma (player 1 at Good nodes, player 2 at Bad ones)
wins any play whose literal closure is not contained in any child label; so
the algorithm repeatedly tries, for each child i with label B_i, the subgame
G_i obtained by removing the sigma-attractor of E_i = {v : letter(v) not
contained in B_i}. If the opponent tau wins a nonempty part U of (G_i,
child_i), the tau-attractor of U is settled for tau and removed; otherwise,
once a full pass settles nothing, sigma wins everything that remains.

Strategies are realized as uniform machines (winning from every memory
state, which makes re-entry after excursions harmless):

  - sigma's machine on the final remainder cycles through child blocks:
    in block i it attracts to E_i, advances to block i+1 when E_i is hit,
    and inside G_i defers to the submachine from the recursive call. If
    blocks advance forever the closure escapes every child label and the
    play is resolved at t in sigma's favor; otherwise the play eventually
    stays inside one G_i and the submachine wins at child level.
  - tau's machine on the removed chunks stores one integer below the largest
    submachine size, reinterpreted modulo the local submachine size (escapes
    from a chunk can only reach earlier-removed chunks, so each play settles
    in a final chunk, is attracted to its U, and the submachine takes over).

Player 1's memory updates are gated to observable nodes. The arenas built
from timed models copy each state's labels onto its move nodes, so a block
advance triggered by a move node would already have been triggered at the
state preceding it; the gate loses nothing, and it makes the strategy a
function of the observation sequence alone. Counting states, player 1's
machine realizes exactly the m_F bound of the Zielonka tree.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import deque
from dataclasses import dataclass

from .errors import ModelError
from .finite_game import TurnArena
from .objectives import MullerCondition
from .zielonka import ZielonkaTree, build_zielonka


def attractor(arena: TurnArena, H, player, target):
    """player-attractor of target inside the node set H. Returns the
    attractor set and, for player's nodes outside the target, the positional
    pull move (a successor one step closer to the target)."""
    Hs = H if isinstance(H, (set, frozenset)) else set(H)
    attr = set(target)
    pull = {}
    cnt = {}
    queue = deque(sorted(attr))
    preds = arena.predecessors()
    while queue:
        v = queue.popleft()
        for u in preds[v]:
            if u not in Hs or u in attr:
                continue
            if arena.owner[u] == player:
                attr.add(u)
                pull[u] = v
                queue.append(u)
            else:
                c = cnt.get(u)
                if c is None:
                    c = sum(1 for w in arena.succ[u] if w in Hs)
                c -= 1
                cnt[u] = c
                if c == 0:
                    attr.add(u)
                    queue.append(u)
    return attr, pull


# ---------------------------------------------------------------------------
# Strategy machines
# ---------------------------------------------------------------------------

class _MachineBase:
    def _gated(self, v):
        return self.player == 1 and not self.arena.observable[v]


class LeafMachine(_MachineBase):
    """Single-state machine: any move staying inside the domain does."""

    def __init__(self, arena, player, domain):
        self.arena = arena
        self.player = player
        self.n = 1
        self._default = {}
        for v in sorted(domain):
            if arena.owner[v] == player:
                for w in arena.succ[v]:
                    if w in domain:
                        self._default[v] = w
                        break

    def update(self, mem, v):
        return mem

    def move(self, mem, v):
        return self._default[v]


@dataclass
class Block:
    E: set
    A: set
    pull: dict
    G: set
    sub: object  # machine for (G, child)


class CyclingMachine(_MachineBase):
    def __init__(self, arena, player, blocks, domain):
        self.arena = arena
        self.player = player
        self.blocks = blocks
        self.domain = domain
        self.offsets = []
        total = 0
        for b in blocks:
            self.offsets.append(total)
            total += b.sub.n
        self.n = max(1, total)
        self._default = {}
        for v in sorted(domain):
            if arena.owner[v] == player:
                for w in arena.succ[v]:
                    if w in domain:
                        self._default[v] = w
                        break

    def _decode(self, mem):
        i = bisect_right(self.offsets, mem) - 1
        return i, mem - self.offsets[i]

    def update(self, mem, v):
        if not self.blocks or self._gated(v):
            return mem
        i, s = self._decode(mem)
        b = self.blocks[i]
        if v in b.E:
            return self.offsets[(i + 1) % len(self.blocks)]
        if v in b.G:
            return self.offsets[i] + b.sub.update(s, v)
        return mem

    def move(self, mem, v):
        if not self.blocks:
            return self._default[v]
        i, s = self._decode(mem)
        b = self.blocks[i]
        if v in b.G:
            return b.sub.move(s, v)
        if v in b.pull:
            return b.pull[v]
        return self._default[v]


@dataclass
class Chunk:
    C: set
    U: set
    pull: dict
    sub: object  # machine for U


class ChunkMachine(_MachineBase):
    def __init__(self, arena, player, chunks):
        self.arena = arena
        self.player = player
        self.chunks = chunks
        self.chunk_of = {}
        for j, c in enumerate(chunks):
            for v in c.C:
                self.chunk_of[v] = j
        self.n = max([1] + [c.sub.n for c in chunks])

    def update(self, mem, v):
        if self._gated(v):
            return mem
        c = self.chunks[self.chunk_of[v]]
        if v in c.U:
            s = mem % c.sub.n
            s2 = c.sub.update(s, v)
            return s2 if s2 != s else mem
        return mem

    def move(self, mem, v):
        c = self.chunks[self.chunk_of[v]]
        if v in c.U:
            return c.sub.move(mem % c.sub.n, v)
        return c.pull[v]


@dataclass
class Strategy:
    """Finite-memory strategy for `player` on `winning`; memory values are
    ints in range(memory_states), initial memory 0, and plays consistent
    with update-then-move from any winning node stay winning."""
    arena: TurnArena
    player: int
    winning: frozenset
    machine: object

    @property
    def memory_states(self):
        return self.machine.n

    def update(self, mem, v):
        return self.machine.update(mem, v)

    def move(self, mem, v):
        return self.machine.move(mem, v)


# ---------------------------------------------------------------------------
# The recursive solver
# ---------------------------------------------------------------------------

@dataclass
class _Result:
    win: dict      # player -> set of nodes
    mach: dict     # player -> machine


def _letters(arena: TurnArena, condition: MullerCondition):
    full = (1 << condition.k) - 1
    pos = []
    neg = []
    for v in range(arena.n):
        w = condition.derived_letter(arena.label_set(v))
        pos.append(w)
        neg.append(~w & full)
    return pos, neg


def _solve(arena, lpos, lneg, H, t):
    sigma = 1 if t.accepting else 2
    tau = 3 - sigma
    if not H:
        empty = LeafMachine(arena, sigma, set())
        return _Result({1: set(), 2: set()},
                       {sigma: empty, tau: LeafMachine(arena, tau, set())})
    if not t.children:
        return _Result({sigma: set(H), tau: set()},
                       {sigma: LeafMachine(arena, sigma, H),
                        tau: LeafMachine(arena, tau, set())})

    Hcur = set(H)
    chunks = []
    blocks = None
    while True:
        removed = False
        blocks = []
        for child in t.children:
            E = {v for v in Hcur
                 if lpos[v] & ~child.pos or lneg[v] & ~child.neg}
            A, pull = attractor(arena, Hcur, sigma, E)
            G = Hcur - A
            sub = _solve(arena, lpos, lneg, G, child)
            U = sub.win[tau]
            if U:
                C, cpull = attractor(arena, Hcur, tau, U)
                chunks.append(Chunk(C, U, cpull, sub.mach[tau]))
                Hcur -= C
                removed = True
                break
            blocks.append(Block(E, A, pull, G, sub.mach[sigma]))
        if not removed or not Hcur:
            break

    win = {sigma: Hcur, tau: set(H) - Hcur}
    mach = {sigma: CyclingMachine(arena, sigma, blocks if Hcur else [], Hcur),
            tau: ChunkMachine(arena, tau, chunks)}
    return _Result(win, mach)


def solve_muller_both(arena: TurnArena, condition: MullerCondition,
                      tree: ZielonkaTree = None) -> _Result:
    """Solve for both players; returns winning sets and strategy machines."""
    for v in range(arena.n):
        if arena.owner[v] == 1 and not arena.observable[v]:
            raise ModelError("player-1 node marked unobservable; the memory "
                             "gate needs player-1 nodes observable")
    if tree is None:
        tree = build_zielonka(condition)
    lpos, lneg = _letters(arena, condition)
    return _solve(arena, lpos, lneg, set(range(arena.n)), tree.root)


def solve_muller(arena: TurnArena, condition: MullerCondition,
                 tree: ZielonkaTree = None):
    """Player-1 sure-winning node set and a finite-memory strategy realizing
    it with at most m_F memory states."""
    res = solve_muller_both(arena, condition, tree)
    return frozenset(res.win[1]), Strategy(arena, 1, frozenset(res.win[1]),
                                           res.mach[1])


# ---------------------------------------------------------------------------
# Lasso checks (strategy verification oracle)
# ---------------------------------------------------------------------------

def strategy_product(arena: TurnArena, condition: MullerCondition,
                     strategy: Strategy, starts):
    """Graph of plays consistent with the strategy, from the given start
    nodes with memory 0. Nodes are (mem, arena node); at the strategy
    owner's nodes the single successor is the prescribed move, elsewhere all
    arena successors remain. Returns (nodes, succ lists, letter per node,
    start indexes)."""
    index = {}
    nodes = []
    succ = []
    stack = []

    def add(mem, v):
        key = (mem, v)
        i = index.get(key)
        if i is None:
            i = index[key] = len(nodes)
            nodes.append(key)
            succ.append(None)
            stack.append(key)
        return i

    start_idx = [add(0, v) for v in sorted(set(starts))]
    while stack:
        mem, v = stack.pop()
        i = index[(mem, v)]
        mem2 = strategy.update(mem, v)
        if arena.owner[v] == strategy.player:
            outs = [strategy.move(mem2, v)]
        else:
            outs = arena.succ[v]
        succ[i] = [add(mem2, w) for w in outs]
    letters = [condition.derived_letter(arena.label_set(v)) for _, v in nodes]
    return nodes, succ, letters, start_idx


def _sccs(succ):
    """Tarjan, iterative. Yields SCCs as lists of node indexes."""
    n = len(succ)
    idx = [0] * n
    low = [0] * n
    on = [False] * n
    stack = []
    out = []
    counter = [1]
    for root in range(n):
        if idx[root]:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                idx[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on[v] = True
            advanced = False
            while pi < len(succ[v]):
                w = succ[v][pi]
                pi += 1
                if not idx[w]:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on[w]:
                    low[v] = min(low[v], idx[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == idx[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def reachable_lassos(succ, letters, start_idx, k):
    """All (pos, neg) literal closures realizable as cycles reachable from
    the starts. A cycle with closure B lies in a nontrivial SCC of the
    subgraph of letters inside B, whose literal union is exactly B; and such
    an SCC conversely yields a closed walk through all its nodes."""
    n = len(succ)
    full = (1 << k) - 1
    reach = set(start_idx)
    queue = deque(start_idx)
    while queue:
        v = queue.popleft()
        for w in succ[v]:
            if w not in reach:
                reach.add(w)
                queue.append(w)
    found = set()
    # Every realizable closure is the literal union of some nontrivial SCC
    # of the subgraph restricted to letters below it; iterating closures of
    # SCCs of *reachable* subgraphs bottoms out in finitely many steps.
    todo = {(full, full)}
    seen_b = set()
    while todo:
        b = todo.pop()
        if b in seen_b:
            continue
        seen_b.add(b)
        keep = [v for v in range(n)
                if v in reach and letters[v] & ~b[0] == 0
                and (~letters[v] & full) & ~b[1] == 0]
        if not keep:
            continue
        sub_index = {v: i for i, v in enumerate(keep)}
        sub_succ = [[sub_index[w] for w in succ[v] if w in sub_index]
                    for v in keep]
        for comp in _sccs(sub_succ):
            if len(comp) == 1:
                v = comp[0]
                if v not in sub_succ[v]:
                    continue
            pos = neg = 0
            for i in comp:
                w = letters[keep[i]]
                pos |= w
                neg |= ~w & full
            found.add((pos, neg))
            for sub in _proper_subclosures((pos, neg)):
                if sub not in seen_b:
                    todo.add(sub)
    return found


def _proper_subclosures(b):
    pos, neg = b
    both = pos & neg
    i = 0
    while both >> i:
        if both >> i & 1:
            bit = 1 << i
            yield (pos & ~bit, neg)
            yield (pos, neg & ~bit)
        i += 1


def check_strategy_universal(arena, condition, strategy, starts):
    """True iff every play consistent with the strategy from the starts has
    an accepted literal closure; otherwise returns the rejected closure."""
    nodes, succ, letters, start_idx = strategy_product(
        arena, condition, strategy, starts)
    for b in sorted(reachable_lassos(succ, letters, start_idx, condition.k)):
        if not condition.accepts(*b):
            return False, b
    return True, None
