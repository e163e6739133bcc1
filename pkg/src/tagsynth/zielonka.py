"""Zielonka trees for Muller conditions.

The tree is built over *consistent literal sets*: sets of literals over the
condition's derived atoms covering every atom (represented as bitmask pairs
(pos, neg)). The root carries all literals; the children of a node labelled B
are the maximal consistent subsets of B whose acceptance differs from B's.
A node is Good when its label is accepted (favors player 1), Bad otherwise.

m^v is the standard memory measure: 1 at leaves, the sum over children at
Good nodes, the max at Bad nodes; m_F = m^root bounds the memory player 1
needs to win the Muller game, and the solver realizes exactly this bound.

Subtrees depend only on the label, so equal labels share one node (the tree
is kept as a DAG); dumps expand the sharing back into a tree.
"""

from __future__ import annotations

from .errors import CapacityError
from .objectives import MullerCondition


class ZNode:
    __slots__ = ("pos", "neg", "accepting", "children", "m")

    def __init__(self, pos, neg, accepting, children, m):
        self.pos = pos
        self.neg = neg
        self.accepting = accepting
        self.children = children
        self.m = m

    def label_literals(self, atom_names):
        lits = []
        for i, a in enumerate(atom_names):
            if self.pos >> i & 1:
                lits.append(a)
            if self.neg >> i & 1:
                lits.append("!" + a)
        return lits


class ZielonkaTree:
    def __init__(self, condition: MullerCondition, root: ZNode):
        self.condition = condition
        self.root = root

    @property
    def m_f(self) -> int:
        return self.root.m

    def node_count(self) -> int:
        """Number of nodes of the expanded tree."""
        def count(node):
            return 1 + sum(count(c) for c in node.children)
        return count(self.root)

    def dump(self) -> str:
        cond = self.condition
        lines = []

        def rec(node, depth):
            kind = "Good" if node.accepting else "Bad"
            if not node.children:
                kind += " leaf"
            lits = ", ".join(node.label_literals(cond.atom_names)) or "(empty)"
            lines.append("  " * depth + f"[{kind} m={node.m}] {{{lits}}}")
            for c in node.children:
                rec(c, depth + 1)

        rec(self.root, 0)
        return "\n".join(lines)


def _subset(a, b):
    return a[0] & ~b[0] == 0 and a[1] & ~b[1] == 0


def build_zielonka(condition: MullerCondition, cap: int = 14) -> ZielonkaTree:
    """Build the Zielonka tree; refuses conditions over more than cap atoms
    (the tree ranges over up to 3^k consistent sets)."""
    k = condition.k
    if k > cap:
        raise CapacityError(
            f"condition has {k} derived atoms, above the Zielonka tree cap of {cap}")

    acc_memo = {}

    def acc(b):
        r = acc_memo.get(b)
        if r is None:
            r = acc_memo[b] = condition.accepts(*b)
        return r

    def removals(b):
        pos, neg = b
        both = pos & neg
        i = 0
        m = both
        while m:
            if m & 1:
                bit = 1 << i
                yield (pos & ~bit, neg)
                yield (pos, neg & ~bit)
            m >>= 1
            i += 1

    children_memo = {}

    def children(b):
        """Maximal consistent subsets of b with flipped acceptance. Any
        consistent subset is reachable from b by single-literal removals that
        keep consistency (remove only where the partner literal stays), and
        along such a chain down to a *maximal* flipped subset every proper
        intermediate set is a superset of it, hence keeps b's acceptance; so
        a breadth-first walk through same-acceptance sets, collecting the
        flipped sets on its boundary, finds every maximal flipped subset."""
        out = children_memo.get(b)
        if out is not None:
            return out
        base = acc(b)
        seen = {b}
        frontier = [b]
        boundary = set()
        while frontier:
            nxt = []
            for cur in frontier:
                for sub in removals(cur):
                    if sub in seen:
                        continue
                    seen.add(sub)
                    if acc(sub) == base:
                        nxt.append(sub)
                    else:
                        boundary.add(sub)
            frontier = nxt
        # Scanning by descending literal count means every strict superset of
        # a candidate has already been kept, so one pass against the kept
        # sets suffices to filter out non-maximal boundary sets.
        maximal = []
        for c in sorted(boundary,
                        key=lambda c: (-bin(c[0]).count("1") - bin(c[1]).count("1"),
                                       c[0], c[1])):
            if not any(_subset(c, d) for d in maximal):
                maximal.append(c)
        children_memo[b] = maximal
        return maximal

    node_memo = {}

    def node(b):
        n = node_memo.get(b)
        if n is not None:
            return n
        accepting = acc(b)
        kids = [node(c) for c in children(b)]
        if kids:
            m = sum(c.m for c in kids) if accepting else max(c.m for c in kids)
        else:
            m = 1
        n = node_memo[b] = ZNode(b[0], b[1], accepting, tuple(kids), m)
        return n

    return ZielonkaTree(condition, node(condition.full()))
