"""Receptiveness objectives and Muller conditions.

Objectives are positive boolean combinations of GF(p) ("p infinitely often")
and FG(p) ("eventually always p") where p is a boolean combination of arena
label atoms. Over an infinite label sequence only the set of letters seen
infinitely often matters: GF(p) holds iff some recurring letter satisfies p,
FG(p) iff all do.

To solve such an objective as a Muller game, each syntactically distinct
argument predicate (after normalization) becomes one derived proposition.
Normalization eliminates implications, flattens, and applies only the two
valid merges GF(a) ∨ GF(b) = GF(a ∨ b) and FG(a) ∧ FG(b) = FG(a ∧ b);
argument predicates are then deduplicated up to logical equivalence and
constant arguments are folded away. For a play whose recurring derived
valuations have literal closure B, the formula holds iff it evaluates to
true under GF(d) := (d ∈ B) and FG(d) := (¬d ∉ B), which is exactly the
Muller acceptance used here.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModelError


# ---------------------------------------------------------------------------
# Predicates over label atoms
# ---------------------------------------------------------------------------

class Pred:
    __slots__ = ()

    def __and__(self, other):
        return PAnd((self, other))

    def __or__(self, other):
        return POr((self, other))

    def __invert__(self):
        return PNot(self)


@dataclass(frozen=True)
class PTrue(Pred):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class PFalse(Pred):
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class PAtom(Pred):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class PNot(Pred):
    inner: Pred

    def __str__(self):
        return f"!{self.inner}" if isinstance(self.inner, PAtom) else f"!({self.inner})"


@dataclass(frozen=True)
class PAnd(Pred):
    parts: tuple

    def __str__(self):
        return "(" + " & ".join(str(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class POr(Pred):
    parts: tuple

    def __str__(self):
        return "(" + " | ".join(str(p) for p in self.parts) + ")"


PTRUE = PTrue()
PFALSE = PFalse()


def pand(parts):
    parts = tuple(parts)
    if not parts:
        return PTRUE
    return parts[0] if len(parts) == 1 else PAnd(parts)


def por(parts):
    parts = tuple(parts)
    if not parts:
        return PFALSE
    return parts[0] if len(parts) == 1 else POr(parts)


def pred_eval(p: Pred, atoms) -> bool:
    if isinstance(p, PTrue):
        return True
    if isinstance(p, PFalse):
        return False
    if isinstance(p, PAtom):
        return p.name in atoms
    if isinstance(p, PNot):
        return not pred_eval(p.inner, atoms)
    if isinstance(p, PAnd):
        return all(pred_eval(q, atoms) for q in p.parts)
    if isinstance(p, POr):
        return any(pred_eval(q, atoms) for q in p.parts)
    raise ModelError(f"not a predicate: {p!r}")


def pred_atoms(p: Pred) -> set:
    if isinstance(p, PAtom):
        return {p.name}
    if isinstance(p, PNot):
        return pred_atoms(p.inner)
    if isinstance(p, (PAnd, POr)):
        out = set()
        for q in p.parts:
            out |= pred_atoms(q)
        return out
    return set()


# ---------------------------------------------------------------------------
# Temporal layer (InfAtomFormula)
# ---------------------------------------------------------------------------

class TForm:
    __slots__ = ()


@dataclass(frozen=True)
class TTrue(TForm):
    def __str__(self):
        return "TRUE"


@dataclass(frozen=True)
class TFalse(TForm):
    def __str__(self):
        return "FALSE"


@dataclass(frozen=True)
class GF(TForm):
    pred: Pred

    def __str__(self):
        return f"GF({self.pred})"


@dataclass(frozen=True)
class FG(TForm):
    pred: Pred

    def __str__(self):
        return f"FG({self.pred})"


@dataclass(frozen=True)
class TAnd(TForm):
    parts: tuple

    def __str__(self):
        return "(" + " AND ".join(str(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class TOr(TForm):
    parts: tuple

    def __str__(self):
        return "(" + " OR ".join(str(p) for p in self.parts) + ")"


TTRUE = TTrue()
TFALSE = TFalse()


def tand(parts):
    parts = tuple(parts)
    if not parts:
        return TTRUE
    return parts[0] if len(parts) == 1 else TAnd(parts)


def tor(parts):
    parts = tuple(parts)
    if not parts:
        return TFALSE
    return parts[0] if len(parts) == 1 else TOr(parts)


def eval_inf_set(f: TForm, inf_letters) -> bool:
    """Evaluate over any run whose set of infinitely recurring letters is
    inf_letters (each letter = set of true atoms)."""
    if isinstance(f, TTrue):
        return True
    if isinstance(f, TFalse):
        return False
    if isinstance(f, GF):
        return any(pred_eval(f.pred, a) for a in inf_letters)
    if isinstance(f, FG):
        return all(pred_eval(f.pred, a) for a in inf_letters)
    if isinstance(f, TAnd):
        return all(eval_inf_set(g, inf_letters) for g in f.parts)
    if isinstance(f, TOr):
        return any(eval_inf_set(g, inf_letters) for g in f.parts)
    raise ModelError(f"not an objective formula: {f!r}")


def eval_lasso(f: TForm, stem, cycle) -> bool:
    """Evaluate on the ultimately periodic word stem·cycle^ω. Only the cycle
    letters recur, so the stem is irrelevant to GF/FG."""
    if not cycle:
        raise ModelError("lasso cycle must be nonempty")
    return eval_inf_set(f, [frozenset(a) for a in cycle])


def formula_atoms(f: TForm) -> set:
    if isinstance(f, (GF, FG)):
        return pred_atoms(f.pred)
    if isinstance(f, (TAnd, TOr)):
        out = set()
        for g in f.parts:
            out |= formula_atoms(g)
        return out
    return set()


# ---------------------------------------------------------------------------
# The receptiveness objectives
# ---------------------------------------------------------------------------

def _bl1():
    return PAtom("bl1")


def _zero(x):
    return PAtom(f"{x}=0")


def _gt0(x):
    return PAtom(f"V>0({x})")


def _ge1(x):
    return PAtom(f"V>=1({x})")


def _star(x):
    return PAtom(f"V*({x})")


def _beyond(x):
    return PAtom(f"{x}>c")


def build_phi_dagger(clocks) -> TForm:
    """GF(bl₁) → Ψ†, with the implication rewritten to FG(¬bl₁) ∨ Ψ† and Ψ†'s
    top disjunction flattened, giving three top-level disjuncts:

      FG(¬bl₁)
      ∨ [ ⋀ₓ GF(x=0 ∨ V*(x)) ∧ ( GF(bl₁ ∧ ⋀ₓV>0(x) ∧ ⋁ₓ¬V*(x))
                                  ∨ GF(¬bl₁ ∧ ⋁ₓ(V≥1(x) ∧ ¬V*(x))) ) ]
      ∨ ⋀ₓ FG(V*(x))
    """
    clocks = sorted(clocks)
    if not clocks:
        raise ModelError("objective needs at least one clock")
    reset_often = tand(GF(por([_zero(x), _star(x)])) for x in clocks)
    blamed_progress = GF(pand([_bl1()] + [_gt0(x) for x in clocks]
                              + [por(PNot(_star(x)) for x in clocks)]))
    unblamed_progress = GF(pand([PNot(_bl1()),
                                 por(pand([_ge1(x), PNot(_star(x))]) for x in clocks)]))
    middle = tand([reset_often, tor([blamed_progress, unblamed_progress])])
    all_beyond = tand(FG(_star(x)) for x in clocks)
    return tor([FG(PNot(_bl1())), middle, all_beyond])


def build_phi_star(clocks, literal_as_printed=False) -> TForm:
    """GF(bl₁) → ⋁_{X⊆C} φ_X where

      φ_X = ⋀_{x∈X} FG(x>c) ∧ [ ⋀_{x∉X} GF(x=0)
              ∧ ( GF(bl₁ ∧ ⋀_{x∉X}V>0(x)) ∨ GF(¬bl₁ ∧ ⋁_{x∉X}V≥1(x)) ) ]

    The second disjunct's blame literal defaults to ¬bl₁; pass
    literal_as_printed=True for the bl₁ variant.
    """
    clocks = sorted(clocks)
    second_blame = _bl1() if literal_as_printed else PNot(_bl1())
    disjuncts = []
    for mask in range(1 << len(clocks)):
        inside = [x for i, x in enumerate(clocks) if mask >> i & 1]
        outside = [x for x in clocks if x not in inside]
        parts = [FG(_beyond(x)) for x in inside]
        parts += [GF(_zero(x)) for x in outside]
        first = GF(pand([_bl1()] + [_gt0(x) for x in outside]))
        second = GF(pand([second_blame, por(_ge1(x) for x in outside)]))
        parts.append(tor([first, second]))
        disjuncts.append(tand(parts))
    return tor([FG(PNot(_bl1()))] + disjuncts)


def build_tick_objective(safeY=None) -> TForm:
    """(GF tick → □Y) ∧ (¬GF tick → FG ¬bl₁) with the □Y conjunct handled
    structurally (the arena is restricted to the safety fixpoint before
    solving), leaving GF(tick) ∨ FG(¬bl₁)."""
    return tor([GF(PAtom("tick")), FG(PNot(_bl1()))])


def streett_elim_check(clocks, stem, cycle):
    """Evaluate ⋀ₓ(GF(x=0) ∨ FG(V*(x))) and ⋀ₓ GF(x=0 ∨ V*(x)) on a lasso;
    on lassos realizable in an arena (where a clock can only fall back under
    its constant via a reset) the two agree."""
    streett = tand(tor([GF(_zero(x)), FG(_star(x))]) for x in sorted(clocks))
    merged = tand(GF(por([_zero(x), _star(x)])) for x in sorted(clocks))
    return eval_lasso(streett, stem, cycle), eval_lasso(merged, stem, cycle)


# ---------------------------------------------------------------------------
# Formula → Muller condition over derived atoms
# ---------------------------------------------------------------------------

def _merge(f: TForm) -> TForm:
    """Flatten nesting and apply the two sound merges."""
    if isinstance(f, (TTrue, TFalse, GF, FG)):
        return f
    parts = []
    for g in f.parts:
        g = _merge(g)
        if type(g) is type(f):
            parts.extend(g.parts)
        else:
            parts.append(g)
    if isinstance(f, TOr):
        gfs = [g for g in parts if isinstance(g, GF)]
        rest = [g for g in parts if not isinstance(g, GF)]
        if len(gfs) > 1:
            rest.append(GF(por(g.pred for g in gfs)))
        else:
            rest.extend(gfs)
        return tor(rest)
    fgs = [g for g in parts if isinstance(g, FG)]
    rest = [g for g in parts if not isinstance(g, FG)]
    if len(fgs) > 1:
        rest.append(FG(pand(g.pred for g in fgs)))
    else:
        rest.extend(fgs)
    return tand(rest)


def _canonical_pred(p: Pred, fixed=None):
    """(essential atom tuple, truth bitstring) — equal iff the predicates are
    logically equivalent. `fixed` maps atoms to forced constant values."""
    fixed = fixed or {}
    names = sorted(a for a in pred_atoms(p) if a not in fixed)
    rows = []
    for mask in range(1 << len(names)):
        atoms = {a for i, a in enumerate(names) if mask >> i & 1}
        atoms |= {a for a, v in fixed.items() if v}
        rows.append(pred_eval(p, atoms))
    essential = []
    for i, a in enumerate(names):
        for mask in range(1 << len(names)):
            if not mask >> i & 1 and rows[mask] != rows[mask | (1 << i)]:
                essential.append(i)
                break
    ess_names = tuple(names[i] for i in essential)
    bits = 0
    for j in range(1 << len(essential)):
        mask = 0
        for pos, i in enumerate(essential):
            if j >> pos & 1:
                mask |= 1 << i
        if rows[mask]:
            bits |= 1 << j
    return ess_names, bits


@dataclass
class MullerCondition:
    """Acceptance over consistent literal sets of the derived atoms. A
    consistent set is (pos_mask, neg_mask) with pos|neg covering every atom;
    accepts decides the skeleton with GF(d) := d ∈ pos, FG(d) := d ∉ neg."""
    atom_names: tuple
    atom_preds: tuple
    skeleton: TForm
    positive: bool = True

    @property
    def k(self):
        return len(self.atom_names)

    def full(self):
        m = (1 << self.k) - 1
        return m, m

    def accepts(self, pos, neg) -> bool:
        idx = {a: i for i, a in enumerate(self.atom_names)}

        def ev(f):
            if isinstance(f, TTrue):
                return True
            if isinstance(f, TFalse):
                return False
            if isinstance(f, GF):
                return bool(pos >> idx[f.pred.name] & 1)
            if isinstance(f, FG):
                return not neg >> idx[f.pred.name] & 1
            if isinstance(f, TAnd):
                return all(ev(g) for g in f.parts)
            return any(ev(g) for g in f.parts)

        val = ev(self.skeleton)
        return val if self.positive else not val

    def negate(self):
        return MullerCondition(self.atom_names, self.atom_preds, self.skeleton,
                               not self.positive)

    def derived_letter(self, base_atoms) -> int:
        """Map a set of true base atoms to the derived-atom bitmask."""
        mask = 0
        for i, p in enumerate(self.atom_preds):
            if pred_eval(p, base_atoms):
                mask |= 1 << i
        return mask

    def closure(self, letters):
        """(pos, neg) literal closure of a set of derived letters."""
        pos = neg = 0
        m = (1 << self.k) - 1
        for w in letters:
            pos |= w
            neg |= ~w & m
        return pos, neg

    def describe(self):
        lines = [f"derived atoms ({self.k}):"]
        for name, p in zip(self.atom_names, self.atom_preds):
            lines.append(f"  {name} := {p}")
        lines.append(f"skeleton: {self.skeleton}")
        return "\n".join(lines)


def formula_to_muller(f: TForm, fixed_atoms=None) -> MullerCondition:
    """Normalize f and package it as a Muller condition over derived atoms.
    fixed_atoms optionally maps base atoms to constants (used to specialize a
    formula to an arena where some atom never varies)."""
    g = _merge(f)
    canon_to_name = {}
    preds = []
    names = []

    def fold(h):
        if isinstance(h, (TTrue, TFalse)):
            return h
        if isinstance(h, (GF, FG)):
            key = _canonical_pred(h.pred, fixed_atoms)
            if not key[0]:
                const = bool(key[1] & 1)
                return TTRUE if const else TFALSE  # GF/FG of a constant
            if key not in canon_to_name:
                name = f"d{len(names)}"
                canon_to_name[key] = name
                names.append(name)
                preds.append(h.pred)
            name = canon_to_name[key]
            return GF(PAtom(name)) if isinstance(h, GF) else FG(PAtom(name))
        parts = [fold(x) for x in h.parts]
        if isinstance(h, TAnd):
            if any(isinstance(x, TFalse) for x in parts):
                return TFALSE
            parts = [x for x in parts if not isinstance(x, TTrue)]
            return tand(parts)
        if any(isinstance(x, TTrue) for x in parts):
            return TTRUE
        parts = [x for x in parts if not isinstance(x, TFalse)]
        return tor(parts)

    skeleton = fold(g)
    used = formula_atoms(skeleton)
    keep = [i for i, n in enumerate(names) if n in used]
    renames = {names[i]: f"d{j}" for j, i in enumerate(keep)}

    def rename(h):
        if isinstance(h, GF):
            return GF(PAtom(renames[h.pred.name]))
        if isinstance(h, FG):
            return FG(PAtom(renames[h.pred.name]))
        if isinstance(h, (TAnd, TOr)):
            parts = tuple(rename(x) for x in h.parts)
            return TAnd(parts) if isinstance(h, TAnd) else TOr(parts)
        return h

    return MullerCondition(
        tuple(f"d{j}" for j in range(len(keep))),
        tuple(preds[i] for i in keep),
        rename(skeleton),
    )
