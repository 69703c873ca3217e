"""First-order formulas over relational signatures, and finite transformations
of variable indices.

Variables are non-negative integers written ``v0, v1, ...``; there are no
named variables.  A transformation is a map on indices that moves only
finitely many of them; applying one to a formula substitutes ``v_i`` by
``v_{tau(i)}`` simultaneously on free occurrences, renaming bound variables
when they would capture.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Union

from .errors import EqualityNotInSignature, FormulaSyntaxError, SignatureError

MODE_CA = "CA"
MODE_QPA = "QPA"


@dataclass(frozen=True)
class Signature:
    """A relational signature.  ``equality=True`` selects CA (with-equality)
    mode, ``False`` selects QPA (without-equality) mode."""

    name: str
    relations: tuple[tuple[str, int], ...]
    equality: bool = True

    def __post_init__(self):
        seen = set()
        for sym, arity in self.relations:
            if sym in seen:
                raise SignatureError(f"duplicate relation symbol {sym!r}")
            seen.add(sym)
            if arity < 1:
                raise SignatureError(f"relation {sym!r} has arity {arity} < 1")

    @property
    def mode(self) -> str:
        return MODE_CA if self.equality else MODE_QPA

    def arity(self, sym: str) -> int:
        for s, a in self.relations:
            if s == sym:
                return a
        raise SignatureError(f"unknown relation symbol {sym!r}")


# ---------------------------------------------------------------------------
# Formula trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Top:
    def __repr__(self):
        return "TRUE"


@dataclass(frozen=True)
class Bottom:
    def __repr__(self):
        return "FALSE"


TRUE = Top()
FALSE = Bottom()


@dataclass(frozen=True)
class Rel:
    sym: str
    args: tuple[int, ...]


@dataclass(frozen=True)
class Eq:
    left: int
    right: int


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: int
    body: "Formula"


Formula = Union[Top, Bottom, Rel, Eq, Not, And, Or, Exists]


def validate_formula(f: Formula, sig: Signature) -> None:
    """Check arities and the equality-mode gate against ``sig``."""
    if isinstance(f, Rel):
        if len(f.args) != sig.arity(f.sym):
            raise SignatureError(
                f"{f.sym} expects {sig.arity(f.sym)} arguments, got {len(f.args)}")
    elif isinstance(f, Eq):
        if not sig.equality:
            raise EqualityNotInSignature(
                f"equality atom v{f.left} = v{f.right} in without-equality mode")
    elif isinstance(f, Not):
        validate_formula(f.body, sig)
    elif isinstance(f, (And, Or)):
        validate_formula(f.left, sig)
        validate_formula(f.right, sig)
    elif isinstance(f, Exists):
        validate_formula(f.body, sig)


def free_vars(f: Formula) -> frozenset[int]:
    """The exact set of variable indices occurring free in ``f``."""
    if isinstance(f, Rel):
        return frozenset(f.args)
    if isinstance(f, Eq):
        return frozenset((f.left, f.right))
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, Exists):
        return free_vars(f.body) - {f.var}
    return frozenset()


def all_vars(f: Formula) -> frozenset[int]:
    """Every index occurring in ``f``, free or bound."""
    if isinstance(f, Rel):
        return frozenset(f.args)
    if isinstance(f, Eq):
        return frozenset((f.left, f.right))
    if isinstance(f, Not):
        return all_vars(f.body)
    if isinstance(f, (And, Or)):
        return all_vars(f.left) | all_vars(f.right)
    if isinstance(f, Exists):
        return all_vars(f.body) | {f.var}
    return frozenset()


def depth(f: Formula) -> int:
    if isinstance(f, (Top, Bottom, Rel, Eq)):
        return 0
    if isinstance(f, Not):
        return 1 + depth(f.body)
    if isinstance(f, (And, Or)):
        return 1 + max(depth(f.left), depth(f.right))
    return 1 + depth(f.body)


def conj(formulas) -> Formula:
    """Right-folded conjunction; TRUE for the empty list."""
    formulas = list(formulas)
    if not formulas:
        return TRUE
    out = formulas[-1]
    for g in reversed(formulas[:-1]):
        out = And(g, out)
    return out


def disj(formulas) -> Formula:
    formulas = list(formulas)
    if not formulas:
        return FALSE
    out = formulas[-1]
    for g in reversed(formulas[:-1]):
        out = Or(g, out)
    return out


# ---------------------------------------------------------------------------
# Printing.  The printer output is the canonical text; parse(print(f)) == f.
# ---------------------------------------------------------------------------

_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3


def format_formula(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, ctx: int) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Rel):
        return f"{f.sym}({','.join('v%d' % a for a in f.args)})"
    if isinstance(f, Eq):
        s = f"v{f.left} = v{f.right}"
        return f"({s})" if ctx >= _PREC_NOT else s
    if isinstance(f, Exists):
        return f"E v{f.var} ({_fmt(f.body, 0)})"
    if isinstance(f, Not):
        return "~" + _fmt(f.body, _PREC_NOT)
    if isinstance(f, And):
        s = f"{_fmt(f.left, _PREC_AND)} & {_fmt(f.right, _PREC_AND - 1)}"
        return f"({s})" if ctx >= _PREC_AND else s
    if isinstance(f, Or):
        s = f"{_fmt(f.left, _PREC_OR)} | {_fmt(f.right, _PREC_OR - 1)}"
        return f"({s})" if ctx >= _PREC_OR else s
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Parsing: recursive descent over a tiny token stream.
# Grammar: atoms R(vI,...,vJ), equality vI = vJ, ~f, f & g, f | g,
# E vI (f), true, false; & binds tighter than |; &, | associate to the right
# in the tree the printer emits, but parsing accepts any grouping.
# ---------------------------------------------------------------------------

class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        self.skip_ws()
        if not self.text.startswith(ch, self.pos):
            raise FormulaSyntaxError(f"expected {ch!r}", self.pos)
        self.pos += len(ch)

    def word(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()
                                             or self.text[self.pos] == "_"):
            self.pos += 1
        if self.pos == start:
            raise FormulaSyntaxError("expected identifier", start)
        return self.text[start:self.pos]

    def var(self) -> int:
        self.skip_ws()
        start = self.pos
        w = self.word()
        if not (w.startswith("v") and w[1:].isdigit()):
            raise FormulaSyntaxError(f"expected variable, got {w!r}", start)
        return int(w[1:])


def parse_formula(text: str, sig: Signature) -> Formula:
    """Parse the canonical grammar; raises FormulaSyntaxError with a
    position, SignatureError for unknown symbols or arity mismatches, and
    EqualityNotInSignature when '=' appears in without-equality mode."""
    toks = _Tokens(text)
    f = _parse_or(toks, sig)
    toks.skip_ws()
    if toks.pos != len(text):
        raise FormulaSyntaxError("trailing input", toks.pos)
    return f


def _parse_or(toks: _Tokens, sig: Signature) -> Formula:
    left = _parse_and(toks, sig)
    if toks.peek() == "|":
        toks.expect("|")
        return Or(left, _parse_or(toks, sig))
    return left


def _parse_and(toks: _Tokens, sig: Signature) -> Formula:
    left = _parse_unary(toks, sig)
    if toks.peek() == "&":
        toks.expect("&")
        return And(left, _parse_and(toks, sig))
    return left


def _parse_unary(toks: _Tokens, sig: Signature) -> Formula:
    ch = toks.peek()
    if ch == "~":
        toks.expect("~")
        return Not(_parse_unary(toks, sig))
    if ch == "(":
        toks.expect("(")
        f = _parse_or(toks, sig)
        # a parenthesized variable may continue as an equality atom
        toks.expect(")")
        return f
    start = toks.pos
    w = toks.word()
    if w == "true":
        return TRUE
    if w == "false":
        return FALSE
    if w == "E":
        i = toks.var()
        toks.expect("(")
        body = _parse_or(toks, sig)
        toks.expect(")")
        return Exists(i, body)
    if w.startswith("v") and w[1:].isdigit():
        toks.expect("=")
        j = toks.var()
        if not sig.equality:
            raise EqualityNotInSignature(
                f"equality atom in without-equality signature {sig.name!r}")
        return Eq(int(w[1:]), j)
    # relation atom
    toks.expect("(")
    args = [toks.var()]
    while toks.peek() == ",":
        toks.expect(",")
        args.append(toks.var())
    toks.expect(")")
    atom = Rel(w, tuple(args))
    try:
        arity = sig.arity(w)
    except SignatureError:
        raise SignatureError(
            f"unknown relation symbol {w!r} at position {start}") from None
    if len(args) != arity:
        raise SignatureError(
            f"{w} expects {arity} arguments, got {len(args)} at position {start}")
    return atom


# ---------------------------------------------------------------------------
# Finite transformations of omega
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteTransformation:
    """A map omega -> omega moving only finitely many indices.

    ``pairs`` lists (index, image) for exactly the moved indices
    (index != image); the map is the identity elsewhere.
    """

    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        keys = [i for i, _ in self.pairs]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate support index")
        if any(i == j for i, j in self.pairs):
            raise ValueError("identity pair stored in support")
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))

    @classmethod
    def from_map(cls, mapping: Mapping[int, int]) -> "FiniteTransformation":
        return cls(tuple((i, j) for i, j in mapping.items() if i != j))

    @classmethod
    def replacement(cls, i: int, j: int) -> "FiniteTransformation":
        """[i|j]: send i to j, identity elsewhere."""
        return cls.from_map({i: j})

    @classmethod
    def transposition(cls, i: int, j: int) -> "FiniteTransformation":
        """[i,j]: swap i and j."""
        return cls.from_map({i: j, j: i})

    @classmethod
    def identity(cls) -> "FiniteTransformation":
        return cls(())

    def __call__(self, i: int) -> int:
        for k, v in self.pairs:
            if k == i:
                return v
        return i

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.pairs)

    @property
    def image_of_support(self) -> frozenset[int]:
        return frozenset(j for _, j in self.pairs)

    def is_identity(self) -> bool:
        return not self.pairs

    def is_bijection(self) -> bool:
        moved = self.support | self.image_of_support
        return {self(i) for i in moved} == moved

    def inverse(self) -> "FiniteTransformation":
        if not self.is_bijection():
            raise ValueError(f"{self} is not a bijection")
        moved = sorted(self.support | self.image_of_support)
        return FiniteTransformation.from_map({self(i): i for i in moved})

    def __str__(self):
        if not self.pairs:
            return "[id]"
        return "".join(f"[{i}|{j}]" for i, j in self.pairs)


def compose(tau1: FiniteTransformation,
            tau2: FiniteTransformation) -> FiniteTransformation:
    """Functional composition: compose(t1, t2)(i) = t1(t2(i))."""
    moved = tau1.support | tau2.support
    return FiniteTransformation.from_map({i: tau1(tau2(i)) for i in moved})


def parse_transformation(text: str) -> FiniteTransformation:
    """Parse transformation literals: ``[i|j]`` replacement, ``[i,j]``
    transposition, products left-to-right (the left factor applies first:
    ``[a][b]`` denotes i -> b(a(i)))."""
    toks = _Tokens(text)
    out = FiniteTransformation.identity()
    saw_any = False
    while toks.peek() == "[":
        toks.expect("[")
        toks.skip_ws()
        if toks.text.startswith("id", toks.pos):
            toks.pos += 2
            factor = FiniteTransformation.identity()
        else:
            i = _parse_nat(toks)
            sep = toks.peek()
            if sep == "|":
                toks.expect("|")
                factor = FiniteTransformation.replacement(i, _parse_nat(toks))
            elif sep == ",":
                toks.expect(",")
                factor = FiniteTransformation.transposition(i, _parse_nat(toks))
            else:
                raise FormulaSyntaxError("expected '|' or ','", toks.pos)
        toks.expect("]")
        out = compose(factor, out)
        saw_any = True
    toks.skip_ws()
    if toks.pos != len(toks.text) or not saw_any:
        raise FormulaSyntaxError("bad transformation literal", toks.pos)
    return out


def _parse_nat(toks: _Tokens) -> int:
    toks.skip_ws()
    start = toks.pos
    while toks.pos < len(toks.text) and toks.text[toks.pos].isdigit():
        toks.pos += 1
    if toks.pos == start:
        raise FormulaSyntaxError("expected number", start)
    return int(toks.text[start:toks.pos])


# ---------------------------------------------------------------------------
# Capture-avoiding simultaneous substitution
# ---------------------------------------------------------------------------

def apply_transformation(tau: FiniteTransformation, f: Formula) -> Formula:
    """Substitute v_i by v_{tau(i)} on free occurrences, simultaneously.

    Bound variables are renamed to the least index not occurring in the
    formula nor in the active substitution's support or image, so output
    is deterministic.
    """
    sub = {i: tau(i) for i in free_vars(f) if tau(i) != i}
    return _subst(f, sub)


def _subst(f: Formula, sub: dict[int, int]) -> Formula:
    if not sub:
        return f
    if isinstance(f, Rel):
        return Rel(f.sym, tuple(sub.get(a, a) for a in f.args))
    if isinstance(f, Eq):
        return Eq(sub.get(f.left, f.left), sub.get(f.right, f.right))
    if isinstance(f, Not):
        return Not(_subst(f.body, sub))
    if isinstance(f, And):
        return And(_subst(f.left, sub), _subst(f.right, sub))
    if isinstance(f, Or):
        return Or(_subst(f.left, sub), _subst(f.right, sub))
    if isinstance(f, Exists):
        inner = {i: j for i, j in sub.items()
                 if i != f.var and i in free_vars(f.body)}
        if not inner:
            return f
        if f.var in inner.values():
            # the bound index would capture a substituted variable
            used = all_vars(f) | set(inner) | set(inner.values())
            fresh = 0
            while fresh in used:
                fresh += 1
            body = _subst(f.body, {f.var: fresh})
            return Exists(fresh, _subst(body, inner))
        return Exists(f.var, _subst(f.body, inner))
    return f


# ---------------------------------------------------------------------------
# Fixed formula enumeration: by (depth, canonical text), with variable
# indices below ``max_var``.  Each depth block is finite; blocks are
# materialized and sorted one at a time.
# ---------------------------------------------------------------------------

_BLOCK_CAP = 2_000_000


def enumerate_formulas(sig: Signature, max_var: int = 3) -> Iterator[Formula]:
    """Yield formulas in (depth, text) order. The stream is infinite in
    principle; consumers take a finite prefix (a budget)."""
    blocks: list[list[Formula]] = []
    d = 0
    while True:
        block = _depth_block(sig, max_var, d, blocks)
        blocks.append(block)
        for f in block:
            yield f
        d += 1


def _depth_block(sig: Signature, max_var: int, d: int,
                 blocks: list[list[Formula]]) -> list[Formula]:
    out: list[Formula] = []
    if d == 0:
        out.extend([TRUE, FALSE])
        for sym, arity in sig.relations:
            for args in _tuples(max_var, arity):
                out.append(Rel(sym, args))
        if sig.equality:
            for i in range(max_var):
                for j in range(max_var):
                    out.append(Eq(i, j))
    else:
        below = [f for b in blocks for f in b]
        exact = blocks[d - 1]
        size = len(exact) * (1 + max_var) + 2 * (
            len(below) ** 2 - (len(below) - len(exact)) ** 2)
        if size > _BLOCK_CAP:
            raise MemoryError(
                f"formula block at depth {d} would hold {size} formulas")
        for f in exact:
            out.append(Not(f))
            for i in range(max_var):
                out.append(Exists(i, f))
        for l in below:
            for r in below:
                if max(depth(l), depth(r)) == d - 1:
                    out.append(And(l, r))
                    out.append(Or(l, r))
    out.sort(key=format_formula)
    return out


@lru_cache(maxsize=None)
def _tuples(max_var: int, arity: int) -> tuple[tuple[int, ...], ...]:
    if arity == 0:
        return ((),)
    shorter = _tuples(max_var, arity - 1)
    return tuple(t + (i,) for t in shorter for i in range(max_var))
