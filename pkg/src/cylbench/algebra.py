"""The two algebra species at desk scale.

Extensional elements are reduced tables over a finite base: the pair
(dims, table) stands for the cylinder {s in base^omega : s|dims in table},
so omega-dimensional behavior is recovered exactly from a finite record.
Intensional elements are formula classes compared through a theory oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import HorizonExceeded, InfiniteAlgebra, ModeMismatch, WorkbenchError
from .oracle import TheoryOracle
from .syntax import (And, Eq, Exists, FALSE, FiniteTransformation, Formula,
                     MODE_CA, MODE_QPA, Not, Or, Rel, Signature, TRUE,
                     apply_transformation, format_formula, free_vars)
from .tables import assignments, drop_coordinate, expand_table, reduce_table


# ---------------------------------------------------------------------------
# Extensional elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SetElement:
    """A reduced cylinder over base {0..base_size-1}."""

    base_size: int
    dims: tuple[int, ...]
    table: frozenset

    @classmethod
    def make(cls, base_size: int, dims: Iterable[int], table) -> "SetElement":
        dims = tuple(sorted(dims))
        table = frozenset(tuple(t) for t in table)
        for t in table:
            if len(t) != len(dims) or any(not 0 <= x < base_size for x in t):
                raise WorkbenchError(f"bad tuple {t} for dims {dims}")
        # full tables over nonempty dims reduce to the unit as well
        rdims, rtable = reduce_table(dims, table, base_size)
        if not rtable:
            return cls(base_size, (), frozenset())
        return cls(base_size, rdims, rtable)

    @classmethod
    def zero(cls, base_size: int) -> "SetElement":
        return cls(base_size, (), frozenset())

    @classmethod
    def one(cls, base_size: int) -> "SetElement":
        return cls(base_size, (), frozenset({()}))

    # -- Boolean structure (cylinder semantics) -----------------------------

    def _aligned(self, other: "SetElement"):
        if self.base_size != other.base_size:
            raise WorkbenchError("elements of different algebras")
        target = tuple(sorted(set(self.dims) | set(other.dims)))
        return (target,
                expand_table(self.dims, self.table, target, self.base_size),
                expand_table(other.dims, other.table, target, self.base_size))

    def __and__(self, other: "SetElement") -> "SetElement":
        target, t1, t2 = self._aligned(other)
        return SetElement.make(self.base_size, target, t1 & t2)

    def __or__(self, other: "SetElement") -> "SetElement":
        target, t1, t2 = self._aligned(other)
        return SetElement.make(self.base_size, target, t1 | t2)

    def __invert__(self) -> "SetElement":
        full = set(assignments(len(self.dims), self.base_size))
        return SetElement.make(self.base_size, self.dims,
                               frozenset(full) - self.table)

    def leq(self, other: "SetElement") -> bool:
        return (self & other) == self

    def is_zero(self) -> bool:
        return not self.table

    def is_one(self) -> bool:
        return self.dims == () and bool(self.table)

    # -- cylindric / substitution structure ---------------------------------

    def cylindrify(self, i: int) -> "SetElement":
        if i not in self.dims:
            return self
        dims, table = drop_coordinate(self.dims, self.table, i)
        return SetElement.make(self.base_size, dims, table)

    def substitute(self, tau: FiniteTransformation) -> "SetElement":
        """{s : s o tau in self}; a Boolean endomorphism for each tau."""
        image = tuple(sorted({tau(v) for v in self.dims}))
        pos = {v: k for k, v in enumerate(image)}
        idx = [pos[tau(v)] for v in self.dims]
        table = frozenset(
            t for t in assignments(len(image), self.base_size)
            if tuple(t[k] for k in idx) in self.table)
        return SetElement.make(self.base_size, image, table)

    def dimension_set(self) -> frozenset[int]:
        return frozenset(self.dims)

    def __str__(self):
        inside = ",".join(str(t) for t in sorted(self.table))
        return f"<dims={list(self.dims)} {{{inside}}}>"


def diagonal(i: int, j: int, base_size: int) -> SetElement:
    """d_ij = {s : s(i) = s(j)}; the unit when i = j."""
    if i == j:
        return SetElement.one(base_size)
    return SetElement.make(base_size, (i, j),
                           {(u, u) for u in range(base_size)})


class SetAlgebra:
    """A finite-base set algebra; ``dims_bound`` caps the coordinates used
    by its enumerated elements (the full algebra over that cube)."""

    def __init__(self, base_size: int, mode: str = MODE_CA,
                 dims_bound: int = 2,
                 generators: Sequence[SetElement] = ()):
        if mode not in (MODE_CA, MODE_QPA):
            raise ModeMismatch(f"unknown mode {mode!r}")
        self.base_size = base_size
        self.mode = mode
        self.dims_bound = dims_bound
        self.generators = tuple(generators)

    @property
    def zero(self) -> SetElement:
        return SetElement.zero(self.base_size)

    @property
    def one(self) -> SetElement:
        return SetElement.one(self.base_size)

    def diagonal(self, i: int, j: int) -> SetElement:
        if self.mode != MODE_CA:
            raise ModeMismatch("diagonal elements exist only in CA mode")
        return diagonal(i, j, self.base_size)

    def atom(self, values: Sequence[int]) -> SetElement:
        """The assignment singleton over coordinates 0..len(values)-1."""
        return SetElement.make(self.base_size,
                               range(len(values)), {tuple(values)})

    def elements(self) -> list[SetElement]:
        """Every element of the full algebra over the dims_bound cube,
        deterministically ordered.  If generators were given, the closure
        of the generated subalgebra instead."""
        if self.generators:
            return self._closure()
        cube = sorted(assignments(self.dims_bound, self.base_size))
        out = set()
        for mask in range(2 ** len(cube)):
            table = {cube[k] for k in range(len(cube)) if mask >> k & 1}
            out.add(SetElement.make(self.base_size,
                                    range(self.dims_bound), table))
        return sorted(out, key=_element_sort_key)

    def _closure(self) -> list[SetElement]:
        seen = {self.zero, self.one}
        seen.update(self.generators)
        if self.mode == MODE_CA:
            for i in range(self.dims_bound):
                for j in range(self.dims_bound):
                    seen.add(self.diagonal(i, j))
        frontier = list(seen)
        while frontier:
            new = []
            current = list(seen)
            for a in frontier:
                candidates = [~a]
                candidates += [a.cylindrify(i) for i in range(self.dims_bound)]
                for b in current:
                    candidates.append(a & b)
                    candidates.append(a | b)
                for c in candidates:
                    if c not in seen:
                        seen.add(c)
                        new.append(c)
            frontier = new
            if len(seen) > 100_000:
                raise WorkbenchError("generated algebra too large to close")
        return sorted(seen, key=_element_sort_key)

    def atoms(self) -> list[SetElement]:
        elems = self.elements()
        nonzero = [a for a in elems if not a.is_zero()]
        return [a for a in nonzero
                if not any(b != a and b.leq(a) for b in nonzero)]


def _element_sort_key(a: SetElement):
    return (a.dims, sorted(a.table))


# ---------------------------------------------------------------------------
# Intensional elements (formula classes modulo an oracle)
# ---------------------------------------------------------------------------

class FormulaElement:
    """A formula class of CA(T)/QPA(T); equality is T-provable equivalence."""

    __slots__ = ("algebra", "formula", "_key")

    def __init__(self, algebra: "FormulaAlgebra", formula: Formula):
        self.algebra = algebra
        self.formula = formula
        self._key = None

    @property
    def key(self):
        if self._key is None:
            self._key = self.algebra.oracle.canonical_key(self.formula)
        return self._key

    def __eq__(self, other):
        if not isinstance(other, FormulaElement):
            return NotImplemented
        if self.algebra is not other.algebra:
            raise WorkbenchError("elements of different algebras")
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __and__(self, other: "FormulaElement") -> "FormulaElement":
        return FormulaElement(self.algebra, And(self.formula, other.formula))

    def __or__(self, other: "FormulaElement") -> "FormulaElement":
        return FormulaElement(self.algebra, Or(self.formula, other.formula))

    def __invert__(self) -> "FormulaElement":
        return FormulaElement(self.algebra, Not(self.formula))

    def leq(self, other: "FormulaElement") -> bool:
        return self.algebra.oracle.entails(self.formula, other.formula)

    def is_zero(self) -> bool:
        return not self.algebra.oracle.is_consistent(self.formula)

    def is_one(self) -> bool:
        return self.algebra.oracle.entails_equal(self.formula, TRUE)

    def cylindrify(self, i: int) -> "FormulaElement":
        return FormulaElement(self.algebra, Exists(i, self.formula))

    def substitute(self, tau: FiniteTransformation) -> "FormulaElement":
        return FormulaElement(self.algebra,
                              apply_transformation(tau, self.formula))

    def dimension_set(self) -> frozenset[int]:
        return self.algebra.semantic_dims(self.formula)

    def __str__(self):
        return format_formula(self.formula)


class FormulaAlgebra:
    """CA(T) or QPA(T): formula classes under a theory oracle."""

    def __init__(self, sig: Signature, oracle: TheoryOracle, mode: str):
        if mode not in (MODE_CA, MODE_QPA):
            raise ModeMismatch(f"unknown mode {mode!r}")
        if oracle.mode != mode or sig.mode != mode:
            raise ModeMismatch(
                f"{mode} algebra needs a matching {mode} oracle/signature")
        self.signature = sig
        self.oracle = oracle
        self.mode = mode
        self._dims_cache: dict = {}

    def element(self, formula: Formula) -> FormulaElement:
        return FormulaElement(self, formula)

    @property
    def zero(self) -> FormulaElement:
        return self.element(FALSE)

    @property
    def one(self) -> FormulaElement:
        return self.element(TRUE)

    def diagonal(self, i: int, j: int) -> FormulaElement:
        if self.mode != MODE_CA:
            raise ModeMismatch("diagonal elements exist only in CA mode")
        return self.element(Eq(i, j))

    def semantic_dims(self, formula: Formula) -> frozenset[int]:
        """{i : c_i f != f}; a subset of the free variables."""
        key = self.oracle.canonical_key(formula)
        got = self._dims_cache.get(key)
        if got is None:
            got = frozenset(
                i for i in free_vars(formula)
                if not self.oracle.entails_equal(Exists(i, formula), formula))
            self._dims_cache[key] = got
        return got


def formula_algebra(sig: Signature, oracle: TheoryOracle,
                    mode: Optional[str] = None) -> FormulaAlgebra:
    return FormulaAlgebra(sig, oracle, mode or sig.mode)


# ---------------------------------------------------------------------------
# Operations named independently of the element flavor
# ---------------------------------------------------------------------------

def cylindrify(i: int, a):
    return a.cylindrify(i)


def substitute(tau: FiniteTransformation, a):
    return a.substitute(tau)


def dimension_set(a) -> frozenset[int]:
    return a.dimension_set()


# ---------------------------------------------------------------------------
# Neat reducts
# ---------------------------------------------------------------------------

class NeatReduct:
    """The subalgebra of elements with dimension set inside {0..n-1}, with
    operation indices restricted below n."""

    def __init__(self, algebra, n: int):
        self.algebra = algebra
        self.n = n

    def contains(self, a) -> bool:
        return all(i < self.n for i in a.dimension_set())

    def carrier(self) -> list:
        if not isinstance(self.algebra, SetAlgebra):
            raise InfiniteAlgebra("carrier enumeration needs a finite algebra")
        return [a for a in self.algebra.elements() if self.contains(a)]

    def cylindrify(self, i: int, a):
        self._check_index(i)
        self._check_member(a)
        return a.cylindrify(i)

    def diagonal(self, i: int, j: int):
        self._check_index(i)
        self._check_index(j)
        return self.algebra.diagonal(i, j)

    def substitute(self, tau: FiniteTransformation, a):
        for k in tau.support | tau.image_of_support:
            self._check_index(k)
        self._check_member(a)
        return a.substitute(tau)

    def _check_index(self, i: int):
        if i >= self.n:
            raise WorkbenchError(f"index {i} outside the {self.n}-reduct")

    def _check_member(self, a):
        if not self.contains(a):
            raise WorkbenchError("element outside the neat reduct carrier")


def neat_reduct(algebra, n: int) -> NeatReduct:
    return NeatReduct(algebra, n)


# ---------------------------------------------------------------------------
# Weak elements: finite-support assignment semantics, materialized up to a
# horizon.  Every claim made from these carries that horizon.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeakElement:
    dims: tuple[int, ...]
    horizon: int
    table: frozenset

    def contains(self, assignment) -> bool:
        """Membership of a finite-support assignment; depends only on its
        restriction to dims.  Values at or beyond the horizon are not
        materialized and raise."""
        if isinstance(assignment, FiniteTransformation):
            values = tuple(assignment(v) for v in self.dims)
        else:
            values = tuple(assignment.get(v, v) for v in self.dims)
        if any(x >= self.horizon for x in values):
            raise HorizonExceeded(
                f"assignment value beyond horizon {self.horizon}")
        return values in self.table
