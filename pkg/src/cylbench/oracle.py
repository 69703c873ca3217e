"""Theory presentations: decide consistency-with-T and T-provable equivalence.

Three presentations are built in:

* ``FiniteModelOracle`` — T is the common theory of a finite list of finite
  models; decided by exhaustive evaluation.
* ``DloOracle`` — the complete theory of dense linear order without
  endpoints, decided by innermost quantifier elimination plus exhaustion of
  order types (weak orderings) of the free variables.
* ``ExternalOracle`` — a subprocess speaking a line protocol, for plugging
  in richer decision procedures.

All oracles are reentrant; the external one serializes internally.
"""

from __future__ import annotations

import subprocess
import threading
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Mapping, Optional, Sequence

from .errors import OracleProtocolError, SignatureError, WorkbenchError
from .syntax import (And, Bottom, Eq, Exists, FALSE, Formula, Not, Or, Rel,
                     Signature, TRUE, Top, conj, format_formula, free_vars,
                     parse_formula)
from .tables import assignments, reduce_table

# Order-type exhaustion is certifiably complete but factorial; this is the
# largest free-variable count we exhaust before refusing.
MAX_EXHAUSTED_VARS = 8


class TheoryOracle:
    """Behavioral interface behind Lindenbaum-Tarski algebras.

    ``entails_equal`` must be a congruence w.r.t. all connectives,
    quantifiers and transformations, and ``is_consistent(f)`` iff not
    ``entails_equal(f, false)``.
    """

    signature: Signature
    complete: bool = False

    @property
    def mode(self) -> str:
        return self.signature.mode

    def is_consistent(self, f: Formula) -> bool:
        raise NotImplementedError

    def entails_equal(self, f: Formula, g: Formula) -> bool:
        raise NotImplementedError

    def entails(self, f: Formula, g: Formula) -> bool:
        """T |= f -> g."""
        return self.entails_equal(And(f, g), f)

    def canonical_key(self, f: Formula):
        """Hashable key with key(f) == key(g) iff entails_equal(f, g).
        Presentations that cannot canonicalize fall back to the printed
        text (keys then refine the element equality)."""
        return ("text", format_formula(f))

    def conjunction_checker(self) -> "ConjunctionChecker":
        return GenericConjunctionChecker(self)


class ConjunctionChecker:
    """Incremental satisfiability of a growing conjunction (single owner).

    ``check(extras)`` answers whether chain + extras is T-consistent
    without committing; ``push(f)`` appends f (caller must have verified
    consistency first).
    """

    def check(self, extras: Sequence[Formula]) -> bool:
        raise NotImplementedError

    def push(self, f: Formula) -> None:
        raise NotImplementedError


class GenericConjunctionChecker(ConjunctionChecker):
    def __init__(self, oracle: TheoryOracle):
        self.oracle = oracle
        self.chain: list[Formula] = []

    def check(self, extras: Sequence[Formula]) -> bool:
        return self.oracle.is_consistent(conj(self.chain + list(extras)))

    def push(self, f: Formula) -> None:
        self.chain.append(f)


# ---------------------------------------------------------------------------
# Finite models and their common theory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteModel:
    """A finite relational structure with base {0..base_size-1}."""

    signature: Signature
    base_size: int
    interp: tuple[tuple[str, frozenset], ...]

    @classmethod
    def make(cls, sig: Signature, base_size: int,
             relations: Mapping[str, Iterable[tuple[int, ...]]]) -> "FiniteModel":
        declared = dict(sig.relations)
        interp = []
        for sym in sorted(declared):
            tuples = frozenset(tuple(t) for t in relations.get(sym, ()))
            for t in tuples:
                if len(t) != declared[sym]:
                    raise SignatureError(
                        f"tuple {t} has wrong arity for {sym}/{declared[sym]}")
                if any(not 0 <= x < base_size for x in t):
                    raise SignatureError(f"tuple {t} outside base of {sym}")
            interp.append((sym, tuples))
        unknown = set(relations) - set(declared)
        if unknown:
            raise SignatureError(f"undeclared relation symbols {sorted(unknown)}")
        return cls(sig, base_size, tuple(interp))

    @property
    def relations(self) -> dict[str, frozenset]:
        return dict(self.interp)

    def tuples(self, sym: str) -> frozenset:
        for s, t in self.interp:
            if s == sym:
                return t
        raise SignatureError(f"unknown relation symbol {sym!r}")


def evaluate(model, f: Formula, env: dict[int, int]) -> bool:
    """Structural evaluation; quantifiers range over the model's base.
    ``model`` needs ``base_size`` and ``tuples(sym)``."""
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, Rel):
        return tuple(env[a] for a in f.args) in model.tuples(f.sym)
    if isinstance(f, Eq):
        return env[f.left] == env[f.right]
    if isinstance(f, Not):
        return not evaluate(model, f.body, env)
    if isinstance(f, And):
        return evaluate(model, f.left, env) and evaluate(model, f.right, env)
    if isinstance(f, Or):
        return evaluate(model, f.left, env) or evaluate(model, f.right, env)
    if isinstance(f, Exists):
        saved = env.get(f.var)
        for u in range(model.base_size):
            env[f.var] = u
            if evaluate(model, f.body, env):
                if saved is None:
                    del env[f.var]
                else:
                    env[f.var] = saved
                return True
        if saved is None:
            del env[f.var]
        else:
            env[f.var] = saved
        return False
    raise TypeError(f"not a formula: {f!r}")


class FiniteModelOracle(TheoryOracle):
    """T = the common theory of a nonempty list of finite models over one
    signature.  Generally incomplete; the flag is set only for a single
    model."""

    def __init__(self, models: Sequence[FiniteModel]):
        if not models:
            raise WorkbenchError("need at least one model")
        sig = models[0].signature
        if any(m.signature != sig for m in models):
            raise SignatureError("models disagree on the signature")
        self.models = tuple(models)
        self.signature = sig
        self.complete = len(models) == 1
        self._canon_cache: dict[Formula, tuple] = {}

    def entails_equal(self, f: Formula, g: Formula) -> bool:
        return self.canonical_key(f) == self.canonical_key(g)

    def is_consistent(self, f: Formula) -> bool:
        fv = sorted(free_vars(f))
        for m in self.models:
            for t in assignments(len(fv), m.base_size):
                if evaluate(m, f, dict(zip(fv, t))):
                    return True
        return False

    def canonical_key(self, f: Formula):
        key = self._canon_cache.get(f)
        if key is None:
            fv = tuple(sorted(free_vars(f)))
            parts = []
            for m in self.models:
                table = frozenset(
                    t for t in assignments(len(fv), m.base_size)
                    if evaluate(m, f, dict(zip(fv, t))))
                parts.append(reduce_table(fv, table, m.base_size))
            key = ("fm", tuple(parts))
            self._canon_cache[f] = key
        return key

    def conjunction_checker(self) -> "ModelAssignmentChecker":
        return ModelAssignmentChecker(self)


class ModelAssignmentChecker(ConjunctionChecker):
    """Keeps the surviving (model, assignment) pairs for the chain so far;
    consistency of chain + extras is non-emptiness after filtering."""

    _CAP = 2_000_000

    def __init__(self, oracle: FiniteModelOracle):
        self.oracle = oracle
        self.span: tuple[int, ...] = ()
        # pairs (model index, value tuple aligned with span)
        self.sats: set[tuple[int, tuple[int, ...]]] = {
            (i, ()) for i in range(len(oracle.models))}

    def _extended(self, span, sats, new_vars):
        new_vars = [v for v in new_vars if v not in span]
        if not new_vars:
            return span, sats
        target = tuple(sorted(set(span) | set(new_vars)))
        out = set()
        for mi, t in sats:
            base = self.oracle.models[mi].base_size
            old = dict(zip(span, t))
            for extra in assignments(len(new_vars), base):
                old_plus = {**old, **dict(zip(new_vars, extra))}
                out.add((mi, tuple(old_plus[v] for v in target)))
                if len(out) > self._CAP:
                    raise WorkbenchError("assignment sets blew the cap")
        return target, out

    def _filter(self, span, sats, extras):
        for f in extras:
            keep = set()
            for mi, t in sats:
                if evaluate(self.oracle.models[mi], f, dict(zip(span, t))):
                    keep.add((mi, t))
            sats = keep
            if not sats:
                break
        return sats

    def check(self, extras: Sequence[Formula]) -> bool:
        needed = set()
        for f in extras:
            needed |= free_vars(f)
        span, sats = self._extended(self.span, self.sats, sorted(needed))
        return bool(self._filter(span, sats, extras))

    def push(self, f: Formula) -> None:
        span, sats = self._extended(self.span, self.sats,
                                    sorted(free_vars(f)))
        self.span = span
        self.sats = self._filter(span, sats, [f])
        if not self.sats:
            raise WorkbenchError("pushed an inconsistent conjunct")


# ---------------------------------------------------------------------------
# Weak orderings (order types) of a finite variable set
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def weak_orderings(n: int) -> tuple[tuple[int, ...], ...]:
    """All surjective rank patterns on n positions (ordered set partitions).
    Counts 1, 1, 3, 13, 75, 541, ... for n = 0, 1, 2, 3, 4, 5, ..."""
    if n == 0:
        return ((),)
    out = []
    for t in weak_orderings(n - 1):
        blocks = (max(t) + 1) if t else 0
        for r in range(blocks + 1):      # new block at rank r
            out.append(tuple(x if x < r else x + 1 for x in t) + (r,))
        for r in range(blocks):          # join existing block r
            out.append(t + (r,))
    return tuple(out)


def ranking_pattern(ranks: Sequence[int]) -> tuple[int, ...]:
    """Normalize arbitrary rank values to a surjective 0..k-1 pattern."""
    order = sorted(set(ranks))
    remap = {v: i for i, v in enumerate(order)}
    return tuple(remap[v] for v in ranks)


# ---------------------------------------------------------------------------
# Dense linear order without endpoints
# ---------------------------------------------------------------------------

DLO_SIGNATURE = Signature("dlo", (("lt", 2),), equality=True)

_LT, _EQ = "lt", "eq"


def _mk_lt(a: int, b: int):
    return None if a == b else (_LT, a, b)          # lt(a,a) is false


def _mk_eq(a: int, b: int):
    if a == b:
        return ()                                   # eq(a,a) is true
    return (_EQ, min(a, b), max(a, b))


def _atoms_consistent(atoms: frozenset) -> bool:
    parent: dict[int, int] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for kind, a, b in atoms:
        if kind == _EQ:
            parent[find(a)] = find(b)
    edges = set()
    for kind, a, b in atoms:
        if kind == _LT:
            ra, rb = find(a), find(b)
            if ra == rb:
                return False
            edges.add((ra, rb))
    # cycle detection on the strict digraph
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    state: dict[int, int] = {}

    def dfs(x):
        state[x] = 1
        for y in adj.get(x, ()):
            if state.get(y) == 1:
                return False
            if state.get(y) is None and not dfs(y):
                return False
        state[x] = 2
        return True

    return all(state.get(x) == 2 or dfs(x) for x in list(adj))


def _dnf_and(d1: frozenset, d2: frozenset) -> frozenset:
    out = set()
    for c1 in d1:
        for c2 in d2:
            c = c1 | c2
            if _atoms_consistent(c):
                out.add(c)
    return frozenset(out)


def _dnf_not(dnf: frozenset) -> frozenset:
    # ~(C1 | ... | Ck) expanded disjunct by disjunct via trichotomy
    out = frozenset({frozenset()})
    for cube in dnf:
        negs = set()
        for kind, a, b in cube:
            if kind == _LT:
                for alt in (_mk_eq(a, b), _mk_lt(b, a)):
                    if alt == ():
                        negs.add(frozenset())
                    elif alt is not None:
                        negs.add(frozenset({alt}))
            else:
                negs.add(frozenset({(_LT, a, b)}))
                negs.add(frozenset({(_LT, b, a)}))
        out = _dnf_and(out, frozenset(negs))
        if not out:
            return out
    return out


def _eliminate_var(cube: frozenset, i: int) -> Optional[frozenset]:
    """Existentially eliminate v_i from a consistent positive cube, using
    density and the absence of endpoints.  None means the cube drops out."""
    eqs = [(a, b) for kind, a, b in cube if kind == _EQ and i in (a, b)]
    if eqs:
        a, b = eqs[0]
        e = b if a == i else a
        out = set()
        for kind, x, y in cube:
            if (kind, x, y) == (_EQ, *sorted((i, e))):
                continue
            x2, y2 = (e if x == i else x), (e if y == i else y)
            atom = _mk_lt(x2, y2) if kind == _LT else _mk_eq(x2, y2)
            if atom is None:
                return None
            if atom != ():
                out.add(atom)
        cube2 = frozenset(out)
        return cube2 if _atoms_consistent(cube2) else None
    lowers = [a for kind, a, b in cube if kind == _LT and b == i]
    uppers = [b for kind, a, b in cube if kind == _LT and a == i]
    rest = {at for at in cube if i not in (at[1], at[2])}
    for a in lowers:
        for b in uppers:
            atom = _mk_lt(a, b)
            if atom is None:
                return None
            rest.add(atom)
    rest = frozenset(rest)
    return rest if _atoms_consistent(rest) else None


def _qe_dnf(f: Formula) -> frozenset:
    """Quantifier-free positive DNF equivalent to f over DLO.
    Disjuncts are consistent frozensets of lt/eq atoms."""
    if isinstance(f, Top):
        return frozenset({frozenset()})
    if isinstance(f, Bottom):
        return frozenset()
    if isinstance(f, Rel):
        if f.sym != "lt" or len(f.args) != 2:
            raise SignatureError(f"DLO oracle knows only lt/2, got {f.sym}")
        atom = _mk_lt(*f.args)
        return frozenset() if atom is None else frozenset({frozenset({atom})})
    if isinstance(f, Eq):
        atom = _mk_eq(f.left, f.right)
        if atom == ():
            return frozenset({frozenset()})
        return frozenset({frozenset({atom})})
    if isinstance(f, Not):
        return _dnf_not(_qe_dnf(f.body))
    if isinstance(f, And):
        return _dnf_and(_qe_dnf(f.left), _qe_dnf(f.right))
    if isinstance(f, Or):
        return _qe_dnf(f.left) | _qe_dnf(f.right)
    if isinstance(f, Exists):
        out = set()
        for cube in _qe_dnf(f.body):
            cube2 = _eliminate_var(cube, f.var)
            if cube2 is not None:
                out.add(cube2)
        return frozenset(out)
    raise TypeError(f"not a formula: {f!r}")


def _dnf_holds(dnf: frozenset, ranking: Mapping[int, int]) -> bool:
    for cube in dnf:
        ok = True
        for kind, a, b in cube:
            if kind == _LT:
                if not ranking[a] < ranking[b]:
                    ok = False
                    break
            elif ranking[a] != ranking[b]:
                ok = False
                break
        if ok:
            return True
    return False


def dlo_satisfies(f: Formula, ranking: Mapping[int, int]) -> bool:
    """Direct recursive truth over the rational order: quantifiers range
    over all ways to place the bound variable relative to the current
    blocks.  Independent of the QE route; used to cross-check it."""
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, Rel):
        return ranking[f.args[0]] < ranking[f.args[1]]
    if isinstance(f, Eq):
        return ranking[f.left] == ranking[f.right]
    if isinstance(f, Not):
        return not dlo_satisfies(f.body, ranking)
    if isinstance(f, And):
        return dlo_satisfies(f.left, ranking) and dlo_satisfies(f.right, ranking)
    if isinstance(f, Or):
        return dlo_satisfies(f.left, ranking) or dlo_satisfies(f.right, ranking)
    if isinstance(f, Exists):
        base = {v: r for v, r in ranking.items() if v != f.var}
        blocks = sorted(set(base.values()))
        placements = []
        for idx in range(len(blocks) + 1):   # strictly between/outside blocks
            shifted = {v: 2 * blocks.index(r) + 1 for v, r in base.items()}
            placements.append({**shifted, f.var: 2 * idx})
        for r in blocks:                     # join an existing block
            shifted = {v: 2 * blocks.index(q) + 1 for v, q in base.items()}
            placements.append({**shifted, f.var: 2 * blocks.index(r) + 1})
        return any(dlo_satisfies(f.body, p) for p in placements)
    raise TypeError(f"not a formula: {f!r}")


class DloOracle(TheoryOracle):
    """Decides the complete theory of dense linear order without endpoints
    over the fixed signature {lt/2} with equality."""

    def __init__(self):
        self.signature = DLO_SIGNATURE
        self.complete = True
        self._canon_cache: dict[Formula, tuple] = {}
        self._qf_cache: dict[Formula, Formula] = {}

    # -- canonicalization ---------------------------------------------------

    def canonical_key(self, f: Formula):
        return ("dlo", self.canon(f))

    def canon(self, f: Formula) -> tuple:
        """(dims, satisfying rank patterns over dims), fully reduced."""
        got = self._canon_cache.get(f)
        if got is None:
            fv = tuple(sorted(free_vars(f)))
            if len(fv) > MAX_EXHAUSTED_VARS:
                raise WorkbenchError(
                    f"{len(fv)} free variables exceeds order-type exhaustion")
            dnf = _qe_dnf(f)
            sat = frozenset(
                pat for pat in weak_orderings(len(fv))
                if _dnf_holds(dnf, dict(zip(fv, pat))))
            got = _reduce_rankings(fv, sat)
            self._canon_cache[f] = got
        return got

    # -- oracle interface ---------------------------------------------------

    def is_consistent(self, f: Formula) -> bool:
        _, sat = self.canon(f)
        return bool(sat)

    def entails_equal(self, f: Formula, g: Formula) -> bool:
        fv = tuple(sorted(free_vars(f) | free_vars(g)))
        if len(fv) > MAX_EXHAUSTED_VARS:
            raise WorkbenchError(
                f"{len(fv)} joint free variables exceeds order-type exhaustion")
        dnf_f, dnf_g = _qe_dnf(f), _qe_dnf(g)
        for pat in weak_orderings(len(fv)):
            env = dict(zip(fv, pat))
            if _dnf_holds(dnf_f, env) != _dnf_holds(dnf_g, env):
                return False
        return True

    def quantifier_free(self, f: Formula) -> Formula:
        """Innermost-quantifier elimination; canonical positive form."""
        got = self._qf_cache.get(f)
        if got is None:
            dims, sat = self.canon(f)
            got = _rankings_to_formula(dims, sat)
            self._qf_cache[f] = got
        return got

    def conjunction_checker(self) -> "OrderDiagramChecker":
        return OrderDiagramChecker(self)


def dlo_qe(f: Formula) -> Formula:
    """Module-level convenience over a shared oracle instance."""
    return _shared_dlo().quantifier_free(f)


@lru_cache(maxsize=1)
def _shared_dlo() -> DloOracle:
    return DloOracle()


def _reduce_rankings(fv: tuple[int, ...], sat: frozenset) -> tuple:
    """Drop variables whose position never matters, one at a time."""
    fv = tuple(fv)
    while fv:
        dropped = None
        for i, v in enumerate(fv):
            projected = frozenset(
                ranking_pattern(pat[:i] + pat[i + 1:]) for pat in sat)
            if all((ranking_pattern(pat[:i] + pat[i + 1:]) in projected)
                   == (pat in sat) for pat in weak_orderings(len(fv))):
                dropped = (i, projected)
                break
        if dropped is None:
            break
        i, sat = dropped
        fv = fv[:i] + fv[i + 1:]
    return fv, frozenset(sat)


def _rankings_to_formula(dims: tuple[int, ...], sat: frozenset) -> Formula:
    if not dims:
        return TRUE if sat else FALSE
    disjuncts = []
    for pat in sorted(sat):
        env = dict(zip(dims, pat))
        atoms = []
        for i, a in enumerate(dims):
            for b in dims[i + 1:]:
                if env[a] < env[b]:
                    atoms.append(Rel("lt", (a, b)))
                elif env[a] > env[b]:
                    atoms.append(Rel("lt", (b, a)))
                else:
                    atoms.append(Eq(a, b))
        atoms.sort(key=format_formula)
        disjuncts.append(conj(atoms))
    disjuncts.sort(key=format_formula)
    out = disjuncts[-1]
    for d in reversed(disjuncts[:-1]):
        out = Or(d, out)
    return out


# ---------------------------------------------------------------------------
# Incremental order-diagram satisfiability for DLO chains
# ---------------------------------------------------------------------------

class _OrderState:
    """Strict/equal facts over variables, kept transitively closed."""

    def __init__(self):
        self.parent: dict[int, int] = {}
        self.strict: set[tuple[int, int]] = set()

    def copy(self) -> "_OrderState":
        st = _OrderState.__new__(_OrderState)
        st.parent = dict(self.parent)
        st.strict = set(self.strict)
        return st

    def find(self, x: int) -> int:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def relation(self, a: int, b: int) -> Optional[str]:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return "="
        if (ra, rb) in self.strict:
            return "<"
        if (rb, ra) in self.strict:
            return ">"
        return None

    def add_strict(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb or (rb, ra) in self.strict:
            return False
        if (ra, rb) in self.strict:
            return True
        below = {p for (p, q) in self.strict if q == ra} | {ra}
        above = {q for (p, q) in self.strict if p == rb} | {rb}
        for p in below:
            for q in above:
                if p == q or (q, p) in self.strict:
                    return False
                self.strict.add((p, q))
        return True

    def add_equal(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return True
        if (ra, rb) in self.strict or (rb, ra) in self.strict:
            return False
        self.parent[rb] = ra
        merged = set()
        for p, q in self.strict:
            p2 = ra if p == rb else p
            q2 = ra if q == rb else q
            if p2 == q2:
                return False
            merged.add((p2, q2))
        self.strict = merged
        # re-close: identification may create new paths through ra
        below = {p for (p, q) in self.strict if q == ra}
        above = {q for (p, q) in self.strict if p == ra}
        for p in below:
            for q in above:
                if p == q or (q, p) in self.strict:
                    return False
                self.strict.add((p, q))
        return True

    def apply_pattern(self, dims: Sequence[int], pat: Sequence[int]) -> bool:
        for i, a in enumerate(dims):
            for j in range(i + 1, len(dims)):
                b = dims[j]
                if pat[i] < pat[j]:
                    ok = self.add_strict(a, b)
                elif pat[i] > pat[j]:
                    ok = self.add_strict(b, a)
                else:
                    ok = self.add_equal(a, b)
                if not ok:
                    return False
        return True

    def pattern_fits(self, dims: Sequence[int], pat: Sequence[int]) -> bool:
        for i, a in enumerate(dims):
            for j in range(i + 1, len(dims)):
                b = dims[j]
                rel = self.relation(a, b)
                if rel is None:
                    continue
                want = "<" if pat[i] < pat[j] else (">" if pat[i] > pat[j] else "=")
                if rel != want:
                    return False
        return True

    def linearize(self, variables: Iterable[int]) -> dict[int, int]:
        """A total ranking respecting all facts (unknown pairs broken by
        topological order, then by variable id)."""
        variables = sorted(set(variables))
        reps = {self.find(v) for v in variables}
        order: list[int] = []
        marked: set[int] = set()

        def visit(r):
            if r in marked:
                return
            marked.add(r)
            for p, q in sorted(self.strict):
                if q == r and p in reps:
                    visit(p)
            order.append(r)

        for r in sorted(reps):
            visit(r)
        rank = {r: i for i, r in enumerate(order)}
        return {v: rank[self.find(v)] for v in variables}


class OrderDiagramChecker(ConjunctionChecker):
    """DLO chain consistency via per-conjunct order-type alternatives, a
    committed fact store, unit propagation, and a witness ranking for the
    common fast path."""

    def __init__(self, oracle: DloOracle):
        self.oracle = oracle
        self.state = _OrderState()
        self.variables: set[int] = set()
        # unresolved conjuncts: (dims, tuple of alternative patterns)
        self.open: list[tuple[tuple[int, ...], tuple]] = []
        self.witness: dict[int, int] = {}
        self._pending: Optional[tuple[tuple[Formula, ...], dict]] = None

    def _alternatives(self, f: Formula):
        dims, sat = self.oracle.canon(f)
        return dims, tuple(sorted(sat))

    def _witness_holds(self, f: Formula, witness: Mapping[int, int]) -> bool:
        dims, alts = self._alternatives(f)
        if not dims:
            return bool(alts)
        if any(v not in witness for v in dims):
            return False
        return ranking_pattern([witness[v] for v in dims]) in alts

    def _propagate(self) -> bool:
        changed = True
        while changed:
            changed = False
            still = []
            for dims, alts in self.open:
                fits = [p for p in alts if self.state.pattern_fits(dims, p)]
                if not fits:
                    return False
                if len(fits) == 1:
                    if not self.state.apply_pattern(dims, fits[0]):
                        return False
                    changed = True
                else:
                    still.append((dims, tuple(fits)))
            self.open = still
        return True

    def _solve(self, state: _OrderState, conjuncts) -> Optional[_OrderState]:
        # unit propagation
        while True:
            narrowed = []
            forced = False
            for dims, alts in conjuncts:
                fits = [p for p in alts if state.pattern_fits(dims, p)]
                if not fits:
                    return None
                if len(fits) == 1:
                    if not state.apply_pattern(dims, fits[0]):
                        return None
                    forced = True
                else:
                    narrowed.append((dims, tuple(fits)))
            conjuncts = narrowed
            if not forced:
                break
        if not conjuncts:
            return state
        conjuncts.sort(key=lambda c: len(c[1]))
        dims, alts = conjuncts[0]
        for pat in alts:
            branch = state.copy()
            if branch.apply_pattern(dims, pat):
                got = self._solve(branch, conjuncts[1:])
                if got is not None:
                    return got
        return None

    def check(self, extras: Sequence[Formula]) -> bool:
        extras = tuple(extras)
        parsed = []
        for f in extras:
            dims, alts = self._alternatives(f)
            if not alts:
                return False
            if not any(self.state.pattern_fits(dims, p) for p in alts):
                return False
            if dims:
                parsed.append((dims, alts))
        # fast path: extend the current witness over the new variables
        new_vars = sorted({v for dims, _ in parsed for v in dims}
                          - set(self.witness))
        if len(new_vars) <= 3:
            witness = self._extend_witness(self.witness, new_vars, extras)
            if witness is not None:
                self._pending = (extras, witness)
                return True
        # full solve
        state = self.state.copy()
        got = self._solve(state, list(self.open) + parsed)
        if got is None:
            return False
        witness = got.linearize(self.variables
                                | {v for d, _ in parsed for v in d})
        self._pending = (extras, witness)
        return True

    def _extend_witness(self, witness, new_vars, extras):
        if not new_vars:
            if all(self._witness_holds(f, witness) for f in extras):
                return dict(witness)
            return None
        v, rest = new_vars[0], new_vars[1:]
        blocks = sorted(set(witness.values()))
        spread = {u: 2 * blocks.index(r) + 1 for u, r in witness.items()}
        slots = [2 * i for i in range(len(blocks) + 1)]
        slots += [2 * blocks.index(r) + 1 for r in blocks]
        for s in slots:
            got = self._extend_witness({**spread, v: s}, rest, extras)
            if got is not None:
                return got
        return None

    def push(self, f: Formula) -> None:
        dims, alts = self._alternatives(f)
        if dims:
            fits = [p for p in alts if self.state.pattern_fits(dims, p)]
            if not fits:
                raise WorkbenchError("pushed an inconsistent conjunct")
            if len(fits) == 1:
                if not self.state.apply_pattern(dims, fits[0]):
                    raise WorkbenchError("pushed an inconsistent conjunct")
            else:
                self.open.append((dims, tuple(fits)))
            self.variables |= set(dims)
            if not self._propagate():
                raise WorkbenchError("pushed an inconsistent conjunct")
        if self._pending and f in self._pending[0]:
            witness = self._pending[1]
            if all(v in witness for v in self.variables):
                self.witness = dict(witness)
                return
        if not self._witness_holds(f, self.witness) or \
                any(v not in self.witness for v in self.variables):
            got = self._solve(self.state.copy(), list(self.open))
            if got is None:
                raise WorkbenchError("chain became inconsistent")
            self.witness = got.linearize(self.variables)


# ---------------------------------------------------------------------------
# External oracle over a line protocol
# ---------------------------------------------------------------------------

class ExternalOracle(TheoryOracle):
    """Plugs a subprocess in via stdio.  Requests are
    ``EQ <formula> ;; <formula>`` and ``SAT <formula>``; responses are
    ``YES``, ``NO`` or ``ERR <msg>``.  Queries serialize on a lock."""

    def __init__(self, command: Sequence[str], sig: Signature,
                 complete: bool = False):
        self.signature = sig
        self.complete = complete
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def _ask(self, line: str) -> bool:
        with self._lock:
            if self._proc.poll() is not None:
                raise OracleProtocolError("external oracle exited")
            try:
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
                reply = self._proc.stdout.readline().strip()
            except (BrokenPipeError, ValueError) as exc:
                raise OracleProtocolError(f"external oracle pipe: {exc}")
        if reply == "YES":
            return True
        if reply == "NO":
            return False
        if reply.startswith("ERR"):
            raise OracleProtocolError(reply[3:].strip() or "external oracle error")
        raise OracleProtocolError(f"unrecognized reply {reply!r}")

    def entails_equal(self, f: Formula, g: Formula) -> bool:
        return self._ask(f"EQ {format_formula(f)} ;; {format_formula(g)}")

    def is_consistent(self, f: Formula) -> bool:
        return self._ask(f"SAT {format_formula(f)}")

    def close(self):
        with self._lock:
            if self._proc.poll() is None:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# Convenience wrappers named by the dispatch they perform
# ---------------------------------------------------------------------------

def fm_entails_equal(oracle: FiniteModelOracle, f: Formula, g: Formula) -> bool:
    return oracle.entails_equal(f, g)


def oracle_entails_equal(oracle: TheoryOracle, f: Formula, g: Formula) -> bool:
    return oracle.entails_equal(f, g)


def oracle_is_consistent(oracle: TheoryOracle, f: Formula) -> bool:
    return oracle.is_consistent(f)
