"""Reduced-table plumbing shared by the set algebras and the oracles.

A table over a sorted dims tuple stands for the cylinder
``{s in base^omega : s|dims in table}``.  Reduction drops dummy coordinates
(those along which membership never varies), which makes the pair
(dims, table) a canonical representation of the cylinder.
"""

from __future__ import annotations

from itertools import product


def assignments(n_vars: int, base_size: int):
    """All tuples in base^n_vars, lexicographic."""
    return product(range(base_size), repeat=n_vars)


def expand_table(dims: tuple[int, ...], table: frozenset,
                 target: tuple[int, ...], base_size: int) -> frozenset:
    """Re-express a table over ``dims`` as one over ``target`` >= dims."""
    if dims == target:
        return table
    pos = {v: i for i, v in enumerate(target)}
    idx = [pos[v] for v in dims]
    out = set()
    for t in assignments(len(target), base_size):
        if tuple(t[i] for i in idx) in table:
            out.add(t)
    return frozenset(out)


def drop_coordinate(dims: tuple[int, ...], table: frozenset,
                    var: int) -> tuple[tuple[int, ...], frozenset]:
    """Existential projection of one coordinate."""
    i = dims.index(var)
    new_dims = dims[:i] + dims[i + 1:]
    return new_dims, frozenset(t[:i] + t[i + 1:] for t in table)


def reduce_table(dims: tuple[int, ...], table: frozenset,
                 base_size: int) -> tuple[tuple[int, ...], frozenset]:
    """Drop every dummy coordinate; the result is canonical."""
    if not table:
        return (), frozenset()
    dims = tuple(dims)
    changed = True
    while changed and dims:
        changed = False
        for i, v in enumerate(dims):
            groups: dict[tuple, set] = {}
            for t in table:
                groups.setdefault(t[:i] + t[i + 1:], set()).add(t[i])
            if all(len(vals) == base_size for vals in groups.values()):
                dims, table = drop_coordinate(dims, table, v)
                changed = True
                break
    return dims, frozenset(table)
