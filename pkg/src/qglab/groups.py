"""Finite groups as explicit multiplication tables.

Groups come with an optional dual pairing: for abelian G the table
``pairing[i][j] = <gamma_i, g_j>`` identifies the dual group with G itself
(character gamma_i times gamma_j is gamma_{table[i][j]}), which keeps every
dual-group computation an index computation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "FiniteGroupData",
    "cyclic_group",
    "direct_product",
    "symmetric_group",
    "affine_group",
    "subgroup_from_elements",
    "group_from_json",
]


@dataclass(frozen=True)
class FiniteGroupData:
    """A finite group given by its multiplication table.

    ``table[i][j]`` is the index of ``g_i g_j``.  ``pairing`` is present iff
    the group is abelian and satisfies ``pairing[i][j] = <gamma_i, g_j>``
    with ``gamma_i gamma_j = gamma_{table[i][j]}``.
    """

    order: int
    table: np.ndarray
    inverse: np.ndarray
    identity: int
    pairing: np.ndarray | None = None
    name: str = "G"

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.int64)
        if t.shape != (self.order, self.order):
            raise ValueError("multiplication table has wrong shape")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        inv = np.asarray(self.inverse, dtype=np.int64)
        inv.setflags(write=False)
        object.__setattr__(self, "inverse", inv)
        if self.pairing is not None:
            p = np.asarray(self.pairing, dtype=complex)
            p.setflags(write=False)
            object.__setattr__(self, "pairing", p)

    # -- structure checks ---------------------------------------------------

    def validate(self) -> None:
        n, t = self.order, self.table
        if not ((t >= 0) & (t < n)).all():
            raise ValueError("table entries out of range")
        for i in range(n):
            if len(set(t[i])) != n or len(set(t[:, i])) != n:
                raise ValueError("table rows/columns are not permutations")
        # associativity over all triples
        if not (t[t, :][:, :, :] == t[:, t]).all():
            raise ValueError("multiplication table is not associative")
        e = self.identity
        if not (t[e] == np.arange(n)).all() or not (t[:, e] == np.arange(n)).all():
            raise ValueError("identity element is wrong")
        if not (t[np.arange(n), self.inverse] == e).all():
            raise ValueError("inverse table is wrong")
        if self.pairing is not None:
            self.validate_pairing()

    def validate_pairing(self, tol: float = 1e-12) -> None:
        if self.pairing is None:
            raise ValueError("no pairing present")
        p = self.pairing
        if np.abs(np.abs(p) - 1.0).max() > tol:
            raise ValueError("pairing values must be unimodular")
        t = self.table
        for rowwise in (True, False):
            # each gamma_i is multiplicative; so is g |-> <., g>
            a = p if rowwise else p.T
            tt = t  # abelian, same table for the dual by construction
            for i in range(self.order):
                lhs = a[i][tt]
                rhs = np.multiply.outer(a[i], a[i])
                if np.abs(lhs - rhs).max() > tol:
                    raise ValueError("pairing is not a bicharacter table")

    def is_abelian(self) -> bool:
        return bool((self.table == self.table.T).all())

    def mul(self, i: int, j: int) -> int:
        return int(self.table[i, j])

    def inv(self, i: int) -> int:
        return int(self.inverse[i])

    def element_order(self, i: int) -> int:
        k, g = 1, i
        while g != self.identity:
            g = self.mul(g, i)
            k += 1
        return k

    def with_pairing(self) -> "FiniteGroupData":
        if self.pairing is not None:
            return self
        return _attach_pairing(self)


def _tables_from_mul(n: int, mul) -> tuple[np.ndarray, np.ndarray, int]:
    table = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            table[i, j] = mul(i, j)
    identity = next(
        i for i in range(n) if (table[i] == np.arange(n)).all() and (table[:, i] == np.arange(n)).all()
    )
    inverse = np.zeros(n, dtype=np.int64)
    for i in range(n):
        inverse[i] = int(np.nonzero(table[i] == identity)[0][0])
    return table, inverse, identity


def cyclic_group(n: int) -> FiniteGroupData:
    table, inverse, identity = _tables_from_mul(n, lambda i, j: (i + j) % n)
    omega = np.exp(2j * np.pi / n)
    pairing = omega ** np.outer(np.arange(n), np.arange(n))
    return FiniteGroupData(n, table, inverse, identity, pairing, name=f"Z{n}")


def direct_product(a: FiniteGroupData, b: FiniteGroupData) -> FiniteGroupData:
    n = a.order * b.order

    def mul(i, j):
        ia, ib = divmod(i, b.order)
        ja, jb = divmod(j, b.order)
        return a.mul(ia, ja) * b.order + b.mul(ib, jb)

    table, inverse, identity = _tables_from_mul(n, mul)
    pairing = None
    if a.pairing is not None and b.pairing is not None:
        pairing = np.kron(a.pairing, b.pairing)
    return FiniteGroupData(n, table, inverse, identity, pairing, name=f"{a.name}x{b.name}")


def symmetric_group(n: int) -> FiniteGroupData:
    elems = list(itertools.permutations(range(n)))
    index = {p: k for k, p in enumerate(elems)}

    def mul(i, j):
        p, q = elems[i], elems[j]
        return index[tuple(p[q[k]] for k in range(n))]

    table, inverse, identity = _tables_from_mul(len(elems), mul)
    return FiniteGroupData(len(elems), table, inverse, identity, name=f"S{n}")


def affine_group(p: int) -> FiniteGroupData:
    """Affine transformations x -> a x + b of the field F_p (a != 0).

    Element index is ``(a - 1) * p + b`` with a in 1..p-1, b in 0..p-1.
    Nonabelian of order p(p-1); the subgroup {b = 0} is cyclic of order p-1.
    """
    n = p * (p - 1)

    def unpack(i):
        return i // p + 1, i % p

    def pack(a, b):
        return (a - 1) * p + b

    def mul(i, j):
        a1, b1 = unpack(i)
        a2, b2 = unpack(j)
        return pack((a1 * a2) % p, (a1 * b2 + b1) % p)

    table, inverse, identity = _tables_from_mul(n, mul)
    return FiniteGroupData(n, table, inverse, identity, name=f"Aff(F{p})")


def _attach_pairing(g: FiniteGroupData) -> FiniteGroupData:
    """Build a self-dual pairing for a small abelian group.

    Handles cyclic groups and products of two cyclic factors, which covers
    every co-subgroup used at desk scale; other shapes raise.
    """
    if not g.is_abelian():
        raise ValueError("dual pairing only exists for abelian groups")
    n = g.order
    orders = [g.element_order(i) for i in range(n)]
    gens = [i for i in range(n) if orders[i] == n]
    if gens:
        gen = min(gens)
        omega = np.exp(2j * np.pi / n)
        power = np.zeros(n, dtype=np.int64)
        e, k = g.identity, 0
        x = e
        for k in range(n):
            power[x] = k
            x = g.mul(x, gen)
        pairing = omega ** np.outer(power, power)
        return FiniteGroupData(n, g.table, g.inverse, g.identity, pairing, g.name)
    # try Z_a x Z_b
    for i in range(n):
        for j in range(n):
            a, b = orders[i], orders[j]
            if a * b != n:
                continue
            seen = {}
            ok = True
            x = g.identity
            for s in range(a):
                y = x
                for t in range(b):
                    if y in seen:
                        ok = False
                        break
                    seen[y] = (s, t)
                    y = g.mul(y, j)
                if not ok:
                    break
                x = g.mul(x, i)
            if ok and len(seen) == n:
                wa = np.exp(2j * np.pi / a)
                wb = np.exp(2j * np.pi / b)
                pairing = np.zeros((n, n), dtype=complex)
                for u in range(n):
                    su, tu = seen[u]
                    for v in range(n):
                        sv, tv = seen[v]
                        pairing[u, v] = (wa ** (su * sv)) * (wb ** (tu * tv))
                return FiniteGroupData(n, g.table, g.inverse, g.identity, pairing, g.name)
    raise ValueError("could not construct a dual pairing for this abelian group")


@dataclass(frozen=True)
class SubgroupEmbedding:
    subgroup: FiniteGroupData
    parent_index: tuple[int, ...]  # subgroup element k sits at parent index parent_index[k]


def subgroup_from_elements(
    parent: FiniteGroupData, elements: Sequence[int], name: str | None = None
) -> SubgroupEmbedding:
    elems = sorted(set(int(e) for e in elements))
    pos = {e: k for k, e in enumerate(elems)}
    m = len(elems)
    table = np.zeros((m, m), dtype=np.int64)
    for a in elems:
        for b in elems:
            c = parent.mul(a, b)
            if c not in pos:
                raise ValueError("subset is not closed under multiplication")
            table[pos[a], pos[b]] = pos[c]
    identity = pos[parent.identity]
    inverse = np.array([pos[parent.inv(e)] for e in elems], dtype=np.int64)
    sub = FiniteGroupData(m, table, inverse, identity, name=name or f"{parent.name}-sub{m}")
    if sub.is_abelian():
        sub = sub.with_pairing()
    return SubgroupEmbedding(sub, tuple(elems))


def group_from_json(text: str) -> FiniteGroupData:
    """Load ``{"order": n, "table": [[...]]}``; inverse/identity are derived."""
    payload = json.loads(text)
    n = int(payload["order"])
    table = np.asarray(payload["table"], dtype=np.int64)
    if table.shape != (n, n):
        raise ValueError("table shape does not match order")
    identity = next(
        i
        for i in range(n)
        if (table[i] == np.arange(n)).all() and (table[:, i] == np.arange(n)).all()
    )
    inverse = np.zeros(n, dtype=np.int64)
    for i in range(n):
        hits = np.nonzero(table[i] == identity)[0]
        if len(hits) != 1:
            raise ValueError("table has no unique inverse")
        inverse[i] = hits[0]
    g = FiniteGroupData(n, table, inverse, identity, name=payload.get("name", "G"))
    g.validate()
    return g
