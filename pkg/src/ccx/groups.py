"""Finite groups and their actions on a StarAlgebra by *-automorphisms.

Groups are given by explicit multiplication tables (indices into 0..order-1).
Actions come in two kinds:

* inner    -- tau_g(a) = W_g* a W_g for a unitary W_g in the ambient space;
* general  -- tau_g given as a linear map on matrix-unit coordinates.

validate_action checks the group axioms, the homomorphism property, and the
per-element automorphism axioms on the matrix-unit basis, reporting every
failure instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import StarAlgebra
from .errors import BadIndexError, DimensionMismatchError, InvalidActionError
from .linalg import DEFAULT_TOL, Tolerances, as_complex, dagger, fro, numeric_rank

__all__ = [
    "FiniteGroup",
    "GroupAction",
    "ActionReport",
    "trivial_group",
    "cyclic_group",
    "dihedral_group",
    "direct_product",
    "inner_action",
    "coordinate_action",
    "validate_action",
    "apply_action",
    "conditional_expectation",
]


@dataclass(eq=False)
class FiniteGroup:
    """A finite group presented by its multiplication table."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=int)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] == 0:
            raise ValueError("multiplication table must be square and non-empty")
        self.table = t
        self.identity = self._find_identity()

    @property
    def order(self):
        return self.table.shape[0]

    def _find_identity(self):
        n = self.order
        for e in range(n):
            if np.array_equal(self.table[e], np.arange(n)) and np.array_equal(
                self.table[:, e], np.arange(n)
            ):
                return e
        return None

    def mul(self, g, h):
        return int(self.table[g, h])

    def inv(self, g):
        if self.identity is None:
            raise InvalidActionError("group has no identity element")
        hits = np.where(self.table[g] == self.identity)[0]
        if hits.size != 1:
            raise InvalidActionError(f"element {g} has no unique inverse")
        return int(hits[0])

    def axiom_failures(self):
        """List of group-axiom violations (empty for a genuine group)."""
        fails = []
        n = self.order
        t = self.table
        if t.min() < 0 or t.max() >= n:
            return [f"table entries must lie in 0..{n - 1}"]
        for g in range(n):
            if len(set(t[g])) != n:
                fails.append(f"row {g} is not a permutation (Latin square fails)")
            if len(set(t[:, g])) != n:
                fails.append(f"column {g} is not a permutation (Latin square fails)")
        for g in range(n):
            for h in range(n):
                for k in range(n):
                    if t[t[g, h], k] != t[g, t[h, k]]:
                        fails.append(f"associativity fails at ({g}, {h}, {k})")
                        break
                else:
                    continue
                break
        if self.identity is None:
            fails.append("no identity element")
        else:
            for g in range(n):
                if self.identity not in t[g]:
                    fails.append(f"element {g} has no inverse")
        return fails


def trivial_group():
    return FiniteGroup(np.zeros((1, 1), dtype=int))


def cyclic_group(n):
    idx = np.arange(n)
    return FiniteGroup((idx[:, None] + idx[None, :]) % n)


def dihedral_group(n):
    """Dihedral group of order 2n; element 2k+s is rotation^k * reflection^s."""
    order = 2 * n
    table = np.zeros((order, order), dtype=int)
    for a in range(order):
        ka, sa = divmod(a, 2)
        for b in range(order):
            kb, sb = divmod(b, 2)
            k = (ka + (kb if sa == 0 else -kb)) % n
            table[a, b] = 2 * k + (sa ^ sb)
    return FiniteGroup(table)


def direct_product(g1: FiniteGroup, g2: FiniteGroup):
    n1, n2 = g1.order, g2.order
    table = np.zeros((n1 * n2, n1 * n2), dtype=int)
    for a1 in range(n1):
        for a2 in range(n2):
            for b1 in range(n1):
                for b2 in range(n2):
                    table[a1 * n2 + a2, b1 * n2 + b2] = g1.mul(a1, b1) * n2 + g2.mul(a2, b2)
    return FiniteGroup(table)


@dataclass(eq=False)
class GroupAction:
    """A finite group acting on a StarAlgebra."""

    group: FiniteGroup
    algebra: StarAlgebra
    unitaries: list | None = None         # inner kind: one ambient unitary per element
    coordinate_maps: list | None = None   # general kind: one m x m matrix per element

    def __post_init__(self):
        if (self.unitaries is None) == (self.coordinate_maps is None):
            raise InvalidActionError("exactly one of unitaries / coordinate_maps required")
        n = self.group.order
        amb = self.algebra.ambient_dim
        m = self.algebra.num_units
        if self.unitaries is not None:
            ws = [as_complex(w) for w in self.unitaries]
            if len(ws) != n:
                raise DimensionMismatchError(f"expected {n} unitaries, got {len(ws)}")
            for w in ws:
                if w.shape != (amb, amb):
                    raise DimensionMismatchError(f"unitary of shape {w.shape}, expected ({amb}, {amb})")
            self.unitaries = ws
        else:
            ls = [as_complex(l) for l in self.coordinate_maps]
            if len(ls) != n:
                raise DimensionMismatchError(f"expected {n} coordinate maps, got {len(ls)}")
            for l in ls:
                if l.shape != (m, m):
                    raise DimensionMismatchError(f"coordinate map of shape {l.shape}, expected ({m}, {m})")
            self.coordinate_maps = ls

    @property
    def kind(self):
        return "inner" if self.unitaries is not None else "general"


def inner_action(group, algebra, unitaries):
    return GroupAction(group=group, algebra=algebra, unitaries=list(unitaries))


def coordinate_action(group, algebra, coordinate_maps):
    return GroupAction(group=group, algebra=algebra, coordinate_maps=list(coordinate_maps))


def apply_action(act: GroupAction, g, a):
    """tau_g(a) for an ambient matrix a."""
    if not 0 <= g < act.group.order:
        raise BadIndexError(f"group index {g} out of range 0..{act.group.order - 1}")
    a = as_complex(a)
    if act.kind == "inner":
        w = act.unitaries[g]
        if a.shape != w.shape:
            raise DimensionMismatchError(f"matrix of shape {a.shape} not in the ambient space")
        return dagger(w) @ a @ w
    return act.algebra.from_coords(act.coordinate_maps[g] @ act.algebra.coords(a))


def conditional_expectation(act: GroupAction, a):
    """Average of tau_g(a) over the group: the projection onto the fixed points."""
    out = np.zeros_like(as_complex(a))
    for g in range(act.group.order):
        out += apply_action(act, g, a)
    return out / act.group.order


@dataclass
class ActionReport:
    valid: bool
    failures: list = field(default_factory=list)


def _unit_label(alg: StarAlgebra, idx):
    b, i, j = alg.unit_labels[idx]
    core = f"E{i + 1}{j + 1}"
    return core if len(alg.block_dims) == 1 else f"b{b}:{core}"


def validate_action(act: GroupAction, tol: Tolerances = DEFAULT_TOL):
    """Check group axioms, the homomorphism property, and automorphism axioms.

    Failures are collected per (g, basis element) and reported, never thrown.
    """
    fails = list(act.group.axiom_failures())
    alg = act.algebra
    units = alg.units
    n = act.group.order
    scale = tol.eq_tol

    def close(x, y):
        return fro(x - y) <= scale * max(1.0, fro(x))

    if act.kind == "inner":
        eye = np.eye(alg.ambient_dim)
        for g, w in enumerate(act.unitaries):
            if not close(dagger(w) @ w, eye):
                fails.append(f"unitarity fails at g={g}")
    else:
        for g, l in enumerate(act.coordinate_maps):
            if numeric_rank(l, tol) != alg.num_units:
                fails.append(f"bijectivity fails at g={g}")

    images = [[apply_action(act, g, e) for e in units] for g in range(n)]

    if act.group.identity is not None:
        e = act.group.identity
        for idx, u in enumerate(units):
            if not close(images[e][idx], u):
                fails.append(f"identity action fails at (g={e}, {_unit_label(alg, idx)})")
                break

    for g in range(n):
        ident = alg.unit
        if not close(apply_action(act, g, ident), ident):
            fails.append(f"unitality fails at g={g}")
        for idx, u in enumerate(units):
            img = images[g][idx]
            if not alg.contains(img, tol):
                fails.append(f"algebra closure fails at (g={g}, {_unit_label(alg, idx)})")
                break
        for idx in range(len(units)):
            b, i, j = alg.unit_labels[idx]
            adj_idx = idx - (i - j) * alg.block_dims[b] + (i - j)  # index of E_ji in same block
            if not close(dagger(images[g][idx]), images[g][adj_idx]):
                fails.append(f"adjoint preservation fails at (g={g}, {_unit_label(alg, idx)})")
                break
        mult_ok = True
        for ia, ua in enumerate(units):
            for ib, ub in enumerate(units):
                prod = ua @ ub
                lhs = apply_action(act, g, prod)
                rhs = images[g][ia] @ images[g][ib]
                if not close(lhs, rhs):
                    fails.append(
                        "multiplicativity failed at "
                        f"(g={g}, {_unit_label(alg, ia)}·{_unit_label(alg, ib)})"
                    )
                    mult_ok = False
                    break
            if not mult_ok:
                break

    for g in range(n):
        for h in range(n):
            gh = act.group.mul(g, h)
            ok = True
            for idx in range(len(units)):
                if not close(apply_action(act, g, images[h][idx]), images[gh][idx]):
                    fails.append(
                        f"homomorphism fails at (g={g}, h={h}, {_unit_label(alg, idx)})"
                    )
                    ok = False
                    break
            if not ok:
                break

    return ActionReport(valid=not fails, failures=fails)
