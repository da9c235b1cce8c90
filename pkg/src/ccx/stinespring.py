"""Minimal dilations of unital CP maps and the attached covariant unitaries.

A dilation of a map from blocks [n_1..n_k] into M_d lives on

    K = (+)_b  C^{n_b} (x) C^{r_b},      rep(a) = (+)_b  a_b (x) I_{r_b},

with r_b the rank of the b-th Choi block, and V : C^d -> K the isometry
assembled from the canonical Kraus family.  Because the Kraus family comes
from the fixed eigendecomposition conventions, the dilation dimension and all
derived unitaries are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cpmaps import CPMap, invariance_defect
from .errors import (
    DimensionMismatchError,
    NotCPError,
    NotInvariantError,
    NotMinimalError,
    NotSameMapError,
    NotUnitalError,
)
from .groups import GroupAction, apply_action
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_complex,
    dagger,
    eigh_sorted,
    fro,
    numeric_rank,
)

__all__ = [
    "StinespringTriple",
    "CovariantUnitaries",
    "minimal_dilation",
    "verify_minimality",
    "dilation_unitary",
    "covariant_unitaries",
    "covariance_defects",
]


@dataclass(frozen=True, eq=False)
class StinespringTriple:
    """(rep, V, K) data for a dilation value(a) = V* rep(a) V."""

    domain: object            # StarAlgebra
    codomain_dim: int
    multiplicities: tuple     # r_b per block
    isometry: np.ndarray      # D x d
    minimal: bool

    @property
    def dilation_dim(self):
        return sum(n * r for n, r in zip(self.domain.block_dims, self.multiplicities))

    @cached_property
    def dilation_slices(self):
        out, off = [], 0
        for n, r in zip(self.domain.block_dims, self.multiplicities):
            out.append(slice(off, off + n * r))
            off += n * r
        return tuple(out)

    def rep(self, a):
        """rep(a) = (+)_b a_b (x) I_{r_b} on the dilation space."""
        a = as_complex(a)
        blocks = self.domain.blocks_of(a)
        d = self.dilation_dim
        out = np.zeros((d, d), dtype=complex)
        for blk, r, s in zip(blocks, self.multiplicities, self.dilation_slices):
            if r:
                out[s, s] = np.kron(blk, np.eye(r))
        return out

    @cached_property
    def rep_units(self):
        return tuple(self.rep(u) for u in self.domain.units)

    def compress(self, x):
        """V* x V for an operator x on the dilation space."""
        return dagger(self.isometry) @ as_complex(x) @ self.isometry

    def spanning_matrix(self, images=None):
        """Columns rep(E) V e_s over all units E and basis vectors e_s.

        With images given (one matrix per unit) those replace rep(E)."""
        mats = self.rep_units if images is None else images
        cols = [m @ self.isometry for m in mats]
        return np.hstack(cols) if cols else np.zeros((self.dilation_dim, 0), dtype=complex)


def minimal_dilation(cp_map: CPMap, tol: Tolerances = DEFAULT_TOL):
    """Minimal dilation triple of a unital CP map, built block-wise from the
    canonical Kraus family."""
    if not cp_map.is_cp:
        raise NotCPError("map is not completely positive at psd_floor")
    if not cp_map.is_unital:
        raise NotUnitalError("map is not unital at eq_tol")
    d = cp_map.codomain_dim
    mults = cp_map.kraus_ranks
    rows = []
    for ops, n in zip(cp_map.kraus, cp_map.domain.block_dims):
        r = len(ops)
        if r == 0:
            continue
        vb = np.zeros((n * r, d), dtype=complex)
        for j, k in enumerate(ops):
            vb[j::r, :] = k  # row (i, j) of C^{n_b} (x) C^{r_b} is i * r + j
        rows.append(vb)
    v = np.vstack(rows) if rows else np.zeros((0, d), dtype=complex)
    triple = StinespringTriple(
        domain=cp_map.domain,
        codomain_dim=d,
        multiplicities=mults,
        isometry=v,
        minimal=False,
    )
    triple = StinespringTriple(
        domain=triple.domain,
        codomain_dim=d,
        multiplicities=mults,
        isometry=v,
        minimal=verify_minimality(triple, tol),
    )
    return triple


def verify_minimality(triple: StinespringTriple, tol: Tolerances = DEFAULT_TOL):
    """True iff the vectors rep(E) V e_s span the whole dilation space."""
    span = triple.spanning_matrix()
    return numeric_rank(span, tol) == triple.dilation_dim


def reconstruction_defect(triple: StinespringTriple, cp_map: CPMap):
    """max_units || V* rep(E) V - value(E) ||_F."""
    vals = cp_map.unit_values()
    return max(
        fro(triple.compress(re) - val) for re, val in zip(triple.rep_units, vals)
    )


def _span_unitary(s1, s2, dim, tol: Tolerances):
    """Unitary U with U s1 = s2 for spanning sets with equal Gram matrices.

    Diagonalizes the (averaged) Gram matrix and matches the induced
    orthonormal frames; completes on any orthogonal complement by matching
    deterministic completions of the two frames.
    """
    g1 = dagger(s1) @ s1
    g2 = dagger(s2) @ s2
    mismatch = fro(g1 - g2)
    g = 0.5 * (g1 + g2)
    w, f = eigh_sorted(g, tol)
    lam_max = float(w[0]) if w.size else 0.0
    keep = [k for k in range(w.size) if w[k] > tol.rank_cut * lam_max]
    q1 = np.column_stack([s1 @ f[:, k] / np.sqrt(w[k]) for k in keep]) if keep else np.zeros((dim, 0), dtype=complex)
    q2 = np.column_stack([s2 @ f[:, k] / np.sqrt(w[k]) for k in keep]) if keep else np.zeros((dim, 0), dtype=complex)
    if len(keep) < dim:
        q1 = _complete_frame(q1, dim)
        q2 = _complete_frame(q2, dim)
    return q2 @ dagger(q1), mismatch


def _complete_frame(q, dim):
    """Deterministically extend orthonormal columns to a full basis."""
    cols = [q[:, k] for k in range(q.shape[1])]
    for i in range(dim):
        v = np.zeros(dim, dtype=complex)
        v[i] = 1.0
        for c in cols:
            v = v - np.vdot(c, v) * c
        nrm = np.linalg.norm(v)
        if nrm > 0.5 / np.sqrt(dim):
            cols.append(v / nrm)
        if len(cols) == dim:
            break
    return np.column_stack(cols)


def dilation_unitary(t1: StinespringTriple, t2: StinespringTriple, tol: Tolerances = DEFAULT_TOL):
    """The unitary between two minimal dilations of the same map.

    Maps the spanning set rep1(E) V1 e_s onto rep2(E) V2 e_s; this is
    well-defined because both Gram matrices are determined by the dilated map.
    """
    if (
        t1.domain.block_dims != t2.domain.block_dims
        or t1.codomain_dim != t2.codomain_dim
    ):
        raise DimensionMismatchError("dilations must share domain and codomain")
    for t in (t1, t2):
        if not (t.minimal and verify_minimality(t, tol)):
            raise NotMinimalError("both dilations must be minimal")
    vals1 = [t1.compress(m) for m in t1.rep_units]
    vals2 = [t2.compress(m) for m in t2.rep_units]
    dev = max(fro(a - b) for a, b in zip(vals1, vals2))
    if dev > 100 * tol.eq_tol:
        raise NotSameMapError(f"dilated maps differ by {dev:.3e}")
    if t1.dilation_dim != t2.dilation_dim:
        raise NotSameMapError("minimal dilations of one map must share dimension")
    u, mismatch = _span_unitary(
        t1.spanning_matrix(), t2.spanning_matrix(), t1.dilation_dim, tol
    )
    if mismatch > 100 * tol.eq_tol * max(1.0, t1.dilation_dim):
        raise NotSameMapError(f"Gram matrices differ by {mismatch:.3e}")
    return u


@dataclass(frozen=True, eq=False)
class CovariantUnitaries:
    """Per group element g a dilation-space unitary U_g with U_g V = V and
    U_g rep(a) U_g* = rep(tau_g(a))."""

    unitaries: tuple

    def __getitem__(self, g):
        return self.unitaries[g]

    def __len__(self):
        return len(self.unitaries)


def covariant_unitaries(
    cp_map: CPMap,
    triple: StinespringTriple,
    act: GroupAction,
    tol: Tolerances = DEFAULT_TOL,
):
    """Covariant unitary representation attached to an invariant map.

    U_g is defined on the spanning set by rep(a) V h |-> rep(tau_g(a)) V h;
    the assignment is isometric exactly because the map is invariant, and a
    non-invariant map raises NotInvariantError.
    """
    if act.algebra.block_dims != cp_map.domain.block_dims:
        raise DimensionMismatchError("action algebra does not match the map's domain")
    dev = invariance_defect(cp_map, act)
    if dev > tol.eq_tol:
        raise NotInvariantError(f"map is not invariant (defect {dev:.3e})")
    if not triple.minimal:
        raise NotMinimalError("covariant unitaries require a minimal dilation")
    base = triple.spanning_matrix()
    units = triple.domain.units
    out = []
    for g in range(act.group.order):
        images = [triple.rep(apply_action(act, g, u)) for u in units]
        moved = triple.spanning_matrix(images)
        u_g, mismatch = _span_unitary(base, moved, triple.dilation_dim, tol)
        if mismatch > 100 * tol.eq_tol * max(1.0, triple.dilation_dim):
            raise NotInvariantError(
                f"spanning-set assignment is not isometric at g={g} (defect {mismatch:.3e})"
            )
        out.append(u_g)
    return CovariantUnitaries(unitaries=tuple(out))


def covariance_defects(
    triple: StinespringTriple,
    act: GroupAction,
    cov: CovariantUnitaries,
    tol: Tolerances = DEFAULT_TOL,
):
    """Maximum deviations of the defining covariance identities.

    Returns a dict with 'fixes_isometry' (U_g V = V), 'intertwines'
    (U_g rep(a) U_g* = rep(tau_g a)), 'homomorphism' (U_g U_h = U_gh) and
    'unitarity' entries; all exact identities up to roundoff.
    """
    v = triple.isometry
    eye = np.eye(triple.dilation_dim)
    units = triple.domain.units
    fix = inter = hom = unit = 0.0
    for g in range(act.group.order):
        u_g = cov[g]
        unit = max(unit, fro(dagger(u_g) @ u_g - eye))
        fix = max(fix, fro(u_g @ v - v))
        for a in units:
            lhs = u_g @ triple.rep(a) @ dagger(u_g)
            rhs = triple.rep(apply_action(act, g, a))
            inter = max(inter, fro(lhs - rhs))
        for h in range(act.group.order):
            hom = max(hom, fro(cov[g] @ cov[h] - cov[act.group.mul(g, h)]))
    return {
        "fixes_isometry": fix,
        "intertwines": inter,
        "homomorphism": hom,
        "unitarity": unit,
    }
