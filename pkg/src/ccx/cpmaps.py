"""CP-map calculus: Choi/Kraus representations, validity, twirling, ordering.

A map from a StarAlgebra with blocks [n_1..n_k] into the d x d matrices is
stored Choi-first: one (n_b d) x (n_b d) Hermitian block per algebra block,

    C_b = sum_ij E_ij (x) value(E_ij^{(b)}),

so complete positivity and the CP order are exact eigenvalue tests.  The
Kraus family is a cache regenerated deterministically from the Choi blocks
through the fixed eigendecomposition conventions of ccx.linalg, which keeps
Kraus ranks and all derived dilation spaces reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import StarAlgebra
from .errors import (
    DimensionMismatchError,
    InvalidActionError,
    NotNormalizedError,
)
from .groups import GroupAction, apply_action, conditional_expectation, validate_action
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_complex,
    dagger,
    eigh_sorted,
    fro,
    haar_isometry,
    max_abs,
    psd_check,
)

__all__ = [
    "CPMap",
    "CCombination",
    "MapValidation",
    "validate_map",
    "invariance_defect",
    "cstar_combination",
    "twirl",
    "cstar_combine",
    "cp_leq",
    "choi_distance",
    "random_ucp",
    "random_invariant_ucp",
    "state_from_density",
    "inflation_map",
    "identity_map",
    "conjugation_map",
    "values_from_choi_blocks",
]


def _choi_from_values(alg: StarAlgebra, d, values):
    """Assemble per-block Choi matrices from the map's values on matrix units."""
    blocks = []
    idx = 0
    for n in alg.block_dims:
        c = np.zeros((n * d, n * d), dtype=complex)
        for i in range(n):
            for j in range(n):
                c[i * d : (i + 1) * d, j * d : (j + 1) * d] = values[idx]
                idx += 1
        blocks.append(0.5 * (c + dagger(c)))
    return blocks


def values_from_choi_blocks(alg: StarAlgebra, d, blocks):
    """Values on the matrix units read off the Choi blocks (inverse assembly)."""
    out = []
    for b, n in enumerate(alg.block_dims):
        c = blocks[b]
        for i in range(n):
            for j in range(n):
                out.append(np.array(c[i * d : (i + 1) * d, j * d : (j + 1) * d]))
    return out


@dataclass(frozen=True, eq=False)
class CPMap:
    """A linear map StarAlgebra -> M_d, stored via per-block Choi matrices.

    Immutable after construction; the canonical Kraus family and the cp /
    unital flags are computed eagerly so instances can be shared freely.
    """

    domain: StarAlgebra
    codomain_dim: int
    choi_blocks: tuple
    kraus: tuple
    is_cp: bool
    is_unital: bool

    @classmethod
    def from_choi_blocks(cls, domain, d, blocks, tol: Tolerances = DEFAULT_TOL):
        d = int(d)
        if len(blocks) != len(domain.block_dims):
            raise DimensionMismatchError("one Choi block per algebra block required")
        herm = []
        for blk, n in zip(blocks, domain.block_dims):
            b = as_complex(blk)
            if b.shape != (n * d, n * d):
                raise DimensionMismatchError(
                    f"Choi block of shape {b.shape}, expected ({n * d}, {n * d})"
                )
            dev = max_abs(b - dagger(b))
            if dev > 1e3 * tol.herm_tol * max(1.0, max_abs(b)):
                raise DimensionMismatchError(f"Choi block not Hermitian (deviation {dev:.3e})")
            herm.append(0.5 * (b + dagger(b)))
        kraus, cp = _kraus_from_choi(domain, d, herm, tol)
        unital = _is_unital(domain, d, kraus, tol)
        return cls(
            domain=domain,
            codomain_dim=d,
            choi_blocks=tuple(herm),
            kraus=kraus,
            is_cp=cp,
            is_unital=unital,
        )

    @classmethod
    def from_kraus(cls, domain, d, kraus_per_block, tol: Tolerances = DEFAULT_TOL):
        """Build from operators K_{b,j}: C^d -> C^{n_b} (the map acts as
        a |-> sum K* a_b K); the stored Kraus cache is regenerated canonically."""
        d = int(d)
        if len(kraus_per_block) != len(domain.block_dims):
            raise DimensionMismatchError("one Kraus list per algebra block required")
        blocks = []
        for ops, n in zip(kraus_per_block, domain.block_dims):
            c = np.zeros((n * d, n * d), dtype=complex)
            for k in ops:
                k = as_complex(k)
                if k.shape != (n, d):
                    raise DimensionMismatchError(
                        f"Kraus operator of shape {k.shape}, expected ({n}, {d})"
                    )
                w = np.conj(k.reshape(-1))
                c += np.outer(w, np.conj(w))
            blocks.append(c)
        return cls.from_choi_blocks(domain, d, blocks, tol)

    @classmethod
    def from_values(cls, domain, d, value_fn, tol: Tolerances = DEFAULT_TOL):
        """Build from a callable giving the map's value on each matrix unit."""
        vals = [as_complex(value_fn(u)) for u in domain.units]
        return cls.from_choi_blocks(domain, d, _choi_from_values(domain, d, vals), tol)

    def apply(self, a):
        """Evaluate the map on an ambient algebra element."""
        a = as_complex(a)
        if a.shape != (self.domain.ambient_dim,) * 2:
            raise DimensionMismatchError(
                f"matrix of shape {a.shape} not in the ambient space of the domain"
            )
        d = self.codomain_dim
        out = np.zeros((d, d), dtype=complex)
        for ops, s in zip(self.kraus, self.domain.block_slices):
            ab = a[s, s]
            for k in ops:
                out += dagger(k) @ ab @ k
        return out

    def unit_values(self):
        """Values on the matrix units, in basis order (read off the Choi blocks)."""
        return values_from_choi_blocks(self.domain, self.codomain_dim, self.choi_blocks)

    @property
    def kraus_ranks(self):
        return tuple(len(ops) for ops in self.kraus)


def _kraus_from_choi(alg, d, blocks, tol):
    """Canonical Kraus family per block; also reports complete positivity.

    Eigenvalues are cut relative to the largest eigenvalue across all blocks,
    so blocks carrying only numerical noise contribute no operators.
    """
    eigs = [eigh_sorted(c, tol) for c in blocks]
    lam_max = max((float(w[0]) if w.size else 0.0) for w, _ in eigs) if eigs else 0.0
    cp = all(w.size == 0 or w[-1] >= -tol.psd_floor for w, _ in eigs)
    cut = tol.rank_cut * lam_max
    kraus = []
    for (w, q), n in zip(eigs, alg.block_dims):
        ops = []
        for k in range(w.size):
            if w[k] > cut:
                ops.append(np.conj(np.sqrt(w[k]) * q[:, k]).reshape(n, d))
        kraus.append(tuple(ops))
    return tuple(kraus), cp


def _is_unital(alg, d, kraus, tol):
    acc = np.zeros((d, d), dtype=complex)
    for ops in kraus:
        for k in ops:
            acc += dagger(k) @ k
    return fro(acc - np.eye(d)) <= 10 * tol.eq_tol * max(1.0, d)


@dataclass
class MapValidation:
    cp: bool
    unital: bool
    invariant: bool | None  # None when no action was supplied

    def all_true(self):
        return self.cp and self.unital and (self.invariant is None or self.invariant)


def validate_map(cp_map: CPMap, act: GroupAction | None = None, tol: Tolerances = DEFAULT_TOL):
    """CP / unital / invariance flags for a map, the latter against an action."""
    invariant = None
    if act is not None:
        if act.algebra.block_dims != cp_map.domain.block_dims:
            raise DimensionMismatchError("action algebra does not match the map's domain")
        dev = invariance_defect(cp_map, act)
        invariant = dev <= tol.eq_tol
    return MapValidation(cp=cp_map.is_cp, unital=cp_map.is_unital, invariant=invariant)


def invariance_defect(cp_map: CPMap, act: GroupAction):
    """max_g max_units || value(tau_g(E)) - value(E) ||_F."""
    units = cp_map.domain.units
    vals = cp_map.unit_values()
    dev = 0.0
    for g in range(act.group.order):
        for u, v in zip(units, vals):
            dev = max(dev, fro(cp_map.apply(apply_action(act, g, u)) - v))
    return dev


def twirl(cp_map: CPMap, act: GroupAction, tol: Tolerances = DEFAULT_TOL):
    """Average the map over the group action; output is invariant, and the
    twirl is the identity on already-invariant maps."""
    if act.algebra.block_dims != cp_map.domain.block_dims:
        raise DimensionMismatchError("action algebra does not match the map's domain")
    report = validate_action(act, tol)
    if not report.valid:
        raise InvalidActionError("; ".join(report.failures[:3]))
    return CPMap.from_values(
        cp_map.domain,
        cp_map.codomain_dim,
        lambda u: cp_map.apply(conditional_expectation(act, u)),
        tol,
    )


@dataclass(frozen=True, eq=False)
class CCombination:
    """An operator-coefficient convex combination sum_i T_i* map_i(.) T_i."""

    terms: tuple  # of (coefficient, CPMap) pairs
    proper: bool  # every coefficient invertible at rank_cut


def cstar_combination(terms, tol: Tolerances = DEFAULT_TOL):
    """Validate coefficients and build a CCombination (sum T_i* T_i = I)."""
    if not terms:
        raise NotNormalizedError("a combination needs at least one term")
    d = terms[0][1].codomain_dim
    dom = terms[0][1].domain
    acc = np.zeros((d, d), dtype=complex)
    proper = True
    checked = []
    for t, m in terms:
        t = as_complex(t)
        if t.shape != (d, d):
            raise DimensionMismatchError(f"coefficient of shape {t.shape}, expected ({d}, {d})")
        if m.codomain_dim != d or m.domain.block_dims != dom.block_dims:
            raise DimensionMismatchError("all maps must share domain and codomain")
        acc += dagger(t) @ t
        s = np.linalg.svd(t, compute_uv=False)
        if s[-1] <= tol.rank_cut * s[0]:
            proper = False
        checked.append((t, m))
    if fro(acc - np.eye(d)) > tol.eq_tol * max(1.0, d):
        raise NotNormalizedError(
            f"sum T_i* T_i differs from the identity by {fro(acc - np.eye(d)):.3e}"
        )
    return CCombination(terms=tuple(checked), proper=proper)


def cstar_combine(comb: CCombination, tol: Tolerances = DEFAULT_TOL):
    """Evaluate the combination as a CPMap (UCP whenever every term is UCP)."""
    (t0, m0) = comb.terms[0]

    def value(u):
        out = np.zeros((m0.codomain_dim,) * 2, dtype=complex)
        for t, m in comb.terms:
            out += dagger(t) @ m.apply(u) @ t
        return out

    return CPMap.from_values(m0.domain, m0.codomain_dim, value, tol)


def cp_leq(lower: CPMap, upper: CPMap, tol: Tolerances = DEFAULT_TOL):
    """CP order: every Choi block of (upper - lower) PSD at psd_floor."""
    if (
        lower.domain.block_dims != upper.domain.block_dims
        or lower.codomain_dim != upper.codomain_dim
    ):
        raise DimensionMismatchError("maps must share domain and codomain")
    return all(
        psd_check(cu - cl, tol) for cl, cu in zip(lower.choi_blocks, upper.choi_blocks)
    )


def choi_distance(m1: CPMap, m2: CPMap):
    """Frobenius distance between Choi data (maximum over blocks)."""
    if (
        m1.domain.block_dims != m2.domain.block_dims
        or m1.codomain_dim != m2.codomain_dim
    ):
        raise DimensionMismatchError("maps must share domain and codomain")
    return max(fro(a - b) for a, b in zip(m1.choi_blocks, m2.choi_blocks))


# -- generators for tests, sampling, and fixtures ----------------------------


def random_ucp(rng, domain: StarAlgebra, d, ranks=None, tol: Tolerances = DEFAULT_TOL):
    """Seeded random unital CP map built by compressing a Haar-like isometry.

    Per block a multiplicity r_b is drawn (or given); the stacked isometry
    C^d -> (+)_b C^{n_b} (x) C^{r_b} is orthonormalized, which makes the map
    unital by construction.
    """
    dims = domain.block_dims
    if ranks is None:
        ranks = [int(rng.integers(1, n + 1)) for n in dims]
    ranks = list(ranks)
    while sum(n * r for n, r in zip(dims, ranks)) < d:
        b = int(np.argmax(dims))
        ranks[b] += 1
    total = sum(n * r for n, r in zip(dims, ranks))
    v = haar_isometry(rng, total, d)
    kraus, off = [], 0
    for n, r in zip(dims, ranks):
        vb = v[off : off + n * r]
        ops = [vb.reshape(n, r, d)[:, j, :] for j in range(r)]
        kraus.append(ops)
        off += n * r
    return CPMap.from_kraus(domain, d, kraus, tol)


def random_invariant_ucp(rng, act: GroupAction, d, ranks=None, tol: Tolerances = DEFAULT_TOL):
    """Seeded random element of the invariant UCP set: a twirled random UCP map."""
    return twirl(random_ucp(rng, act.algebra, d, ranks, tol), act, tol)


def state_from_density(domain: StarAlgebra, rho, tol: Tolerances = DEFAULT_TOL):
    """The codomain-dim-1 map a |-> tr(rho a) for a block-supported density."""
    rho = domain.project(as_complex(rho))
    return CPMap.from_values(domain, 1, lambda u: np.array([[np.trace(rho @ u)]]), tol)


def inflation_map(state: CPMap, d, tol: Tolerances = DEFAULT_TOL):
    """Inflate a state omega to a |-> omega(a) I_d."""
    if state.codomain_dim != 1:
        raise DimensionMismatchError("inflation_map expects a codomain-dim-1 map")
    eye = np.eye(d)
    return CPMap.from_values(
        state.domain, d, lambda u: complex(state.apply(u)[0, 0]) * eye, tol
    )


def identity_map(n, tol: Tolerances = DEFAULT_TOL):
    """The identity map on a single full block M_n."""
    alg = StarAlgebra((n,))
    return CPMap.from_kraus(alg, n, [[np.eye(n)]], tol)


def conjugation_map(w, tol: Tolerances = DEFAULT_TOL):
    """The automorphism a |-> W* a W of a single full block."""
    w = as_complex(w)
    n = w.shape[0]
    alg = StarAlgebra((n,))
    return CPMap.from_kraus(alg, n, [[w]], tol)
