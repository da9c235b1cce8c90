"""The order-interval correspondence T <-> dominated invariant CP maps.

For an invariant unital CP map with minimal dilation (rep, V, K) and
covariant unitaries U_g, the operators T in the commutant of
rep(units) + {U_g} with 0 <= T <= I parametrize exactly the invariant CP
maps dominated by the base map, through

    forward:  T  |->  a -> V* rep(a) T V.

The inverse direction is solved as a certified least-squares problem over
real coordinates in the Hermitian commutant basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .algebra import commutant
from .cpmaps import CPMap, cp_leq, invariance_defect, validate_map
from .errors import (
    NotDominatedError,
    NotInCommutantError,
    NotInvariantError,
    OutOfIntervalError,
    ResidualTooLargeError,
)
from .groups import GroupAction
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_complex,
    dagger,
    eigh_sorted,
    fro,
    psd_check,
)
from .stinespring import CovariantUnitaries, StinespringTriple, covariant_unitaries, minimal_dilation

__all__ = [
    "DilationContext",
    "dilation_context",
    "RNOperator",
    "rn_operator",
    "rn_forward",
    "rn_inverse",
    "interval_sample",
]


@dataclass(frozen=True, eq=False)
class DilationContext:
    """Everything the interval correspondence needs about one base map."""

    base: CPMap
    action: GroupAction
    triple: StinespringTriple
    covariant: CovariantUnitaries
    commutant_basis: tuple  # Hermitian ONB, identity direction first

    @property
    def dilation_dim(self):
        return self.triple.dilation_dim

    @cached_property
    def generators(self):
        return tuple(self.triple.rep_units) + tuple(self.covariant.unitaries)

    @property
    def commutant_dim(self):
        return len(self.commutant_basis)


def dilation_context(cp_map: CPMap, act: GroupAction, tol: Tolerances = DEFAULT_TOL):
    """Build the dilation, covariant unitaries, and commutant basis for a map."""
    val = validate_map(cp_map, act, tol)
    if not (val.cp and val.unital):
        raise NotInvariantError("context requires a unital CP map")
    if not val.invariant:
        raise NotInvariantError(
            f"map is not invariant (defect {invariance_defect(cp_map, act):.3e})"
        )
    triple = minimal_dilation(cp_map, tol)
    cov = covariant_unitaries(cp_map, triple, act, tol)
    gens = list(triple.rep_units) + list(cov.unitaries)
    basis = commutant(gens, triple.dilation_dim, tol)
    return DilationContext(
        base=cp_map,
        action=act,
        triple=triple,
        covariant=cov,
        commutant_basis=tuple(basis),
    )


@dataclass(frozen=True, eq=False)
class RNOperator:
    """A validated interval element 0 <= T <= I of the dilation commutant."""

    operator: np.ndarray
    compression_invertible: bool


def _commutation_defect(ctx: DilationContext, t):
    return max(fro(t @ g - g @ t) for g in ctx.generators)


def _compression_invertible(ctx: DilationContext, t, tol: Tolerances):
    r = ctx.triple.compress(t)
    s = np.linalg.svd(r, compute_uv=False)
    return bool(s.size and s[-1] > tol.rank_cut * max(s[0], 1.0))


def rn_operator(ctx: DilationContext, t, tol: Tolerances = DEFAULT_TOL):
    """Wrap a raw matrix as an RNOperator, checking all interval invariants."""
    t = as_complex(t)
    d = ctx.dilation_dim
    if t.shape != (d, d):
        raise NotInCommutantError(f"operator of shape {t.shape}, expected ({d}, {d})")
    dev = _commutation_defect(ctx, t)
    if dev > 100 * tol.eq_tol:
        raise NotInCommutantError(f"operator leaves the commutant (defect {dev:.3e})")
    t = 0.5 * (t + dagger(t))
    if not psd_check(t, tol):
        raise OutOfIntervalError("operator is not PSD at psd_floor")
    if not psd_check(np.eye(d) - t, tol):
        raise OutOfIntervalError("I - T is not PSD at psd_floor")
    return RNOperator(
        operator=t, compression_invertible=_compression_invertible(ctx, t, tol)
    )


def rn_forward(ctx: DilationContext, t_op: RNOperator, tol: Tolerances = DEFAULT_TOL):
    """The dominated invariant CP map a -> V* rep(a) T V."""
    t = t_op.operator
    v = ctx.triple.isometry

    def value(u):
        return dagger(v) @ (ctx.triple.rep(u) @ (t @ v))

    out = CPMap.from_values(ctx.base.domain, ctx.base.codomain_dim, value, tol)
    # The correspondence guarantees these; verify rather than trust.
    if not out.is_cp:
        raise OutOfIntervalError("forward image failed the CP check")
    if invariance_defect(out, ctx.action) > 100 * tol.eq_tol:
        raise OutOfIntervalError("forward image failed the invariance check")
    if not cp_leq(out, ctx.base, tol):
        raise OutOfIntervalError("forward image is not dominated by the base map")
    return out


def rn_inverse(ctx: DilationContext, dominated: CPMap, tol: Tolerances = DEFAULT_TOL):
    """The unique commutant interval element mapping forward onto `dominated`.

    Solved by least squares over real coordinates in the Hermitian commutant
    basis; the residual is certified against eq_tol before returning.
    """
    dev = invariance_defect(dominated, ctx.action)
    if dev > tol.eq_tol:
        raise NotInvariantError(f"map is not invariant (defect {dev:.3e})")
    if not cp_leq(dominated, ctx.base, tol):
        raise NotDominatedError("map is not dominated by the base map")

    v = ctx.triple.isometry
    basis_maps = []
    for h in ctx.commutant_basis:
        vals = [dagger(v) @ (re @ (h @ v)) for re in ctx.triple.rep_units]
        basis_maps.append(np.concatenate([val.reshape(-1) for val in vals]))
    target = np.concatenate([val.reshape(-1) for val in dominated.unit_values()])

    a = np.stack(basis_maps, axis=1)
    a_real = np.vstack([a.real, a.imag])
    b_real = np.concatenate([target.real, target.imag])
    coeffs, *_ = np.linalg.lstsq(a_real, b_real, rcond=None)

    t = np.zeros((ctx.dilation_dim,) * 2, dtype=complex)
    for c, h in zip(coeffs, ctx.commutant_basis):
        t += float(c) * h
    residual = float(np.linalg.norm(a_real @ coeffs - b_real))
    if residual > tol.eq_tol * max(1.0, float(np.linalg.norm(b_real))):
        raise ResidualTooLargeError(
            f"inverse solve residual {residual:.3e} exceeds eq_tol; "
            "the map does not lie in the interval image"
        )
    return rn_operator(ctx, t, tol)


def interval_sample(
    ctx: DilationContext,
    seed=0,
    mode="basis_sweep",
    count=16,
    tol: Tolerances = DEFAULT_TOL,
):
    """Deterministic interval elements for sweeps and sampling loops.

    basis_sweep: for every Hermitian basis element S of the commutant, the
    clipped operators (I + S/(2||S||))/2 and (I - S/(2||S||))/2; their spectra
    lie in [1/4, 3/4], so every swept operator has invertible compression.
    random: `count` seeded convex combinations of the sweep operators.
    """
    d = ctx.dilation_dim
    eye = np.eye(d)
    sweep = []
    for s in ctx.commutant_basis:
        w, _ = eigh_sorted(s, tol)
        nrm = max(float(np.max(np.abs(w))), 1e-300)
        for sign in (1.0, -1.0):
            sweep.append(0.5 * (eye + sign * s / (2.0 * nrm)))
    if mode == "basis_sweep":
        chosen = sweep
    elif mode == "random":
        rng = np.random.default_rng(seed)
        chosen = []
        for _ in range(count):
            weights = rng.dirichlet(np.ones(len(sweep)))
            chosen.append(sum(w * t for w, t in zip(weights, sweep)))
    else:
        raise ValueError(f"unknown sampling mode: {mode!r}")
    return [rn_operator(ctx, t, tol) for t in chosen]
