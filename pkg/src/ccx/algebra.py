"""Finite-dimensional C*-algebras as direct sums of full matrix blocks.

An algebra with block dimensions [n_1, ..., n_k] is embedded block-diagonally
in the ambient matrix space of size N = sum(n_b).  Elements are ambient N x N
matrices supported on the blocks; the matrix units E_ij per block form the
canonical basis, ordered block-major then row-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError
from .linalg import DEFAULT_TOL, Tolerances, as_complex, dagger, fro, nullspace_basis

__all__ = [
    "StarAlgebra",
    "SubAlgebraBasis",
    "basis_units",
    "commutant",
    "verify_subalgebra",
    "hermitian_basis_of_span",
]


@dataclass(frozen=True)
class StarAlgebra:
    """Direct sum of full matrix blocks, block-diagonal in M_N."""

    block_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.block_dims)
        if not dims or any(n <= 0 for n in dims):
            raise ValueError("block_dims must be a non-empty list of positive integers")
        object.__setattr__(self, "block_dims", dims)

    @property
    def ambient_dim(self):
        return sum(self.block_dims)

    @property
    def num_units(self):
        return sum(n * n for n in self.block_dims)

    @cached_property
    def block_slices(self):
        out, off = [], 0
        for n in self.block_dims:
            out.append(slice(off, off + n))
            off += n
        return tuple(out)

    @property
    def unit(self):
        return np.eye(self.ambient_dim, dtype=complex)

    def blocks_of(self, a):
        """Diagonal blocks of an ambient matrix."""
        a = as_complex(a)
        self._check_ambient(a)
        return [a[s, s] for s in self.block_slices]

    def embed_blocks(self, blocks):
        """Assemble an ambient matrix from per-block matrices."""
        if len(blocks) != len(self.block_dims):
            raise DimensionMismatchError("one matrix per block required")
        out = np.zeros((self.ambient_dim, self.ambient_dim), dtype=complex)
        for blk, s, n in zip(blocks, self.block_slices, self.block_dims):
            blk = as_complex(blk)
            if blk.shape != (n, n):
                raise DimensionMismatchError(f"block of shape {blk.shape}, expected ({n}, {n})")
            out[s, s] = blk
        return out

    @cached_property
    def units(self):
        """Matrix units E_ij per block, embedded in M_N (block-major, row-major)."""
        out = []
        for s, n in zip(self.block_slices, self.block_dims):
            for i in range(n):
                for j in range(n):
                    e = np.zeros((self.ambient_dim, self.ambient_dim), dtype=complex)
                    e[s.start + i, s.start + j] = 1.0
                    out.append(e)
        return tuple(out)

    @cached_property
    def unit_labels(self):
        """(block, i, j) triple for each matrix unit, same order as units."""
        out = []
        for b, n in enumerate(self.block_dims):
            for i in range(n):
                for j in range(n):
                    out.append((b, i, j))
        return tuple(out)

    def coords(self, a):
        """Coefficients of an ambient algebra element over the matrix units."""
        a = as_complex(a)
        self._check_ambient(a)
        return np.concatenate([a[s, s].reshape(-1) for s in self.block_slices])

    def from_coords(self, v):
        v = np.asarray(v, dtype=complex).reshape(-1)
        if v.size != self.num_units:
            raise DimensionMismatchError(f"expected {self.num_units} coordinates, got {v.size}")
        blocks, off = [], 0
        for n in self.block_dims:
            blocks.append(v[off : off + n * n].reshape(n, n))
            off += n * n
        return self.embed_blocks(blocks)

    def project(self, a):
        """Zero out entries of an ambient matrix outside the blocks."""
        return self.from_coords(self.coords(a))

    def contains(self, a, tol: Tolerances = DEFAULT_TOL):
        """Whether an ambient matrix is supported on the blocks (within eq_tol)."""
        a = as_complex(a)
        self._check_ambient(a)
        return fro(a - self.project(a)) <= tol.eq_tol * max(1.0, fro(a))

    def _check_ambient(self, a):
        n = self.ambient_dim
        if a.shape != (n, n):
            raise DimensionMismatchError(f"expected ambient shape ({n}, {n}), got {a.shape}")


@dataclass(frozen=True)
class SubAlgebraBasis:
    """Frobenius-orthonormal basis of a subspace of an ambient algebra."""

    parent: StarAlgebra
    basis: tuple

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(as_complex(b) for b in self.basis))

    @property
    def dim(self):
        return len(self.basis)

    def project(self, a):
        """Orthogonal projection of an ambient matrix onto the span."""
        a = as_complex(a)
        out = np.zeros_like(a)
        for b in self.basis:
            out += np.vdot(b, a) * b
        return out

    def in_span(self, a, tol: Tolerances = DEFAULT_TOL):
        a = as_complex(a)
        return fro(a - self.project(a)) <= tol.eq_tol * max(1.0, fro(a))


def basis_units(alg: StarAlgebra):
    """Ordered matrix-unit basis of the algebra, embedded in the ambient space."""
    return list(alg.units)


# -- real-linear span machinery for Hermitian bases --------------------------

# Rows below this Frobenius norm are numerical zeros of unit-norm inputs.
_NOISE_FLOOR = 1e-12


def _herm_real_vec(h):
    """Isometric real embedding of a Hermitian matrix (Frobenius inner product)."""
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate(
        [np.real(np.diagonal(h)), math.sqrt(2.0) * np.real(h[iu]), math.sqrt(2.0) * np.imag(h[iu])]
    )


def _herm_from_real_vec(v, n):
    iu = np.triu_indices(n, 1)
    k = iu[0].size
    h = np.zeros((n, n), dtype=complex)
    h[np.diag_indices(n)] = v[:n]
    h[iu] = (v[n : n + k] + 1j * v[n + k :]) / math.sqrt(2.0)
    h += np.triu(h, 1).conj().T
    return h


def _sign_fix(v):
    for x in v:
        if abs(x) > 1e-9:
            return v if x > 0 else -v
    return v


def hermitian_basis_of_span(mats, dim, tol: Tolerances = DEFAULT_TOL, pin_identity=True):
    """Hermitian Frobenius-orthonormal basis of the *-closed real span of mats.

    Each input matrix contributes its Hermitian and anti-Hermitian parts.  When
    pin_identity is set (and the identity lies in the span, as it does for any
    commutant) the first basis element is exactly I/sqrt(dim).
    """
    cands = []
    for x in mats:
        x = as_complex(x)
        cands.append(0.5 * (x + dagger(x)))
        cands.append((x - dagger(x)) / 2j)
    out = []
    first_vec = None
    if pin_identity:
        first = np.eye(dim, dtype=complex) / math.sqrt(dim)
        out.append(first)
        first_vec = _herm_real_vec(first)
    if not cands:
        return out
    rows = np.stack([_herm_real_vec(h) for h in cands])
    if first_vec is not None:
        rows = rows - np.outer(rows @ first_vec, first_vec)
    # Candidates are parts of unit-norm matrices, so rows at machine-noise
    # scale carry no direction; drop them before the relative rank cut.
    rows = rows[np.linalg.norm(rows, axis=1) > _NOISE_FLOOR]
    if rows.shape[0] == 0:
        return out
    u, s, vt = np.linalg.svd(rows, full_matrices=False)
    if s.size and s[0] > 0:
        keep = s > tol.rank_cut * s[0]
        for r in vt[keep]:
            out.append(_herm_from_real_vec(_sign_fix(r), dim))
    return out


def commutant(generators, dim, tol: Tolerances = DEFAULT_TOL):
    """Hermitian orthonormal basis of {X : XM = MX for every generator M}.

    The Kronecker-vectorized commutator equations are solved one generator at
    a time: each null space restricts the coefficient space carried forward,
    which keeps every SVD at the size of the current solution space.  The
    generator set is expected to be *-closed, in which case the commutant is
    a *-algebra and the returned Hermitian elements span it over the reals;
    the first element is always the normalized identity direction
    I/sqrt(dim).
    """
    dim = int(dim)
    basis = np.eye(dim * dim, dtype=complex).reshape(dim * dim, dim, dim)
    for g in generators:
        g = as_complex(g)
        if g.shape != (dim, dim):
            raise DimensionMismatchError(f"generator of shape {g.shape}, expected ({dim}, {dim})")
        if basis.shape[0] == 0:
            break
        image = np.einsum("kij,jl->kil", basis, g) - np.einsum("ij,kjl->kil", g, basis)
        system = image.reshape(basis.shape[0], dim * dim).T
        # a constraint that is pure roundoff at the generators' scale holds
        # identically on the current space; a relative rank cut would
        # misread its noise as full rank
        if fro(system) <= _NOISE_FLOOR * max(1.0, fro(g)) * basis.shape[0]:
            continue
        coeffs = nullspace_basis(system, tol)
        if not coeffs:
            basis = basis[:0]
            break
        basis = np.einsum("ck,kij->cij", np.stack(coeffs), basis)
    mats = [basis[k] for k in range(basis.shape[0])]
    return hermitian_basis_of_span(mats, dim, tol, pin_identity=True)


def verify_subalgebra(sub: SubAlgebraBasis, tol: Tolerances = DEFAULT_TOL):
    """Whether the span is closed under products and adjoints within eq_tol."""
    for b in sub.basis:
        if not sub.in_span(dagger(b), tol):
            return False
    for x in sub.basis:
        for y in sub.basis:
            if not sub.in_span(x @ y, tol):
                return False
    return True
