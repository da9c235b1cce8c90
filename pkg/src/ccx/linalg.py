"""Dense complex-matrix kernel with explicit tolerances and fixed conventions.

Every eigendecomposition, rank decision, and null-space computation used by
the rest of the package goes through this module, so ordering and phase
conventions are made in exactly one place:

* Hermitian eigenvalues are sorted descending; ties are broken by the
  lexicographic order of the phase-fixed eigenvectors.
* The first entry of every returned eigenvector / null vector whose magnitude
  exceeds a small floor is made real and positive, removing the U(1) gauge
  freedom from all downstream constructions.
* All thresholds live in a single Tolerances record; there are no hidden
  constants in callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonHermitianError, NotPSDError, SingularError

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "dagger",
    "fro",
    "max_abs",
    "as_complex",
    "require_hermitian",
    "eigh_sorted",
    "psd_check",
    "herm_roots",
    "polar_unitary",
    "nullspace_basis",
    "numeric_rank",
    "haar_isometry",
    "haar_unitary",
]

# Entries below this magnitude are treated as zero when fixing phases.
_PHASE_FLOOR = 1e-9
# Rounding used for lexicographic tie-break keys.
_TIE_DECIMALS = 9
# Relative gap below which two eigenvalues count as tied.
_TIE_REL = 1e-12


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds threaded through every computation.

    rank_cut is relative to the largest singular value of the matrix at
    hand; the other three are absolute at desk scale (operator norms O(1)).
    """

    psd_floor: float = 1e-9
    rank_cut: float = 1e-9
    eq_tol: float = 1e-8
    herm_tol: float = 1e-10

    def __post_init__(self):
        for name in ("psd_floor", "rank_cut", "eq_tol", "herm_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOL = Tolerances()


def dagger(m):
    return np.conj(m).T


def fro(m):
    """Frobenius norm."""
    return float(np.linalg.norm(m))


def max_abs(m):
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def as_complex(m):
    """Return m as a complex array, rejecting NaN/Inf entries."""
    a = np.array(m, dtype=complex)
    if a.size and not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise ValueError("matrix entries must be finite")
    return a


def require_hermitian(m, tol: Tolerances = DEFAULT_TOL):
    """Check hermiticity within herm_tol and return the symmetrized matrix."""
    a = as_complex(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonHermitianError(f"expected a square matrix, got shape {a.shape}")
    dev = max_abs(a - dagger(a))
    if dev > tol.herm_tol:
        raise NonHermitianError(f"max |M - M*| = {dev:.3e} exceeds herm_tol = {tol.herm_tol:.1e}")
    return 0.5 * (a + dagger(a))


def _fix_phase(v):
    """Rotate v so its first entry of magnitude > _PHASE_FLOOR is real positive."""
    for x in v:
        if abs(x) > _PHASE_FLOOR:
            return v * (np.conj(x) / abs(x))
    return v


def _lex_key(v):
    return tuple(
        (round(float(x.real), _TIE_DECIMALS), round(float(x.imag), _TIE_DECIMALS)) for x in v
    )


def eigh_sorted(m, tol: Tolerances = DEFAULT_TOL):
    """Hermitian eigendecomposition with the package's fixed conventions.

    Returns (w, q) with eigenvalues w descending and phase-fixed eigenvector
    columns q.  Runs of eigenvalues equal up to a relative 1e-12 gap are
    ordered lexicographically by their eigenvectors, which makes multiplicity
    spaces (and hence all derived dilation data) reproducible.
    """
    h = require_hermitian(m, tol)
    if h.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    w, q = np.linalg.eigh(h)
    w = w[::-1].copy()
    cols = [_fix_phase(np.ascontiguousarray(q[:, k])) for k in range(q.shape[1] - 1, -1, -1)]

    scale = max(1.0, float(np.max(np.abs(w))))
    out_w, out_c = [], []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[start] - w[k] > _TIE_REL * scale:
            run = sorted(range(start, k), key=lambda i: _lex_key(cols[i]))
            out_w.extend(w[i] for i in run)
            out_c.extend(cols[i] for i in run)
            start = k
    return np.array(out_w), np.column_stack(out_c)


def psd_check(m, tol: Tolerances = DEFAULT_TOL):
    """True iff the (Hermitian) matrix has min eigenvalue >= -psd_floor."""
    w, _ = eigh_sorted(m, tol)
    return bool(w.size == 0 or w[-1] >= -tol.psd_floor)


def herm_roots(m, tol: Tolerances = DEFAULT_TOL):
    """Positive square root of a PSD matrix, and its inverse when it exists.

    Returns (sqrt, inv_sqrt) where inv_sqrt is None unless the minimum
    eigenvalue exceeds psd_floor.  Raises NotPSDError below -psd_floor.
    """
    w, q = eigh_sorted(m, tol)
    if w.size and w[-1] < -tol.psd_floor:
        raise NotPSDError(f"min eigenvalue {w[-1]:.3e} below -psd_floor")
    wc = np.clip(w, 0.0, None)
    root = (q * np.sqrt(wc)) @ dagger(q)
    root = 0.5 * (root + dagger(root))
    inv_root = None
    if w.size and w[-1] > tol.psd_floor:
        inv_root = (q * (1.0 / np.sqrt(wc))) @ dagger(q)
        inv_root = 0.5 * (inv_root + dagger(inv_root))
    return root, inv_root


def polar_unitary(m, tol: Tolerances = DEFAULT_TOL):
    """Unitary factor U of the polar decomposition M = U (M*M)^{1/2}."""
    a = as_complex(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SingularError(f"expected a square matrix, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a)
    if s.size == 0 or s[-1] <= tol.rank_cut * s[0]:
        raise SingularError("matrix is singular at the rank cutoff")
    return u @ vh


def nullspace_basis(m, tol: Tolerances = DEFAULT_TOL):
    """Orthonormal basis of the right null space at the relative rank cutoff.

    Vectors are ordered by singular value ascending (index ascending on
    ties) and phase-fixed.
    """
    a = as_complex(m)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    n = a.shape[1]
    if n == 0:
        return []
    u, s, vh = np.linalg.svd(a, full_matrices=True) if a.shape[0] else (None, np.zeros(0), np.eye(n, dtype=complex))
    cut = tol.rank_cut * float(s[0]) if s.size else 0.0
    pairs = [(float(s[k]) if k < s.size else 0.0, k) for k in range(n)]
    null_pairs = sorted((p for p in pairs if p[0] <= cut), key=lambda p: (p[0], p[1]))
    return [_fix_phase(np.conj(vh[k])) for _, k in null_pairs]


def numeric_rank(m, tol: Tolerances = DEFAULT_TOL):
    """Number of singular values above rank_cut relative to the largest."""
    a = as_complex(m)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol.rank_cut * s[0]))


def haar_isometry(rng, rows, cols):
    """Haar-like random isometry (rows x cols, rows >= cols) from rng."""
    if rows < cols:
        raise ValueError("an isometry needs rows >= cols")
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r).copy()
    d[np.abs(d) < 1e-300] = 1.0
    return q * (d / np.abs(d)).conj()


def haar_unitary(rng, n):
    return haar_isometry(rng, n, n)
