"""Signature-aware linear algebra for small dense problems.

Conventions: the quadratic form on R^{s+n} is diag(-1 x s, +1 x (n-s))
with the time-like slots always occupying the FIRST s coordinates.  All
operations are pure functions over immutable values; the array helpers at
the bottom (`pseudo_dot`, `batched_normal`, ...) are the vectorized forms
used by the heavier modules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, RegularityError, ValidationError


@dataclass(frozen=True)
class Signature:
    """Signature (s, n): s time-like slots out of n total."""

    time: int
    total: int

    def __post_init__(self):
        if not (0 <= self.time <= self.total):
            raise ValidationError(f"signature requires 0 <= s <= n, got s={self.time}, n={self.total}")

    @property
    def signs(self) -> np.ndarray:
        out = np.ones(self.total)
        out[: self.time] = -1.0
        return out


@dataclass(frozen=True)
class PseudoVector:
    """Coordinate vector together with the signature of its ambient form."""

    coords: np.ndarray
    sig: Signature

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.shape[0] != self.sig.total:
            raise DimensionMismatchError(
                f"coordinate length {coords.shape} does not match signature n={self.sig.total}"
            )
        coords = coords.copy()
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)


class SymMatrix:
    """Symmetric real matrix stored as its upper triangle.

    entry(i, j) == entry(j, i) holds exactly because only one copy is kept.
    """

    def __init__(self, dim: int, data: np.ndarray | None = None):
        self.dim = int(dim)
        n = self.dim * (self.dim + 1) // 2
        if data is None:
            self._tri = np.zeros(n)
        else:
            data = np.asarray(data, dtype=float)
            if data.shape != (n,):
                raise DimensionMismatchError(f"expected packed triangle of length {n}, got {data.shape}")
            self._tri = data.copy()

    @classmethod
    def from_array(cls, M: np.ndarray, sym_tol: float = 1e-9) -> "SymMatrix":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionMismatchError(f"expected square matrix, got {M.shape}")
        if np.max(np.abs(M - M.T)) > sym_tol * (1.0 + np.max(np.abs(M))):
            raise ValidationError("matrix is not symmetric within tolerance")
        sym = 0.5 * (M + M.T)
        iu = np.triu_indices(M.shape[0])
        return cls(M.shape[0], sym[iu])

    def _index(self, i: int, j: int) -> int:
        if j < i:
            i, j = j, i
        return i * self.dim - i * (i - 1) // 2 + (j - i)

    def entry(self, i: int, j: int) -> float:
        return float(self._tri[self._index(i, j)])

    def set_entry(self, i: int, j: int, value: float) -> None:
        self._tri[self._index(i, j)] = value

    def to_array(self) -> np.ndarray:
        M = np.zeros((self.dim, self.dim))
        iu = np.triu_indices(self.dim)
        M[iu] = self._tri
        M.T[iu] = self._tri
        return M


def inner(u: PseudoVector, v: PseudoVector) -> float:
    """Indefinite inner product -sum over time slots + sum over space slots."""
    if u.sig != v.sig:
        raise DimensionMismatchError(f"signature mismatch: {u.sig} vs {v.sig}")
    return float(np.sum(u.coords * v.coords * u.sig.signs))


def is_lightlike(v: PseudoVector, tol: float = 1e-12) -> bool:
    """True iff v is nonzero and |<v,v>| <= tol * sum(v_i^2)."""
    sq = float(np.sum(v.coords**2))
    if sq == 0.0:
        return False
    return abs(inner(v, v)) <= tol * sq


def gram_schmidt_spacelike(
    vectors: Sequence[PseudoVector], pivot_tol: float = 1e-12
) -> list[PseudoVector]:
    """Orthonormalize a space-like family, triangular in the input order.

    Requires the form restricted to the span to be positive definite; a
    pivot <= pivot_tol * (Euclidean scale) raises RegularityError with the
    offending value.
    """
    if not vectors:
        return []
    sig = vectors[0].sig
    basis: list[np.ndarray] = []
    for v in vectors:
        if v.sig != sig:
            raise DimensionMismatchError("mixed signatures in Gram-Schmidt input")
        w = v.coords.astype(float).copy()
        for e in basis:
            w = w - np.sum(w * e * sig.signs) * e
        pivot = float(np.sum(w * w * sig.signs))
        scale = float(np.sum(w * w)) + float(np.sum(v.coords**2))
        if pivot <= pivot_tol * max(scale, 1.0):
            raise RegularityError(
                f"non-space-like or degenerate pivot <v,v> = {pivot:.3e} during orthonormalization"
            )
        basis.append(w / np.sqrt(pivot))
    return [PseudoVector(e, sig) for e in basis]


def sym_eigen(M: SymMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenbasis of a symmetric matrix.

    Deterministic: each eigenvector's entry of largest magnitude (first such
    index on ties) is made positive.
    """
    A = M.to_array() if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)
    A = 0.5 * (A + A.T)
    w, Q = np.linalg.eigh(A)
    for k in range(Q.shape[1]):
        col = Q[:, k]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0:
            Q[:, k] = -col
    return w, Q


def cluster_eigenvalues(
    values: Sequence[float], rel_tol: float = 1e-6
) -> list[tuple[float, int]]:
    """Greedy gap clustering of a sorted spectrum.

    Consecutive values within rel_tol * scale merge, scale = max(1, spectral
    radius).  Returns (cluster mean, multiplicity) pairs; multiplicities sum
    to the input length.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1:
        raise DimensionMismatchError("expected a 1-d spectrum")
    if vals.size == 0:
        return []
    if np.any(np.diff(vals) < 0):
        raise ValidationError("spectrum must be sorted ascending")
    scale = max(1.0, float(np.max(np.abs(vals))))
    gap = rel_tol * scale
    clusters: list[tuple[float, int]] = []
    start = 0
    for i in range(1, vals.size + 1):
        if i == vals.size or vals[i] - vals[i - 1] > gap:
            chunk = vals[start:i]
            clusters.append((float(np.mean(chunk)), int(chunk.size)))
            start = i
    return clusters


# ---------------------------------------------------------------------------
# vectorized helpers (batch axis first)
# ---------------------------------------------------------------------------

def form_signs(time: int, total: int) -> np.ndarray:
    return Signature(time, total).signs


def pseudo_dot(a: np.ndarray, b: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """<a,b> along the last axis under diag(signs)."""
    return np.einsum("...c,c,...c->...", a, signs, b)


def batched_normal(rows: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Unit time-like vector orthogonal (w.r.t. the form) to each row set.

    rows: (N, d-1, d).  Uses the generalized cross product: the Euclidean
    cofactor normal of the rows, then signs applied to convert Euclidean
    orthogonality into form orthogonality.  Deterministic orientation: the
    first component exceeding 1e-9 * |n| is made negative.  Smooth in the
    rows as long as that component stays away from zero on the patch.
    """
    N, k, d = rows.shape
    if k != d - 1:
        raise DimensionMismatchError(f"need d-1={d-1} rows, got {k}")
    cof = np.empty((N, d))
    cols = np.arange(d)
    for c in range(d):
        minor = rows[:, :, cols != c]
        cof[:, c] = (-1.0) ** c * np.linalg.det(minor)
    n = cof * signs
    nn = pseudo_dot(n, n, signs)
    bad = nn >= 0
    if np.any(bad):
        raise RegularityError(
            f"normal direction is not time-like (worst <n,n> = {np.max(nn):.3e}); "
            "tangent frame degenerate or not space-like"
        )
    n = n / np.sqrt(-nn)[:, None]
    # orientation rule
    mags = np.abs(n)
    norms = np.linalg.norm(n, axis=1, keepdims=True)
    lead = np.argmax(mags > 1e-9 * norms, axis=1)
    flip = n[np.arange(N), lead] > 0
    n[flip] *= -1.0
    return n


def triangular_frame(g: np.ndarray) -> np.ndarray:
    """Frame coefficients F with F^T g F = I, upper triangular.

    g: (N, m, m) positive definite.  Column i of F gives the coefficients of
    the i-th frame vector in the coordinate basis; the construction is the
    inverse transpose Cholesky factor, hence smooth in g and triangular with
    respect to the coordinate order.
    """
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise RegularityError(f"induced metric not positive definite: {exc}") from exc
    return np.linalg.inv(np.transpose(L, (0, 2, 1)))
