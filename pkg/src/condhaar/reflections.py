"""Reflections ``r`` with ``rank(r - Id) <= 1`` and the measures on them.

A reflection with pivot ``k`` fixes ``e_1 .. e_{k-1}`` and is determined by
its generating column ``m1 = r(e_k)`` restricted to coordinates ``k..n``.
On those coordinates ``r = Id + kvec w^T`` with ``kvec = m1 - e_1`` and
``w = (1, -conj(m1[1:]) / (1 - conj(m1[0])))``; numerically the product is
formed from the normalized ``kvec``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import (TiltedLaw, as_generator, sample_complex_sphere,
                            sample_real_sphere, sample_tilted_coord)
from .errors import DegenerateReflectionError, DomainError

__all__ = [
    "Reflection", "reflection_from_column", "nontrivial_eigenvalue",
    "sample_nu", "sample_nu_delta", "sample_nu_real", "tilt_weight",
    "apply_columns", "sample_columns",
]

DEGENERATE_TOL = 1e-12


def _generators(col):
    """``(v, w)`` with ``r = Id + v w^T`` for a batch of columns ``(..., d)``.

    Written as ``Id + (lam - 1) v v^*`` with ``v`` the unit vector along
    ``m1 - e_1`` and ``lam`` the nontrivial eigenvalue, which stays unitary
    to rounding even when ``m1`` is close to ``e_1``.
    """
    kvec = col.copy()
    kvec[..., 0] -= 1
    norm = np.linalg.norm(kvec, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1)
    v = np.where(norm > 0, kvec / safe, 0)
    a = 1 - col[..., :1]
    lam = -a / np.where(a != 0, np.conj(a), 1)
    w = (lam - 1) * np.conj(v)
    return v, w


def apply_columns(mat, k, col, identity_mask=None):
    """Left-multiply ``mat`` (shape ``(..., n, m)``) by the reflections with pivot ``k``.

    ``col`` has shape ``(..., n-k+1)``; only rows ``k-1..n-1`` of ``mat`` change.
    Entries flagged by ``identity_mask`` are treated as the identity.
    """
    kvec, w = _generators(col)
    if identity_mask is not None:
        kvec = np.where(identity_mask[..., None], 0, kvec)
        w = np.where(identity_mask[..., None], 0, w)
    block = mat[..., k - 1:, :]
    proj = np.einsum("...i,...ij->...j", w, block)
    mat[..., k - 1:, :] = block + kvec[..., :, None] * proj[..., None, :]
    return mat


@dataclass(frozen=True)
class Reflection:
    """Reflection with pivot ``k`` (1-based) in dimension ``n``."""

    n: int
    k: int
    column: np.ndarray = field(repr=False)
    identity: bool = False

    @property
    def r_kk(self) -> complex:
        return self.column[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.column)

    def matrix(self) -> np.ndarray:
        dtype = float if self.is_real else complex
        mat = np.eye(self.n, dtype=dtype)
        if self.identity:
            return mat
        return apply_columns(mat, self.k, self.column.astype(dtype))

    def apply(self, v):
        """``r @ v`` touching only coordinates ``k..n`` (vector or matrix)."""
        v = np.array(v, dtype=np.result_type(v, self.column), copy=True)
        if self.identity:
            return v
        if v.ndim == 1:
            return apply_columns(v[:, None], self.k, self.column)[:, 0]
        return apply_columns(v, self.k, self.column)


def reflection_from_column(n, k, column, allow_identity=False) -> Reflection:
    """Build the reflection whose image of ``e_k`` is ``column`` (coords ``k..n``).

    ``allow_identity`` accepts the column ``e_1`` exactly, giving ``Id``
    (needed for the real case in dimension one).
    """
    if not 1 <= k <= n:
        raise DomainError(f"pivot k={k} outside 1..{n}")
    col = np.asarray(column)
    if col.shape != (n - k + 1,):
        raise DomainError(f"column must have length {n - k + 1}, got shape {col.shape}")
    if abs(np.linalg.norm(col) - 1) > 1e-12:
        raise DomainError("generating column must have unit norm")
    if not np.iscomplexobj(col):
        col = col.astype(float)
    if abs(1 - col[0]) <= DEGENERATE_TOL:
        if allow_identity and np.all(col == np.eye(1, len(col))[0]):
            return Reflection(n, k, col, identity=True)
        raise DegenerateReflectionError("column is too close to e_1 (1 - m11 vanishes)")
    return Reflection(n, k, col)


def nontrivial_eigenvalue(r: Reflection) -> complex:
    """The eigenvalue ``-(1 - r_kk) / (1 - conj(r_kk))`` of a nondegenerate reflection."""
    if r.identity or abs(1 - r.r_kk) <= DEGENERATE_TOL:
        raise DegenerateReflectionError("identity reflection has no nontrivial eigenvalue")
    rkk = complex(r.r_kk)
    return -(1 - rkk) / (1 - rkk.conjugate())


def tilt_weight(r_kk, delta):
    """``(1 - r_kk)^conj(delta) (1 - conj(r_kk))^delta``, real and positive."""
    w = 1 - np.asarray(r_kk, dtype=complex)
    delta = complex(delta)
    return np.exp(2 * delta.real * np.log(np.abs(w)) + 2 * delta.imag * np.angle(w))


# -------------------------------------------------------------- samplers


def sample_columns(n, k, rng, size=None, delta=0.0, real=False):
    """Batch of generating columns for pivot ``k``; shape ``size + (n-k+1,)``.

    ``delta != 0`` gives the tilted measure (complex case only).  Columns
    too close to ``e_1`` are redrawn, except the real one-dimensional
    column ``+1`` which is a legitimate identity reflection.
    """
    if not 1 <= k <= n:
        raise DomainError(f"pivot k={k} outside 1..{n}")
    gen = as_generator(rng)
    dim = n - k + 1
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))

    def draw(m):
        if real:
            return sample_real_sphere(dim, gen, size=m)
        if complex(delta) == 0:
            return sample_complex_sphere(dim, gen, size=m)
        law = TiltedLaw(dim - 1, delta)
        head = np.asarray(sample_tilted_coord(law, gen, size=m))
        out = np.empty((m, dim), dtype=complex)
        out[:, 0] = head
        if dim > 1:
            rest = sample_complex_sphere(dim - 1, gen, size=m)
            out[:, 1:] = rest * np.sqrt(np.maximum(1 - np.abs(head) ** 2, 0))[:, None]
        return out

    total = int(np.prod(shape, dtype=int))
    cols = draw(total)
    if real and dim == 1:
        return cols.reshape(shape + (dim,))
    bad = np.abs(1 - cols[:, 0]) <= DEGENERATE_TOL
    while np.any(bad):
        cols[bad] = draw(int(bad.sum()))
        bad = np.abs(1 - cols[:, 0]) <= DEGENERATE_TOL
    return cols.reshape(shape + (dim,))


def sample_nu(n, k, rng) -> Reflection:
    """Reflection with ``r(e_k)`` uniform on the complex sphere of ``C^(n-k+1)``."""
    return Reflection(n, k, sample_columns(n, k, rng))


def sample_nu_delta(n, k, delta, rng) -> Reflection:
    """Reflection from the tilted measure: ``r_kk`` tilted, remainder uniform."""
    TiltedLaw(n - k, delta)
    return Reflection(n, k, sample_columns(n, k, rng, delta=delta))


def sample_nu_real(n, k, rng) -> Reflection:
    """Real analogue: ``r(e_k)`` uniform on the real sphere of ``R^(n-k+1)``."""
    col = sample_columns(n, k, rng, real=True)
    return reflection_from_column(n, k, col, allow_identity=True)
