"""Haar and conditional Haar measures on U(n) and O(n) as reflection products.

All samplers return dense arrays: shape ``(n, n)`` for ``size=None`` or
``(size, n, n)`` for a batch.  Products ``r1 r2 ... rm`` are accumulated by
applying ``rm`` first onto the identity, each step touching only the rows
below the pivot.
"""
from __future__ import annotations

import csv

import numpy as np

from .distributions import DELTA_MARGIN, as_generator
from .errors import ContractViolation, DomainError, RejectionLimitError
from .reflections import apply_columns, sample_columns

__all__ = [
    "reflection_product", "sample_haar_unitary", "sample_conditional_haar",
    "sample_conditional_slipped", "sample_rotated_conditional",
    "sample_generalized_slip", "sample_conditioned_on_abs_z",
    "sample_conditional_orthogonal", "eigenangles", "check_unitary",
    "write_matrix_csv", "read_matrix_csv",
]

UNITARY_TOL = 1e-10
DET_TOL = 1e-8


def _batch(size):
    if size is None:
        return 1, True
    return int(size), False


def reflection_product(n, pivots, rng, size=None, deltas=None, real=False,
                       return_diagonal=False):
    """Product ``r^(k1) r^(k2) ...`` of independent reflections.

    ``deltas`` (one per pivot) selects tilted factors.  With
    ``return_diagonal`` the ``r_kk`` entries of the factors are returned too,
    as an array of shape ``(batch, len(pivots))``.
    """
    gen = as_generator(rng)
    m, squeeze = _batch(size)
    pivots = list(pivots)
    if deltas is None:
        deltas = [0.0] * len(pivots)
    if len(deltas) != len(pivots):
        raise DomainError("need one tilt exponent per pivot")
    dtype = float if real else complex
    mat = np.broadcast_to(np.eye(n, dtype=dtype), (m, n, n)).copy()
    diag = np.empty((m, len(pivots)), dtype=dtype)
    # Draw in pivot order so that a stream maps to the same factors
    # regardless of how the product is accumulated.
    cols = [sample_columns(n, k, gen, size=m, delta=d, real=real)
            for k, d in zip(pivots, deltas)]
    for j in range(len(pivots) - 1, -1, -1):
        apply_columns(mat, pivots[j], cols[j])
        diag[:, j] = cols[j][:, 0]
    if squeeze:
        mat, diag = mat[0], diag[0]
    return (mat, diag) if return_diagonal else mat


def _check_p(n, p):
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    if not 0 <= p <= n - 1:
        raise DomainError(f"need 0 <= p <= n-1, got p={p}, n={n}")


def sample_haar_unitary(n, rng, size=None, return_diagonal=False):
    """Haar unitary as ``r^(1) ... r^(n)`` with ``r^(k)`` from ``nu^(k)``."""
    _check_p(n, 0)
    return reflection_product(n, range(1, n + 1), rng, size,
                              return_diagonal=return_diagonal)


def sample_conditional_haar(n, p, rng, size=None, return_diagonal=False):
    """Haar measure conditioned on ``p`` eigenvalues at 1: ``r^(1) ... r^(n-p)``."""
    _check_p(n, p)
    return reflection_product(n, range(1, n - p + 1), rng, size,
                              return_diagonal=return_diagonal)


def sample_conditional_slipped(n, p, rng, size=None, return_diagonal=False):
    """``r_p^(p+1) ... r_p^(n)`` with tilted factors; same spectrum law as above."""
    _check_p(n, p)
    pivots = range(p + 1, n + 1)
    return reflection_product(n, pivots, rng, size, deltas=[float(p)] * (n - p),
                              return_diagonal=return_diagonal)


def sample_rotated_conditional(n, rng, size=None):
    """``e^{i theta} r^(1) ... r^(n-1)`` with ``theta`` uniform and independent."""
    _check_p(n, 0)
    gen = as_generator(rng)
    mat = reflection_product(n, range(1, n), gen, size)
    m, squeeze = _batch(size)
    phase = np.exp(1j * gen.uniform(-np.pi, np.pi, m))
    if squeeze:
        return phase[0] * mat
    return phase[:, None, None] * mat


def sample_generalized_slip(n, deltas, rng, size=None):
    """The pair ``(prod_k r_{d_k}^(k), prod_k r_{d_k + 1}^(k+1))``, k = 1..m.

    The two products are drawn independently of each other.
    """
    deltas = [complex(d) for d in deltas]
    m = len(deltas)
    if not 1 <= m <= n - 1:
        raise DomainError(f"need 1 <= len(deltas) <= n-1, got {m}")
    if any(d.real <= -0.5 + DELTA_MARGIN for d in deltas):
        raise DomainError("every tilt exponent needs real part > -1/2")
    gen = as_generator(rng)
    left = reflection_product(n, range(1, m + 1), gen, size,
                              deltas=[_tidy(d) for d in deltas])
    right = reflection_product(n, range(2, m + 2), gen, size,
                               deltas=[_tidy(d + 1) for d in deltas])
    return left, right


def _tidy(d: complex):
    return d.real if d.imag == 0 else d


def sample_conditioned_on_abs_z(n, x, rng, size=None, max_attempts=10**6,
                                return_info=False):
    """Haar unitary conditioned on ``|det(Id - u)| = x``.

    Draws ``r^(1) .. r^(n-1)`` until ``prod |1 - r_kk| > x / 2``, then appends
    ``Id_{n-1} + r_pm`` with ``r_pm = exp(+-2i arcsin(x / (2 prod)))``, each
    sign with probability 1/2.  ``info`` reports attempts and acceptance rate.
    """
    if not 0 < x < 2.0**n:
        raise DomainError(f"need 0 < x < 2^n, got x={x}")
    gen = as_generator(rng)
    m, squeeze = _batch(size)
    if n == 1:
        # Only the last factor is free; both roots lie on the unit circle.
        heads_list = []
        prods = np.ones(m)
        attempts = n_ok = m
    else:
        heads_list, prods_list, attempts = [], [], 0
        got = n_ok = 0
        chunk = max(m, 256)
        while got < m:
            if attempts >= max_attempts:
                raise RejectionLimitError(
                    f"acceptance too low: {got} of {m} after {attempts} attempts")
            take = min(chunk, max_attempts - attempts)
            cols = [sample_columns(n, k, gen, size=take) for k in range(1, n)]
            prod = np.prod(np.abs(1 - np.stack([c[:, 0] for c in cols], axis=1)), axis=1)
            ok = prod > x / 2
            attempts += take
            n_ok += int(ok.sum())
            sel = np.flatnonzero(ok)[: m - got]
            heads_list.append([c[sel] for c in cols])
            prods_list.append(prod[sel])
            got += len(sel)
            chunk = min(4 * chunk, 1 << 16)
        prods = np.concatenate(prods_list)
    sign = np.where(gen.random(m) < 0.5, 1.0, -1.0)
    last = np.exp(sign * 2j * np.arcsin(x / (2 * prods)))
    mat = np.broadcast_to(np.eye(n, dtype=complex), (m, n, n)).copy()
    mat[:, n - 1, :] *= last[:, None]
    for k in range(n - 1, 0, -1):
        col = np.concatenate([h[k - 1] for h in heads_list], axis=0)
        apply_columns(mat, k, col)
    info = {"attempts": attempts, "accepted": m, "acceptance_rate": n_ok / attempts}
    if squeeze:
        mat = mat[0]
    return (mat, info) if return_info else mat


def sample_conditional_orthogonal(n, p, rng, size=None):
    """Real orthogonal analogue: ``r^(1) ... r^(n-p)`` from the real sphere measures."""
    _check_p(n, p)
    return reflection_product(n, range(1, n - p + 1), rng, size, real=True)


# --------------------------------------------------------------- spectra


def check_unitary(u, tol=UNITARY_TOL):
    """Raise :class:`ContractViolation` unless every matrix in ``u`` is unitary."""
    u = np.asarray(u)
    n = u.shape[-1]
    gram = np.conj(np.swapaxes(u, -1, -2)) @ u
    err = np.max(np.abs(gram - np.eye(n)), axis=(-1, -2))
    if np.any(err > tol):
        raise ContractViolation(f"matrix is not unitary (max |u*u - Id| = {np.max(err):.3g})")
    det = np.abs(np.linalg.det(u))
    if np.any(np.abs(det - 1) > DET_TOL):
        raise ContractViolation("|det u| deviates from 1")
    return u


def eigenangles(u, check=True):
    """Sorted eigenangles in ``(-pi, pi]`` of a unitary matrix (or a batch)."""
    u = np.asarray(u)
    if check:
        check_unitary(u)
    ev = np.linalg.eigvals(u)
    ang = np.angle(ev)
    ang = np.where(ang <= -np.pi, np.pi, ang)
    return np.sort(ang, axis=-1)


# ------------------------------------------------------------------ dumps


def write_matrix_csv(path, u):
    """Write ``u`` as a header ``n,<n>`` then rows of interleaved re/im parts."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", n])
        for row in u:
            w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 1 or rows[0][0] != "n":
        raise ValueError("missing 'n,<n>' header")
    n = int(rows[0][1])
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if data.shape != (n, 2 * n):
        raise ValueError(f"expected {n} rows of {2 * n} values")
    return data[:, 0::2] + 1j * data[:, 1::2]
