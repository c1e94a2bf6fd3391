"""Characteristic-polynomial derivative statistics.

Three routes are provided: the matrix/eigenangle route, the unitary product
of independent tilted factors, and the Jacobi route built from independent
``f_{s,t}`` coefficients (which also serves SO(2n) and USp(2n)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distributions import TiltedLaw, _beta_parts, _fst_log_parts, as_generator, sample_beta
from .errors import ConditioningError, DomainError, SingularityError

__all__ = [
    "AlphaSchedule", "DerivativePair", "det_id_minus_product", "z_derivative",
    "log_z", "sample_z_product_unitary", "sample_log_z_product_unitary",
    "alpha_schedule_general", "alpha_schedule_group", "sample_jacobi_det_pair",
    "sample_jacobi_log_det_pair", "sample_jacobi_n1", "so_usp_derivative_pair",
    "derivative_normalizations", "group_jacobi_parameters",
    "sample_z_product_unitary_general", "DEFLATION_TOL",
]

DEFLATION_TOL = 1e-8
_SMALL_FACTOR = 1e-6


def det_id_minus_product(reflections):
    """``prod_k (1 - r_kk^(k))`` for reflections with pivots ``1..m`` in order."""
    out = 1.0 + 0j
    for expect, r in enumerate(reflections, start=1):
        if r.k != expect:
            raise DomainError(f"pivots must be 1..m in order; got {r.k} at position {expect}")
        out *= 1 - complex(r.r_kk)
    return out


def _nontrivial(angles, p, tol):
    """Drop the ``p`` angles closest to zero after checking they are pinned."""
    angles = np.asarray(angles, dtype=float)
    if p == 0:
        return angles
    order = np.argsort(np.abs(angles), axis=-1)
    ranked = np.take_along_axis(angles, order, axis=-1)
    if np.any(np.abs(ranked[..., :p]) > tol):
        raise ConditioningError(f"fewer than {p} eigenangles within {tol:g} of 0")
    return ranked[..., p:]


def log_z(angles, p, tol=DEFLATION_TOL):
    """``log p! + sum log(1 - e^{i theta})`` over the non-pinned angles.

    Each factor has nonnegative real part, so the principal branch is the
    continuous logarithm of ``det(Id - x u)`` along ``x`` in ``(0, 1)``.
    """
    free = _nontrivial(angles, p, tol)
    fac = 1 - np.exp(1j * free)
    if np.any(fac == 0):
        raise SingularityError("a nontrivial factor 1 - e^{i theta} is exactly zero")
    return math.lgamma(p + 1) + np.sum(np.log(fac), axis=-1)


def z_derivative(angles, p, tol=DEFLATION_TOL):
    """``p! prod (1 - e^{i theta_k})`` over the ``n - p`` non-pinned angles."""
    free = _nontrivial(angles, p, tol)
    fac = 1 - np.exp(1j * free)
    direct = math.factorial(p) * np.prod(fac, axis=-1)
    small = np.any(np.abs(fac) < _SMALL_FACTOR, axis=-1)
    mag = np.abs(direct)
    risky = small | (mag < 1e-300) | (mag > 1e300)
    if np.any(risky):
        with np.errstate(divide="ignore"):
            via_log = np.exp(math.lgamma(p + 1) + np.sum(np.log(fac), axis=-1))
        direct = np.where(risky, via_log, direct)
    return direct[()] if np.ndim(direct) == 0 else direct


# --------------------------------------------------------- unitary product


def _log_one_minus_tilted(lams, p, gen, rows):
    """Matrix ``(rows, len(lams))`` of ``log(1 - X)`` with real tilt ``p``.

    Uses ``1 - X = 2 cos(phi) e^{i phi} B_{lam+1+2p, lam}`` where
    ``sin phi = 2 B_{lam+p+1/2, lam+p+1/2} - 1``.
    """
    lams = np.asarray(lams, dtype=float)
    shape = (rows, len(lams))
    u, v = _beta_parts(lams + p + 0.5, lams + p + 0.5, gen, shape)
    phi = np.arctan2(u - v, 2 * np.sqrt(u * v))
    radial, _ = _beta_parts(lams + 1 + 2 * p, lams, gen, shape)
    # 2 cos(phi) = 4 sqrt(uv)
    return np.log(4.0) + 0.5 * (np.log(u) + np.log(v)) + np.log(radial) + 1j * phi


def sample_log_z_product_unitary(n, p, rng, size=None, block=1 << 20):
    """``log Z_U^(p)`` from the product of independent tilted factors.

    Returns ``log p! + sum_l log(1 - X_l)`` with ``X_l`` drawn from
    ``TiltedLaw(l - 1, p)``, ``l = 1..n-p``.  Work is split into blocks of
    about ``block`` factors to bound memory.
    """
    if not 0 <= p <= n - 1:
        raise DomainError(f"need 0 <= p <= n-1, got p={p}, n={n}")
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    lams = np.arange(n - p, dtype=float)
    total = np.full(m, math.lgamma(p + 1), dtype=complex)
    rows = max(1, min(m, block // max(len(lams), 1)))
    cols = max(1, block // rows)
    for r0 in range(0, m, rows):
        r1 = min(m, r0 + rows)
        for c0 in range(0, len(lams), cols):
            chunk = _log_one_minus_tilted(lams[c0:c0 + cols], p, gen, r1 - r0)
            total[r0:r1] += chunk.sum(axis=1)
    return total[0] if size is None else total


def sample_z_product_unitary(n, p, rng, size=None):
    """``Z_U^(p) = p! prod_l (1 - X_l)`` (see :func:`sample_log_z_product_unitary`)."""
    return np.exp(sample_log_z_product_unitary(n, p, rng, size))


def sample_z_product_unitary_general(n, p, rng, size=None, method="auto"):
    """Same law as :func:`sample_z_product_unitary`, one factor at a time.

    Slower; lets the caller pick the tilted-coordinate sampling route.
    """
    from .distributions import sample_tilted_coord

    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    out = np.full(m, float(math.factorial(p)), dtype=complex)
    for lam in range(n - p):
        y = sample_tilted_coord(TiltedLaw(lam, p), gen, size=m, method=method)
        out *= 1 - y
    return out[0] if size is None else out


# -------------------------------------------------------------- schedules


@dataclass(frozen=True)
class AlphaSchedule:
    """Shape pairs ``(s(k), t(k))`` for ``k = 0..2n-2``."""

    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] % 2 != 1:
            raise DomainError("schedule needs an odd number (2n-1) of (s, t) pairs")
        if np.any(pairs <= 0):
            raise DomainError("all schedule shapes must be strictly positive")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n(self) -> int:
        return (len(self.pairs) + 1) // 2

    @property
    def s(self):
        return self.pairs[:, 0]

    @property
    def t(self):
        return self.pairs[:, 1]

    def __len__(self):
        return len(self.pairs)


def alpha_schedule_general(beta, a, b, n) -> AlphaSchedule:
    """Shapes for the Jacobi ensemble with parameters ``(beta, a, b)``."""
    if beta <= 0 or a <= -1 or b <= -1 or n < 1:
        raise DomainError(f"need beta > 0, a > -1, b > -1, n >= 1 (got {beta}, {a}, {b}, {n})")
    k = np.arange(2 * n - 1)
    even = k % 2 == 0
    s = np.where(even, (2 * n - k - 2) * beta / 4 + a + 1, (2 * n - k - 3) * beta / 4 + a + b + 2)
    t = np.where(even, (2 * n - k - 2) * beta / 4 + b + 1, (2 * n - k - 1) * beta / 4)
    return AlphaSchedule(np.column_stack([s, t]))


def alpha_schedule_group(group, n, p_plus=0, p_minus=0) -> AlphaSchedule:
    """Shapes for SO(2n+2p+ +2p-) or USp(2n+2p+ +2p-) with pinned eigenvalues at +-1."""
    group = group.lower()
    if n < 1 or p_plus < 0 or p_minus < 0:
        raise DomainError("need n >= 1 and p_plus, p_minus >= 0")
    k = np.arange(2 * n - 1)
    even = k % 2 == 0
    if group == "so":
        base = (2 * n - k - 1) / 2
        s = np.where(even, base + 2 * p_plus, base + 2 * p_plus + 2 * p_minus)
        t = np.where(even, base + 2 * p_minus, base)
    elif group == "usp":
        s = np.where(even, (2 * n - k + 1) / 2 + 2 * p_plus,
                     (2 * n - k + 3) / 2 + 2 * p_plus + 2 * p_minus)
        t = np.where(even, (2 * n - k + 1) / 2 + 2 * p_minus, (2 * n - k - 1) / 2)
    else:
        raise DomainError(f"group must be 'so' or 'usp', got {group!r}")
    return AlphaSchedule(np.column_stack([s, t]))


def group_jacobi_parameters(group, p_plus=0, p_minus=0):
    """``(beta, a, b)`` of the Jacobi ensemble matching the group spectrum."""
    shift = {"so": -0.5, "usp": 0.5}[group.lower()]
    return 2.0, 2 * p_plus + shift, 2 * p_minus + shift


# ------------------------------------------------------------ Jacobi route


class DerivativePair(NamedTuple):
    z_plus: np.ndarray
    z_minus: np.ndarray


def sample_jacobi_log_det_pair(schedule: AlphaSchedule, rng, size=None,
                               block=1 << 20, return_alphas=False):
    """Logs of ``(2 prod (1 - a_k), 2 prod (1 + (-1)^k a_k))``, ``a_k ~ f_{s(k),t(k)}``."""
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    s, t = schedule.s, schedule.t
    sign_plus = np.arange(len(s)) % 2 == 0
    lp = np.full(m, np.log(2.0))
    lm = np.full(m, np.log(2.0))
    alphas = np.empty((m, len(s))) if return_alphas else None
    rows = max(1, min(m, block // len(s)))
    for r0 in range(0, m, rows):
        r1 = min(m, r0 + rows)
        l_minus, l_plus = _fst_log_parts(s, t, gen, (r1 - r0, len(s)))
        lp[r0:r1] += l_minus.sum(axis=1)
        # even k contributes log(1 + a_k), odd k contributes log(1 - a_k)
        lm[r0:r1] += np.where(sign_plus, l_plus, l_minus).sum(axis=1)
        if return_alphas:
            alphas[r0:r1] = (np.exp(l_plus) - np.exp(l_minus)) / 2
    out = DerivativePair(lp[0], lm[0]) if size is None else DerivativePair(lp, lm)
    if return_alphas:
        return out, (alphas[0] if size is None else alphas)
    return out


def sample_jacobi_det_pair(schedule: AlphaSchedule, rng, size=None, return_alphas=False):
    """``(det(2Id - u), det(2Id + u))`` for the Jacobi ensemble via its coefficients."""
    res = sample_jacobi_log_det_pair(schedule, rng, size, return_alphas=return_alphas)
    logs, alphas = res if return_alphas else (res, None)
    pair = DerivativePair(np.exp(logs.z_plus), np.exp(logs.z_minus))
    return (pair, alphas) if return_alphas else pair


def sample_jacobi_n1(a, b, rng, size=None):
    """One-point Jacobi ensemble: ``x = 2 - 4 B_{a+1,b+1}``, density ∝ (2-x)^a (2+x)^b."""
    if a <= -1 or b <= -1:
        raise DomainError(f"need a, b > -1, got {a}, {b}")
    return 2 - 4 * sample_beta(a + 1, b + 1, rng, size)


def derivative_normalizations(p_plus, p_minus):
    """Factors turning ``prod (2 -+ x_k)`` into the derivatives at ``+1`` and ``-1``.

    Differentiating ``(x-1)^(2p+) (x+1)^(2p-) prod (x - e^{+-i theta})`` gives
    ``Z^(2p+)(1) = (2p+)! 2^(2p-) prod (2 - x_k)`` and
    ``Z^(2p-)(-1) = (2p-)! 2^(2p+) prod (2 + x_k)``.
    """
    return (math.factorial(2 * p_plus) * 2.0 ** (2 * p_minus),
            math.factorial(2 * p_minus) * 2.0 ** (2 * p_plus))


def so_usp_derivative_pair(group, n, p_plus, p_minus, rng, size=None):
    """Normalized derivative statistics ``(prod (2 - x_k), prod (2 + x_k))``."""
    return sample_jacobi_det_pair(alpha_schedule_group(group, n, p_plus, p_minus), rng, size)
