"""Closed-form transforms, eigenvalue densities and exact moment oracles.

Gamma ratios are evaluated as ``exp`` of log-gamma sums so that large
arguments do not overflow.  Transforms take complex parameters and return a
Python ``float`` whenever the imaginary part vanishes.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.special import loggamma

from .errors import DomainError

__all__ = [
    "gamma_ratio", "beta_mellin", "fst_moment", "fst_cross_moment",
    "mf_one_plus_sphere_coord", "mf_cospower", "mf_theorem_a1_target",
    "mf_tilted_one_minus", "weyl_density_unitary", "conditional_density_unitary",
    "jacobi_density", "so_usp_density", "expected_sq_modulus_zp",
    "periodic_expectation", "weyl_expectation", "conditional_normalization",
    "jacobi_expectation", "jacobi_edge_constant", "jacobi_edge_constant_quadrature",
]

_POLE_TOL = 1e-12


def _is_pole(z: complex) -> bool:
    z = complex(z)
    return abs(z.imag) < _POLE_TOL and z.real <= 0 and abs(z.real - round(z.real)) < _POLE_TOL


def _tidy(z: complex, tol=1e-12):
    z = complex(z)
    if abs(z.imag) <= tol * max(1.0, abs(z.real)):
        return float(z.real)
    return z


def gamma_ratio(num, den):
    """``prod Gamma(num) / prod Gamma(den)`` via log-gamma; complex arguments allowed."""
    for z in itertools.chain(num, den):
        if _is_pole(z):
            raise DomainError(f"Gamma pole at argument {complex(z)}")
    log = sum(loggamma(complex(z)) for z in num) - sum(loggamma(complex(z)) for z in den)
    return _tidy(np.exp(log))


def beta_mellin(a, b, s):
    """``E[B_{a,b}^s] = Gamma(a+s) Gamma(a+b) / (Gamma(a) Gamma(a+b+s))``.

    Any ``s > -a`` is accepted (the moment is finite there); ``b = 0`` is the
    point mass at 1.
    """
    if a <= 0 or b < 0:
        raise DomainError(f"need a > 0, b >= 0, got a={a}, b={b}")
    if s == 0:
        return 1.0
    if a + s <= 0:
        raise DomainError(f"E[B^s] diverges for s={s} <= -a")
    if b == 0:
        return 1.0
    return float(np.real(gamma_ratio([a + s, a + b], [a, a + b + s])))


def fst_moment(s, t, power, sign=-1):
    """``E[(1 + sign X)^power]`` for ``X ~ f_{s,t}``; ``(1 - X)/2`` is ``B_{s,t}``."""
    if sign == -1:
        return 2.0**power * beta_mellin(s, t, power)
    return 2.0**power * beta_mellin(t, s, power)


def fst_cross_moment(s, t):
    """``E[(1 - X)(1 + X)] = 4 s t / ((s+t)(s+t+1))``."""
    return 4.0 * s * t / ((s + t) * (s + t + 1))


def mf_one_plus_sphere_coord(lam, t, s):
    """``E|X|^t e^{is arg X}`` for ``X = 1 + e^{i theta} sqrt(B_{1,lam})``."""
    if lam <= 0:
        raise DomainError(f"need lambda > 0, got {lam}")
    if (complex(t) + s).real <= -1 or (complex(t) - s).real <= -1:
        raise DomainError("need Re(t +- s) > -1")
    if t == 0 and s == 0:
        return 1.0
    return gamma_ratio([lam + 1, lam + 1 + t],
                       [lam + 1 + (t + s) / 2, lam + 1 + (t - s) / 2])


def mf_cospower(z, t, s):
    """``E|X|^t e^{is arg X}`` for ``X = 2 cos(phi) e^{i phi}``, phi from the law with index ``z``."""
    z = complex(z)
    if z.real <= -0.5:
        raise DomainError(f"need Re z > -1/2, got {z}")
    if t == 0 and s == 0:
        return 1.0
    zb = z.conjugate()
    return gamma_ratio([z + 1, zb + 1, z + zb + t + 1],
                       [z + zb + 1, zb + (t + s) / 2 + 1, z + (t - s) / 2 + 1])


def mf_tilted_one_minus(lam, delta, t, s):
    """Transform of ``1 - Y`` with ``Y`` the tilted coordinate of parameters ``(lam, delta)``.

    ``Y`` is ``e^{i theta} sqrt(B_{1,lam})`` reweighted by
    ``(1-x)^conj(delta) (1-conj x)^delta``.  The tilt shifts ``t`` by
    ``2 Re delta`` and ``s`` by ``-2i Im delta``, so ``conj(delta)`` lands
    next to ``(t+s)/2``.
    """
    delta = complex(delta)
    if lam < 0 or delta.real <= -0.5:
        raise DomainError(f"need lambda >= 0 and Re delta > -1/2, got {lam}, {delta}")
    if t == 0 and s == 0:
        return 1.0
    db = delta.conjugate()
    return gamma_ratio(
        [lam + 1 + delta, lam + 1 + db, lam + 1 + delta + db + t],
        [lam + 1 + delta + db, lam + 1 + db + (t + s) / 2, lam + 1 + delta + (t - s) / 2])


def mf_theorem_a1_target(lam, delta, t, s):
    """Closed-form transform shared by both sides of the tilted-sum identity.

    Equals ``mf_tilted_one_minus(lam - 1, delta + 1, t, s)``.
    """
    delta = complex(delta)
    if lam <= 1:
        raise DomainError(f"need lambda > 1, got {lam}")
    if delta.real <= -0.5:
        raise DomainError(f"need Re delta > -1/2, got {delta}")
    if t == 0 and s == 0:
        return 1.0
    db = delta.conjugate()
    return gamma_ratio(
        [lam + delta + 1, lam + db + 1, lam + delta + db + 2 + t],
        [lam + delta + db + 2, lam + db + (t + s) / 2 + 1, lam + delta + (t - s) / 2 + 1])


# ------------------------------------------------------------- densities


def _pair_product(vals, fn):
    vals = np.asarray(vals)
    n = vals.shape[-1]
    out = np.ones(vals.shape[:-1])
    for k in range(n):
        for l in range(k + 1, n):
            out = out * fn(vals[..., k], vals[..., l])
    return out


def weyl_density_unitary(angles):
    """``(1/n!) prod_{k<l} |e^{i theta_k} - e^{i theta_l}|^2`` (per ``dtheta / 2pi``)."""
    th = np.asarray(angles, dtype=float)
    n = th.shape[-1]
    e = np.exp(1j * th)
    return _pair_product(e, lambda a, b: np.abs(a - b) ** 2) / math.factorial(n)


def conditional_density_unitary(angles, p):
    """Unnormalized ``prod_{k<l} |e^{i theta_k} - e^{i theta_l}|^2 prod_j |1 - e^{i theta_j}|^(2p)``."""
    th = np.asarray(angles, dtype=float)
    e = np.exp(1j * th)
    return _pair_product(e, lambda a, b: np.abs(a - b) ** 2) * np.prod(np.abs(1 - e) ** (2 * p), axis=-1)


def jacobi_density(xs, beta, a, b):
    """Unnormalized ``|Delta(x)|^beta prod (2 - x_j)^a (2 + x_j)^b`` on ``(-2, 2)^n``."""
    x = np.asarray(xs, dtype=float)
    vdm = _pair_product(x, lambda u, v: np.abs(u - v) ** beta)
    return vdm * np.prod((2 - x) ** a * (2 + x) ** b, axis=-1)


def so_usp_density(angles, group):
    """Unnormalized eigenangle statistics of SO(2n) or USp(2n) on ``(0, pi)^n``."""
    th = np.asarray(angles, dtype=float)
    c = np.cos(th)
    out = _pair_product(c, lambda u, v: (u - v) ** 2)
    group = group.lower()
    if group == "usp":
        out = out * np.prod((1 - c) * (1 + c), axis=-1)
    elif group != "so":
        raise DomainError(f"group must be 'so' or 'usp', got {group!r}")
    return out


# ---------------------------------------------------------- exact oracles


def expected_sq_modulus_zp(n, p):
    """Exact ``E|Z^(p) / p!|^2`` under the Haar measure conditioned on ``p`` eigenvalues at 1.

    Each factor ``1 - X_l`` contributes ``G(l-1, p+1) / G(l-1, p)`` with
    ``G(lam, q) = Gamma(lam+1) Gamma(lam+1+2q) / Gamma(lam+1+q)^2``.
    """
    if n < 1 or not 0 <= p <= n - 1:
        raise DomainError(f"need 0 <= p <= n-1, got n={n}, p={p}")
    log = 0.0
    for lam in range(n - p):
        log += (math.lgamma(lam + 2 * p + 3) - math.lgamma(lam + 2 * p + 1)
                - 2 * math.lgamma(lam + p + 2) + 2 * math.lgamma(lam + p + 1))
    return math.exp(log)


def jacobi_edge_constant(beta, a, b, n):
    """Constant ``c(n)`` with ``h_n(eps) ~ c(n) eps^a`` for ``det(2 Id - u)`` in the Jacobi ensemble.

    Uses the alpha-coefficient product; requires ``s(k) > 1 + a`` for every
    ``k <= 2n - 3`` so that the negative moments are finite.
    """
    from .charpoly import alpha_schedule_general

    sched = alpha_schedule_general(beta, a, b, n)
    log = (math.lgamma(a + b + 2) - math.lgamma(a + 1) - math.lgamma(b + 1)
           - 2 * (1 + a) * math.log(2))
    for s, t in sched.pairs[:-1]:
        if s <= 1 + a:
            raise DomainError(f"E[(1 - alpha)^-(1+a)] diverges for s={s}")
        log += math.log(fst_moment(s, t, -(1 + a)))
    return math.exp(log)


def jacobi_edge_constant_quadrature(beta, a, b):
    """``c(2)`` from quadrature of the two-point Jacobi density.

    As ``eps -> 0`` one coordinate approaches 2 while the other stays free,
    giving ``c(2) = 2 K 4^b int (2-x)^(beta-1) (2+x)^b dx`` with ``K`` the
    normalization of the density, itself computed numerically.
    """
    norm = jacobi_expectation(lambda x: np.ones(x.shape[:-1]), 2, beta, a, b, normalize=False)
    edge = 4.0 ** (beta + b) * math.exp(math.lgamma(beta) + math.lgamma(b + 1) - math.lgamma(beta + b + 1))
    return 2.0 * 4.0**b * edge / norm


# ------------------------------------------------------------ quadrature


def periodic_expectation(f, dim, points=32):
    """Mean of ``f`` over ``(-pi, pi)^dim`` by the periodic trapezoid rule.

    Exact for trigonometric polynomials of degree below ``points`` in each
    variable; ``f`` receives an array of shape ``(..., dim)``.
    """
    grid = -np.pi + 2 * np.pi * (np.arange(points) + 0.5) / points
    mesh = np.stack(np.meshgrid(*([grid] * dim), indexing="ij"), axis=-1)
    return np.mean(f(mesh))


def weyl_expectation(f, n, points=32):
    """``E f(u)`` for Haar ``u`` in U(n) by quadrature against the Weyl density."""
    return periodic_expectation(lambda th: f(th) * weyl_density_unitary(th), n, points)


def conditional_normalization(n, p, points=64):
    """Normalizer of :func:`conditional_density_unitary` against ``dtheta / 2pi``."""
    m = n - p
    if m > 2:
        raise DomainError("quadrature is limited to n - p <= 2")
    return periodic_expectation(lambda th: conditional_density_unitary(th, p), m, points)


def jacobi_expectation(f, n, beta, a, b, normalize=True):
    """``E f(x)`` under the Jacobi density on ``(-2, 2)^n`` for ``n <= 2``.

    The substitution ``x = 2 cos(theta)`` smooths the edge singularities;
    scipy's adaptive quadrature does the rest.
    """
    if n not in (1, 2):
        raise DomainError("Jacobi quadrature is limited to n <= 2")

    def integrand(*th):
        th = np.asarray(th)
        x = 2 * np.cos(th)
        jac = np.prod(2 * np.sin(th))
        return jacobi_density(x, beta, a, b) * jac

    opts = {"epsabs": 1e-10, "epsrel": 1e-10, "limit": 200}
    lims = [(0.0, np.pi)] * n
    norm = integrate.nquad(integrand, lims, opts=opts)[0]
    if not normalize:
        return norm
    num = integrate.nquad(lambda *th: integrand(*th) * float(np.squeeze(f(2 * np.cos(np.asarray(th))))),
                          lims, opts=opts)[0]
    return num / norm
