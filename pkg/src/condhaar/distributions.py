"""Scalar-level random sampling primitives.

Every sampler takes a ``rng`` argument that may be an :class:`RngStream`,
a :class:`numpy.random.Generator` or an integer seed, plus an optional
numpy-style ``size``.  With ``size=None`` a single draw is returned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, RejectionLimitError

__all__ = [
    "RngStream", "as_generator", "TiltedLaw",
    "sample_complex_sphere", "sample_real_sphere", "sample_beta",
    "sample_fst", "sample_tilted_coord", "sample_tilted_log_one_minus",
    "sample_cospower_angle", "beta_pdf", "fst_pdf", "cospower_pdf",
    "tilted_coord_pdf",
]

# Re(delta) must clear -1/2 by this margin for the tilt to be normalizable.
DELTA_MARGIN = 1e-9
_MAX_ROUNDS = 10_000


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_index)``.

    Streams sharing a seed but differing in ``stream_index`` are spawned as
    independent children of one :class:`numpy.random.SeedSequence`.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_index < 2**64):
            raise DomainError("seed and stream_index must be unsigned 64-bit")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Stream for sub-task ``index``; keeps the seed, mixes the index."""
        mixed = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index, index))
        return RngStream(self.seed, int(mixed.generate_state(1, np.uint64)[0]))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def _shape(size) -> tuple:
    if size is None:
        return ()
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(size)


def _scalar(x, size):
    return x[()] if size is None else x


# ---------------------------------------------------------------- spheres


def sample_complex_sphere(dim, rng, size=None):
    """Uniform point(s) on the unit sphere of ``C^dim``.

    Returns an array of shape ``size + (dim,)``.
    """
    if dim < 1:
        raise DomainError(f"sphere dimension must be >= 1, got {dim}")
    gen = as_generator(rng)
    shape = _shape(size) + (int(dim),)
    z = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    # A zero Gaussian vector has probability zero; redraw if it ever shows up.
    while np.any(norm == 0):
        bad = norm[..., 0] == 0
        z[bad] = gen.standard_normal((bad.sum(), dim)) + 1j * gen.standard_normal((bad.sum(), dim))
        norm = np.linalg.norm(z, axis=-1, keepdims=True)
    return z / norm


def sample_real_sphere(dim, rng, size=None):
    """Uniform point(s) on the unit sphere of ``R^dim``."""
    if dim < 1:
        raise DomainError(f"sphere dimension must be >= 1, got {dim}")
    gen = as_generator(rng)
    shape = _shape(size) + (int(dim),)
    x = gen.standard_normal(shape)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    while np.any(norm == 0):
        bad = norm[..., 0] == 0
        x[bad] = gen.standard_normal((bad.sum(), dim))
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / norm


# ------------------------------------------------------------------- beta


def _beta_parts(a, b, gen, shape):
    """Return ``(B, 1 - B)`` for ``B ~ Beta(a, b)`` computed from gammas.

    Both parts are formed as ratios so that neither loses relative precision
    near the endpoints.  Entries with ``b == 0`` are exactly ``(1, 0)``.
    Interior draws that round onto an endpoint are redrawn.
    """
    a = np.broadcast_to(np.asarray(a, dtype=float), shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), shape)
    g1 = np.asarray(gen.standard_gamma(a, size=shape))
    g2 = np.asarray(gen.standard_gamma(b, size=shape))
    tot = g1 + g2
    bad = (b > 0) & ((g1 == 0) | (g2 == 0) | ~np.isfinite(tot))
    rounds = 0
    while np.any(bad):
        rounds += 1
        if rounds > _MAX_ROUNDS:
            raise RejectionLimitError("beta sampler kept hitting the endpoints")
        if g1.ndim == 0:
            g1, g2 = np.asarray(gen.standard_gamma(a)), np.asarray(gen.standard_gamma(b))
        else:
            g1[bad] = gen.standard_gamma(a[bad])
            g2[bad] = gen.standard_gamma(b[bad])
        tot = g1 + g2
        bad = (b > 0) & ((g1 == 0) | (g2 == 0) | ~np.isfinite(tot))
    return g1 / tot, g2 / tot


def _check_beta(a, b):
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) < 0):
        raise DomainError(f"beta shapes need a > 0 and b >= 0, got a={a}, b={b}")


def sample_beta(a, b, rng, size=None):
    """Draw ``B_{a,b}``; the convention ``B_{a,0} = 1`` holds exactly.

    ``a`` and ``b`` may be arrays broadcastable to ``size``.
    """
    _check_beta(a, b)
    gen = as_generator(rng)
    shape = _shape(size) if size is not None else np.broadcast(np.asarray(a), np.asarray(b)).shape
    x, _ = _beta_parts(a, b, gen, shape)
    return x[()] if x.ndim == 0 else x


def sample_fst(s, t, rng, size=None):
    """Draw from ``f_{s,t}(x) ∝ (1-x)^(s-1) (1+x)^(t-1)`` on ``(-1, 1)``."""
    if np.any(np.asarray(s) <= 0) or np.any(np.asarray(t) <= 0):
        raise DomainError(f"f_(s,t) shapes must be positive, got s={s}, t={t}")
    gen = as_generator(rng)
    shape = _shape(size) if size is not None else np.broadcast(np.asarray(s), np.asarray(t)).shape
    b, c = _beta_parts(s, t, gen, shape)
    # 1 - 2B written as (1-B) - B keeps accuracy at both ends.
    x = c - b
    return x[()] if x.ndim == 0 else x


def _fst_log_parts(s, t, gen, shape):
    """``(log(1-X), log(1+X))`` for ``X ~ f_{s,t}``, without cancellation."""
    b, c = _beta_parts(s, t, gen, shape)
    return np.log(2.0 * b), np.log(2.0 * c)


# ------------------------------------------------------- cos-power angles


def sample_cospower_angle(m, d, rng, size=None):
    """Angle on ``(-pi/2, pi/2)`` with density ∝ ``(2 cos phi)^(2m) exp(2 d phi)``.

    This is the law ``c (1+e^{2i phi})^conj(z) (1+e^{-2i phi})^z`` with
    ``z = m + i d``.  For ``d = 0``, ``sin phi = 2 B_{m+1/2, m+1/2} - 1``;
    the exponential twist is added by rejection with envelope ``exp(pi |d|)``.
    """
    if m <= -0.5:
        raise DomainError(f"cos-power exponent needs m > -1/2, got {m}")
    gen = as_generator(rng)
    shape = _shape(size)
    phi = _cospower_symmetric(m, gen, shape)
    if d != 0:
        # exp(2 d phi - pi |d|) <= 1 on the support.
        accept = gen.random(shape) < np.exp(2 * d * phi - np.pi * abs(d))
        rounds = 0
        while not np.all(accept):
            rounds += 1
            if rounds > _MAX_ROUNDS:
                raise RejectionLimitError("cos-power twist rejection did not terminate")
            k = int((~accept).sum())
            cand = _cospower_symmetric(m, gen, (k,))
            ok = gen.random(k) < np.exp(2 * d * cand - np.pi * abs(d))
            idx = np.flatnonzero(~accept)[ok]
            phi.flat[idx] = cand[ok]
            accept.flat[idx] = True
    return _scalar(np.asarray(phi), size)


def _cospower_symmetric(m, gen, shape):
    b, c = _beta_parts(m + 0.5, m + 0.5, gen, shape)
    # sin = b - c, cos = 2 sqrt(bc); arctan2 keeps precision near +-pi/2.
    return np.arctan2(b - c, 2.0 * np.sqrt(b * c))


# ---------------------------------------------------------- tilted coords


@dataclass(frozen=True)
class TiltedLaw:
    """Tilted first-coordinate law.

    The base law is ``x = e^{i theta} sqrt(B_{1,lam})`` (the unit circle when
    ``lam = 0``); the tilted law reweights it by
    ``(1-x)^conj(delta) (1-conj(x))^delta = |1-x|^(2 Re delta) exp(2 Im delta arg(1-x))``.
    """

    lam: float
    delta: complex = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if complex(self.delta).real <= -0.5 + DELTA_MARGIN:
            raise DomainError(f"tilt exponent needs Re(delta) > -1/2, got {self.delta}")


def _base_coord(lam, gen, shape):
    theta = gen.uniform(-np.pi, np.pi, shape)
    if lam == 0:
        rad = np.ones(shape)
    else:
        rad = np.sqrt(_beta_parts(1.0, lam, gen, shape)[0])
    return rad * np.exp(1j * theta)


def _tilt_rejection(law, gen, shape):
    dlt = complex(law.delta)
    a, b = dlt.real, dlt.imag
    if a < 0:
        raise DomainError("rejection route needs Re(delta) >= 0")
    n = int(np.prod(shape, dtype=int))
    out = np.empty(n, dtype=complex)
    filled = 0
    log_bound = 2 * a * np.log(2.0) + np.pi * abs(b)
    rounds = 0
    while filled < n:
        rounds += 1
        if rounds > _MAX_ROUNDS:
            raise RejectionLimitError("tilted-coordinate rejection did not terminate")
        k = max(2 * (n - filled), 64)
        x = _base_coord(law.lam, gen, (k,))
        w = 1 - x
        with np.errstate(divide="ignore"):
            logw = 2 * a * np.log(np.abs(w)) + 2 * b * np.angle(w) - log_bound
        keep = x[np.log(gen.random(k)) < logw]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out.reshape(shape)


def _tilt_representation_parts(law, gen, shape):
    """``(|1-Y|, arg(1-Y))`` via ``1 - Y = 2 cos(phi) e^{i phi} B``."""
    dlt = complex(law.delta)
    lam = float(law.lam)
    phi = np.asarray(sample_cospower_angle(lam + dlt.real, dlt.imag, gen, shape))
    radial, _ = _beta_parts(lam + 1 + 2 * dlt.real, lam, gen, shape)
    return 2 * np.cos(phi) * radial, phi


def sample_tilted_coord(law: TiltedLaw, rng, size=None, method="auto"):
    """Draw ``Y`` from the tilted law.

    ``method`` is ``"rejection"`` (needs ``Re delta >= 0``),
    ``"representation"`` (angle/beta product, any admissible delta) or
    ``"auto"``: rejection for real nonnegative delta, otherwise the
    representation.
    """
    gen = as_generator(rng)
    shape = _shape(size)
    dlt = complex(law.delta)
    if method == "auto":
        method = "rejection" if dlt.imag == 0 and dlt.real >= 0 else "representation"
    if method == "rejection":
        y = _tilt_rejection(law, gen, shape)
    elif method == "representation":
        mod, arg = _tilt_representation_parts(law, gen, shape)
        y = 1 - mod * np.exp(1j * arg)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _scalar(np.asarray(y), size)


def sample_tilted_log_one_minus(law: TiltedLaw, rng, size=None):
    """``log(1 - Y)`` (principal branch) drawn directly in log space."""
    gen = as_generator(rng)
    shape = _shape(size)
    dlt = complex(law.delta)
    lam = float(law.lam)
    phi = np.asarray(sample_cospower_angle(lam + dlt.real, dlt.imag, gen, shape))
    b, _ = _beta_parts(lam + 1 + 2 * dlt.real, lam, gen, shape)
    out = np.log(2 * np.cos(phi)) + np.log(b) + 1j * phi
    return _scalar(out, size)


# -------------------------------------------------------------- densities


def beta_pdf(x, a, b):
    x = np.asarray(x, dtype=float)
    logc = gammaln(a + b) - gammaln(a) - gammaln(b)
    with np.errstate(divide="ignore"):
        return np.exp(logc + (a - 1) * np.log(x) + (b - 1) * np.log1p(-x))


def fst_pdf(x, s, t):
    x = np.asarray(x, dtype=float)
    logc = (1 - s - t) * np.log(2.0) + gammaln(s + t) - gammaln(s) - gammaln(t)
    with np.errstate(divide="ignore"):
        return np.exp(logc + (s - 1) * np.log1p(-x) + (t - 1) * np.log1p(x))


def cospower_pdf(phi, m, d):
    """Normalized density of :func:`sample_cospower_angle`."""
    from scipy.special import loggamma

    z = complex(m, d)
    # Normalizer pi Gamma(2m+1) / |Gamma(1+z)|^2.
    lognorm = np.log(np.pi) + gammaln(2 * m + 1) - 2 * loggamma(1 + z).real
    phi = np.asarray(phi, dtype=float)
    with np.errstate(divide="ignore"):
        return np.exp(2 * m * np.log(2 * np.cos(phi)) + 2 * d * phi - lognorm)


def tilted_coord_pdf(x, law: TiltedLaw):
    """Planar density of the tilted law for ``lam > 0`` (w.r.t. area on the disk)."""
    from scipy.special import loggamma

    lam = float(law.lam)
    if lam <= 0:
        raise DomainError("planar density needs lam > 0")
    dlt = complex(law.delta)
    x = np.asarray(x, dtype=complex)
    w = 1 - x
    # E[weight] = Gamma(lam+1) Gamma(lam+1+2 Re delta) / |Gamma(lam+1+delta)|^2.
    lognorm = gammaln(lam + 1) + gammaln(lam + 1 + 2 * dlt.real) - 2 * loggamma(lam + 1 + dlt).real
    inside = np.abs(x) < 1
    with np.errstate(divide="ignore", invalid="ignore"):
        base = lam * np.where(inside, 1 - np.abs(x) ** 2, 1.0) ** (lam - 1) / np.pi
        tilt = np.exp(2 * dlt.real * np.log(np.abs(w)) + 2 * dlt.imag * np.angle(w) - lognorm)
    return np.where(inside, base * tilt, 0.0)
