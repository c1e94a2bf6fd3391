"""Named experiments with pinned seeds and machine-readable reports.

Sampling inside an experiment is split into fixed-size chunks.  Chunk ``j``
of draw ``tag`` always uses the stream ``(seed, crc32(id), crc32(tag), j)``,
so results do not depend on how many worker threads consume the chunks.
"""
from __future__ import annotations

import json
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.special import polygamma, psi

from . import analytics as an
from .charpoly import (alpha_schedule_general, alpha_schedule_group, det_id_minus_product,
                       derivative_normalizations, group_jacobi_parameters,
                       sample_jacobi_det_pair, sample_jacobi_log_det_pair,
                       sample_jacobi_n1, sample_log_z_product_unitary,
                       sample_z_product_unitary, so_usp_derivative_pair, z_derivative)
from .distributions import (TiltedLaw, sample_beta, sample_complex_sphere,
                            sample_cospower_angle, sample_fst, sample_tilted_coord)
from .errors import ContractViolation, DomainError, InsufficientDataError, RejectionLimitError
from .measures import (check_unitary, eigenangles, reflection_product,
                       sample_conditional_haar, sample_conditional_orthogonal,
                       sample_conditional_slipped, sample_conditioned_on_abs_z,
                       sample_generalized_slip, sample_haar_unitary,
                       sample_rotated_conditional)
from .reflections import (nontrivial_eigenvalue, reflection_from_column,
                          sample_columns, sample_nu)
from .stats import corr, ks_two_sample, mc_moment, normality_check, tail_slope

__all__ = [
    "SCHEMA_VERSION", "Statistic", "ExperimentReport", "Experiment", "REGISTRY",
    "UnknownExperimentError", "InvalidParamsError", "run_experiment", "list_experiments",
    "KS_LEVEL", "reports_to_json", "reports_from_json", "execute", "run_density",
    "CLT_IDS", "density_slope",
]

SCHEMA_VERSION = 1
KS_LEVEL = 0.01


class UnknownExperimentError(KeyError):
    pass


class InvalidParamsError(ValueError):
    pass


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class Statistic:
    """One gated quantity: passes when ``value <op> threshold``.

    ``op`` is ``"<="``, ``">="`` or ``"info"`` (reported, never gated).
    """

    name: str
    value: float
    stderr: float | None = None
    threshold: float | None = None
    op: str = "<="

    @property
    def passed(self) -> bool:
        if self.op == "info":
            return True
        if not np.isfinite(self.value):
            return False
        if self.op == "<=":
            return self.value <= self.threshold
        if self.op == ">=":
            return self.value >= self.threshold
        raise ValueError(f"unknown comparison {self.op!r}")


@dataclass
class ExperimentReport:
    experiment_id: str
    params: dict
    statistics: list
    seed: int
    runtime_ms: int = 0
    pass_: bool = field(default=False)

    def __post_init__(self):
        self.pass_ = all(s.passed for s in self.statistics) and "error" not in self.params

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "experiment_id": self.experiment_id,
            "params": self.params,
            "statistics": [asdict(s) for s in self.statistics],
            "pass": self.pass_,
            "seed": self.seed,
            "runtime_ms": self.runtime_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        rep = cls(d["experiment_id"], d["params"],
                  [Statistic(**s) for s in d["statistics"]], d["seed"], d["runtime_ms"])
        if rep.pass_ != d["pass"]:
            raise ValueError("stored pass flag disagrees with the statistics")
        return rep


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1)


def reports_from_json(text):
    return [ExperimentReport.from_dict(d) for d in json.loads(text)]


def _json_param(v):
    if isinstance(v, complex):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return [_json_param(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


# ---------------------------------------------------------------- context


class Context:
    """Seeded chunked sampling shared by all experiments."""

    def __init__(self, experiment_id, seed, threads=1):
        self.key = zlib.crc32(experiment_id.encode())
        self.seed = int(seed)
        self.threads = max(1, int(threads))
        self.stats: list[Statistic] = []
        self.ks_tests = 0

    def generator(self, tag, index=0):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.key, zlib.crc32(tag.encode()), index))
        return np.random.Generator(np.random.PCG64(ss))

    def draw(self, tag, fn, total, chunk=2000):
        """Concatenate ``fn(gen, m)`` over fixed chunks; ``fn`` may return a tuple of arrays."""
        sizes = [min(chunk, total - s) for s in range(0, total, chunk)]
        jobs = [(self.generator(tag, j), m) for j, m in enumerate(sizes)]
        if self.threads == 1 or len(jobs) == 1:
            parts = [fn(g, m) for g, m in jobs]
        else:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(lambda job: fn(*job), jobs))
        if isinstance(parts[0], tuple):
            return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
        return np.concatenate(parts)

    # gate helpers
    def add(self, name, value, threshold=None, op="<=", stderr=None):
        self.stats.append(Statistic(name, float(value), None if stderr is None else float(stderr),
                                    None if threshold is None else float(threshold), op))

    def info(self, name, value, stderr=None):
        self.add(name, value, op="info", stderr=stderr)

    def match(self, name, samples, target, k=4.0):
        """Gate ``|mean - target| <= k stderr``."""
        est = mc_moment(samples)
        self.info(name + ".estimate", abs(est.value) if np.iscomplexobj(est.value) else est.value,
                  est.stderr)
        self.add(name + ".deviation", abs(est.value - target), k * est.stderr, stderr=est.stderr)
        return est

    def ks(self, name, xs, ys, level=KS_LEVEL):
        d, p = ks_two_sample(xs, ys)
        self.ks_tests += 1
        self.info(name + ".D", d)
        self.add(name + ".p", p, level, op=">=")
        return p

    def budget(self):
        if self.ks_tests:
            self.info("false_failure_budget", self.ks_tests * KS_LEVEL)


# --------------------------------------------------------------- registry


@dataclass(frozen=True)
class Experiment:
    id: str
    anchor: str
    func: object
    defaults: dict
    min_count: int = 1000


REGISTRY: dict[str, Experiment] = {}


def experiment(eid, anchor, min_count=1000, **defaults):
    def wrap(fn):
        REGISTRY[eid] = Experiment(eid, anchor, fn, defaults, min_count)
        return fn
    return wrap


def list_experiments():
    return [(e.id, e.anchor) for e in REGISTRY.values()]


def _coerce(name, default, value):
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if isinstance(default, float):
            return float(value)
        if isinstance(default, complex):
            return complex(value)
        if isinstance(default, (list, tuple)):
            if isinstance(value, str):
                value = [v for v in value.split(",") if v]
            elif not isinstance(value, (list, tuple)):
                value = [value]
            return [type(default[0])(complex(v) if isinstance(default[0], complex) else v)
                    for v in value]
    except (TypeError, ValueError):
        raise InvalidParamsError(f"bad value {value!r} for parameter {name!r}") from None
    return value


def run_experiment(eid, params=None, seed=0, threads=1, scale=1.0, timing=False):
    """Run experiment ``eid``; returns an :class:`ExperimentReport`.

    ``scale`` multiplies every ``count``-like parameter (floored at the
    experiment's minimum).  ``runtime_ms`` is recorded only with ``timing``
    so that reports stay byte-identical across runs.
    """
    if eid not in REGISTRY:
        raise UnknownExperimentError(eid)
    exp = REGISTRY[eid]
    merged = dict(exp.defaults)
    for k, v in (params or {}).items():
        if k not in exp.defaults:
            raise InvalidParamsError(f"experiment {eid!r} has no parameter {k!r}")
        merged[k] = _coerce(k, exp.defaults[k], v)
    if scale != 1.0:
        for k, v in merged.items():
            if k.endswith("count") and isinstance(v, int):
                merged[k] = max(exp.min_count, int(round(v * scale)))
    return execute(eid, exp.func, merged, seed, threads, timing)


def execute(eid, func, params, seed=0, threads=1, timing=False):
    """Run ``func(ctx, **params)`` under the seeding scheme of experiment ``eid``.

    Library errors raised by the experiment become a failed report whose
    ``params`` carry an ``error`` message.
    """
    ctx = Context(eid, seed, threads)
    t0 = time.perf_counter()
    shown = {k: _json_param(v) for k, v in params.items()}
    try:
        func(ctx, **params)
    except (DomainError, InsufficientDataError, RejectionLimitError, ContractViolation,
            ArithmeticError) as exc:
        shown["error"] = f"{type(exc).__name__}: {exc}"
    ctx.budget()
    ms = int(round(1000 * (time.perf_counter() - t0))) if timing else 0
    return ExperimentReport(eid, shown, ctx.stats, int(seed), ms)


def run_density(group, n, p, count=1_000_000, seed=0, threads=1, beta=2.0, a=0.5, b=0.5,
                timing=False):
    """Tail-slope experiment for an arbitrary group and order."""
    params = {"group": group, "n": int(n), "p": int(p), "count": int(count)}
    if group == "jacobi":
        params.update(beta=float(beta), a=float(a), b=float(b))
    return execute(f"density_{group}", density_slope, params, seed, threads, timing)


CLT_IDS = {"jacobi": "thm5_3_clt_jacobi", "so": "cor5_4_clt_so", "usp": "cor5_4_clt_usp",
           "unitary": "cor5_5_clt_unitary"}


# ---------------------------------------------------------------- helpers


def _spectral_stats(u, pin=0):
    """Re Tr, Im Tr, Re Tr u^2 and min |theta| over the angles not pinned at 0."""
    check_unitary(u)
    ang = eigenangles(u, check=False)
    tr = np.trace(u, axis1=-2, axis2=-1)
    tr2 = np.trace(u @ u, axis1=-2, axis2=-1)
    mags = np.sort(np.abs(ang), axis=-1)
    return {"re_tr": tr.real, "im_tr": tr.imag, "re_tr2": tr2.real, "min_abs_theta": mags[..., pin]}


def _ks_spectra(ctx, label, left, right, pin_left, pin_right):
    a, b = _spectral_stats(left, pin_left), _spectral_stats(right, pin_right)
    for key in a:
        ctx.ks(f"{label}.{key}", a[key], b[key])


def _mf_samples(x, t, s):
    return np.abs(x) ** t * np.exp(1j * s * np.angle(x))


MF_GRID = [(1.0, 1.0), (2.0, 0.0), (2.0, 2.0), (4.0, 0.0)]


# ================================================================ reflections


@experiment("reflection_structure",
            "Def 2.1, Eq 2.1, Eq 2.2: rank(r - Id) <= 1 and the nontrivial eigenvalue",
            n=6, count=200)
def _reflection_structure(ctx, n, count):
    gen = ctx.generator("cols")
    rank_bad, eig_dev = 0, 0.0
    for _ in range(count):
        k = int(gen.integers(1, n + 1))
        r = reflection_from_column(n, k, sample_columns(n, k, gen))
        m = r.matrix()
        sv = np.linalg.svd(m - np.eye(n), compute_uv=False)
        rank_bad += int(np.sum(sv > 1e-10) > 1)
        ev = np.linalg.eigvals(m)
        lam = nontrivial_eigenvalue(r)
        eig_dev = max(eig_dev, float(np.min(np.abs(ev - lam))))
        check_unitary(m)
        if not np.allclose(m[: k - 1, : k - 1], np.eye(k - 1)) or np.abs(m[k - 1:, k - 1] - r.column).max() > 1e-12:
            rank_bad += 1
    ctx.add("rank_violations", rank_bad, 0)
    ctx.add("eigenvalue_formula_max_dev", eig_dev, 1e-10)


@experiment("thm2_3_identity", "Thm 2.3: det(Id - r1...rn) = prod (1 - r_kk)", n=10, count=1000)
def _thm2_3(ctx, n, count):
    """Every dimension from 1 to ``n``."""
    n_max = n
    worst = 0.0
    for n in range(1, n_max + 1):
        def fn(gen, m, n=n):
            mat, diag = reflection_product(n, range(1, n + 1), gen, m, return_diagonal=True)
            det = np.linalg.det(np.eye(n) - mat)
            return np.abs(np.prod(1 - diag, axis=1) - det)
        dev = ctx.draw(f"n{n}", fn, count)
        worst = max(worst, float(dev.max()) / n)
    # direct use of the Reflection objects on one tuple per dimension
    gen = ctx.generator("objects")
    obj_dev = 0.0
    for n in range(1, n_max + 1):
        refl = [sample_nu(n, k, gen) for k in range(1, n + 1)]
        prod = np.eye(n, dtype=complex)
        for r in refl:
            prod = prod @ r.matrix()
        obj_dev = max(obj_dev, abs(np.linalg.det(np.eye(n) - prod) - det_id_minus_product(refl)) / n)
    ctx.add("max_deviation_over_n", worst, 1e-9)
    ctx.add("object_route_max_deviation_over_n", obj_dev, 1e-9)


@experiment("thm2_2_haar_product", "Thm 2.2, Eq 2.3: Haar measure as r1...rn; det(Id - u) law",
            n=5, count=10000)
def _thm2_2(ctx, n, count):
    prod = ctx.draw("product", lambda g, m: sample_haar_unitary(n, g, m), count)
    qr = ctx.draw("qr", lambda g, m: sps.unitary_group.rvs(n, size=m, random_state=g), count)
    _ks_spectra(ctx, "product_vs_qr", prod, qr, 0, 0)
    det = np.linalg.det(np.eye(n) - prod)

    def eq23(g, m):
        out = np.ones(m, dtype=complex)
        for k in range(1, n + 1):
            b = np.ones(m) if k == n else sample_beta(1, n - k, g, m)
            out *= 1 - np.exp(1j * g.uniform(-np.pi, np.pi, m)) * np.sqrt(b)
        return out
    ind = ctx.draw("eq23", eq23, count)
    ctx.ks("abs_det_matrix_vs_independent", np.abs(det), np.abs(ind))
    ctx.ks("arg_det_matrix_vs_independent", np.angle(det), np.angle(ind))


@experiment("unitarity_conditioning",
            "Def 2.5 and orthogonal remark: unitarity and p eigenvalues pinned at 1",
            n=10, count=1000)
def _unitarity(ctx, n, count):
    n_max = n
    total = ok = ok_real = total_real = 0
    for n in range(1, n_max + 1):
        for p in range(0, n):
            u = ctx.draw(f"u{n}_{p}", lambda g, m: sample_conditional_haar(n, p, g, m), count)
            check_unitary(u)
            ang = eigenangles(u, check=False)
            ok += int(np.sum(np.sum(np.abs(ang) <= 1e-8, axis=1) >= p))
            total += count
            if n <= 6:
                o = ctx.draw(f"o{n}_{p}", lambda g, m: sample_conditional_orthogonal(n, p, g, m), count)
                check_unitary(o)
                err = np.abs(np.swapaxes(o, -1, -2) @ o - np.eye(n)).max()
                if err > 1e-10 or np.iscomplexobj(o):
                    raise ContractViolation("orthogonal sample is not real orthogonal")
                ev = np.linalg.eigvals(o)
                ok_real += int(np.sum(np.sum(np.abs(ev - 1) <= 1e-8, axis=1) >= p))
                total_real += count
    ctx.add("unitary_fraction_with_p_pinned", ok / total, 1.0, op=">=")
    ctx.add("orthogonal_fraction_with_p_pinned", ok_real / total_real, 1.0, op=">=")
    ctx.info("matrices_checked", total + total_real)


@experiment("eq1_1_haar_moments", "Eq 1.1: Haar moments against Weyl-density quadrature",
            count=100000, n_closed_max=6)
def _haar_moments(ctx, count, n_closed_max):
    for n in (2, 3):
        u = ctx.draw(f"n{n}", lambda g, m: sample_haar_unitary(n, g, m), count, chunk=10000)
        tr = np.trace(u, axis1=1, axis2=2)
        det = np.linalg.det(np.eye(n) - u)
        ctx.match(f"n{n}.mean_tr", tr, 0.0)
        q_tr = an.weyl_expectation(lambda th: np.abs(np.exp(1j * th).sum(-1)) ** 2, n, 16)
        q_det = an.weyl_expectation(lambda th: np.prod(np.abs(1 - np.exp(1j * th)) ** 2, -1), n, 16)
        ctx.info(f"n{n}.quadrature_abs_tr_sq", q_tr)
        ctx.info(f"n{n}.quadrature_abs_det_sq", q_det)
        ctx.match(f"n{n}.abs_tr_sq", np.abs(tr) ** 2, q_tr)
        ctx.match(f"n{n}.abs_det_sq", np.abs(det) ** 2, q_det)
    for n in range(1, n_closed_max + 1):
        def fn(g, m, n=n):
            _, diag = reflection_product(n, range(1, n + 1), g, m, return_diagonal=True)
            return np.prod(np.abs(1 - diag) ** 2, axis=1)
        ctx.match(f"n{n}.abs_det_sq_vs_n_plus_1", ctx.draw(f"det{n}", fn, count, chunk=20000), n + 1.0)


@experiment("eq1_2_conditional_density",
            "Eq 1.2: conditional spectrum against the normalized density", count=20000)
def _eq1_2(ctx, count):
    for n, p in ((2, 1), (3, 2), (3, 1), (4, 2)):
        u = ctx.draw(f"{n}_{p}", lambda g, m: sample_conditional_haar(n, p, g, m), count)
        ang = eigenangles(u)
        order = np.argsort(np.abs(ang), axis=1)
        free = np.take_along_axis(ang, order, axis=1)[:, p:]
        norm = an.conditional_normalization(n, p)
        for j in (1, 2):
            target = an.periodic_expectation(
                lambda th: an.conditional_density_unitary(th, p) * np.cos(j * th).sum(-1), n - p, 64) / norm
            ctx.match(f"n{n}_p{p}.sum_cos{j}theta", np.cos(j * free).sum(axis=1), target)


@experiment("prop2_4_conditioning", "Prop 2.4, Eqs 2.6-2.7: conditioning on |det(Id - u)| = x",
            n=4, count=5000)
def _prop2_4(ctx, n, count):
    worst = 0.0
    for x in (1e-3, 0.5, 3.0):
        u = ctx.draw(f"x{x}", lambda g, m: sample_conditioned_on_abs_z(n, x, g, m), count, chunk=1000)
        check_unitary(u)
        worst = max(worst, float(np.max(np.abs(np.abs(np.linalg.det(np.eye(n) - u)) - x))))
        if x == 1e-3:
            ref = ctx.draw("p0", lambda g, m: sample_conditional_haar(n, 1, g, m), count)
            # one eigenangle is within O(x) of zero; compare the rest
            _ks_spectra(ctx, "small_x_vs_conditional", u, ref, 1, 1)
    ctx.add("max_abs_z_deviation", worst, 1e-9)
    _, info = sample_conditioned_on_abs_z(n, 3.0, ctx.generator("rate"), 2000, return_info=True)
    ctx.info("acceptance_rate_x3", info["acceptance_rate"])


# ======================================================= conditioning chain


@experiment("lemma3_1_conditioning", "Lemma 3.1: u and e^{i theta} r1...r(n-1) share spectra",
            n=5, count=10000)
def _lemma3_1(ctx, n, count):
    u = ctx.draw("haar", lambda g, m: sample_haar_unitary(n, g, m), count)
    v = ctx.draw("rotated", lambda g, m: sample_rotated_conditional(n, g, m), count)
    _ks_spectra(ctx, "haar_vs_rotated", u, v, 0, 0)


@experiment("lemma3_3_slipping", "Lemma 3.3: r1...r(n-1) and tilted r1^(2)...r1^(n) share spectra",
            n=5, count=10000)
def _lemma3_3(ctx, n, count):
    u = ctx.draw("plain", lambda g, m: sample_conditional_haar(n, 1, g, m), count)
    v = ctx.draw("slipped", lambda g, m: reflection_product(n, range(2, n + 1), g, m,
                                                            deltas=[1.0] * (n - 1)), count)
    _ks_spectra(ctx, "plain_vs_slipped", u, v, 1, 1)


@experiment("eq3_2_iterated_slip", "Eq 3.2: r1...r(n-p) and r_p^(p+1)...r_p^(n) share spectra",
            n=6, p=2, count=10000)
def _eq3_2(ctx, n, p, count):
    u = ctx.draw("plain", lambda g, m: sample_conditional_haar(n, p, g, m), count)
    v = ctx.draw("slipped", lambda g, m: sample_conditional_slipped(n, p, g, m), count)
    _ks_spectra(ctx, "plain_vs_slipped", u, v, p, p)


@experiment("general_slip", "Lemma 3.3 remark: slipping with complex tilt exponents",
            n=5, deltas=[0.5 + 0.5j, -0.25 + 0j], count=10000)
def _general_slip(ctx, n, deltas, count):
    m_ = len(deltas)
    pair = ctx.draw("pair", lambda g, m: sample_generalized_slip(n, deltas, g, m), count)
    _ks_spectra(ctx, "left_vs_right", pair[0], pair[1], n - m_, n - m_)


@experiment("h_sampling_weights", "Def 3.2: tilted column law matches reweighted uniform draws",
            n=4, k=1, delta=1.0 + 0.5j, count=20000)
def _h_sampling(ctx, n, k, delta, count):
    dim = n - k + 1
    tilted = ctx.draw("tilted", lambda g, m: sample_columns(n, k, g, m, delta=delta)[:, 0], count)
    plain = ctx.draw("plain", lambda g, m: sample_complex_sphere(dim, g, m)[:, 0], 20 * count,
                     chunk=50000)
    w = np.exp(2 * delta.real * np.log(np.abs(1 - plain)) + 2 * delta.imag * np.angle(1 - plain))
    for j, f in (("re", np.real), ("abs_sq", lambda z: np.abs(z) ** 2)):
        target = float(np.sum(w * f(plain)) / np.sum(w))
        ctx.match(f"weighted_mean_{j}", f(tilted), target, k=5.0)


@experiment("thm3_4_weyl_induction",
            "Thm 3.4: Weyl formula by induction; normalizing constant equal to n",
            n=4, count=100000)
def _thm3_4(ctx, n, count):
    def fn(g, m):
        _, diag = reflection_product(n - 1, range(1, n), g, m, return_diagonal=True)
        return np.prod(np.abs(1 - diag) ** 2, axis=1)
    ctx.match("constant_equal_to_n", ctx.draw("cst", fn, count, chunk=20000), float(n))
    small = min(count, 10000)
    u = ctx.draw("haar", lambda g, m: sample_haar_unitary(n, g, m), small)

    def chain(g, m):
        v = reflection_product(n, range(2, n + 1), g, m, deltas=[1.0] * (n - 1))
        return np.exp(1j * g.uniform(-np.pi, np.pi, m))[:, None, None] * v
    w = ctx.draw("chain", chain, small)
    _ks_spectra(ctx, "haar_vs_rotated_slipped", u, w, 0, 0)
    for n_q in (2, 3):
        q = an.weyl_expectation(lambda th: np.abs(np.exp(1j * th).sum(-1)) ** 4, n_q, 16)
        uq = ctx.draw(f"tr4_{n_q}", lambda g, m: sample_haar_unitary(n_q, g, m), count, chunk=10000)
        ctx.match(f"n{n_q}.abs_tr_pow4", np.abs(np.trace(uq, axis1=1, axis2=2)) ** 4, q)


# ================================================================ section 4


@experiment("cor4_1_ks",
            "Cor 4.1: matrix-route and product-route Z^(p) agree; exact second moment",
            n=8, p=[1, 2], count=10000)
def _cor4_1(ctx, n, p, count):
    for q in p:
        u = ctx.draw(f"mat{q}", lambda g, m: sample_conditional_haar(n, q, g, m), count)
        zm = z_derivative(eigenangles(u), q) / math.factorial(q)
        zp = ctx.draw(f"prod{q}", lambda g, m: sample_z_product_unitary(n, q, g, m), count) / math.factorial(q)
        ctx.ks(f"p{q}.abs_z", np.abs(zm), np.abs(zp))
        ctx.ks(f"p{q}.arg_z", np.angle(zm), np.angle(zp))
        exact = an.expected_sq_modulus_zp(n, q)
        ctx.info(f"p{q}.exact_sq_modulus", exact)
        ctx.match(f"p{q}.matrix_sq_modulus", np.abs(zm) ** 2, exact)
        ctx.match(f"p{q}.product_sq_modulus", np.abs(zp) ** 2, exact)


@experiment("eq4_2_n1_law", "Eq 4.2 at n = 1: 4 B_{a+1,b+1} against 2(1 - alpha_0)", count=100000)
def _eq4_2_n1(ctx, count):
    worst = 0.0
    for a, b in ((-0.5, -0.5), (1.5, -0.5), (2.5, 0.5)):
        sched = alpha_schedule_general(2.0, a, b, 1)
        pair, al = ctx.draw(f"alpha{a}_{b}", lambda g, m: _det_pair_with_alphas(sched, g, m),
                            count, chunk=20000)
        direct = ctx.draw(f"beta{a}_{b}", lambda g, m: 2 - sample_jacobi_n1(a, b, g, m), count,
                          chunk=20000)
        ctx.ks(f"a{a}_b{b}.det_plus", direct, pair[:, 0])
        a0 = al[:, 0]
        dev = np.abs(pair[:, 0] * pair[:, 1] - 4 * (1 - a0) * (1 + a0))
        worst = max(worst, float(dev.max()))
    ctx.add("product_identity_max_abs_dev", worst, 1e-12)


def _det_pair_with_alphas(sched, g, m):
    pair, al = sample_jacobi_det_pair(sched, g, m, return_alphas=True)
    return np.column_stack([pair.z_plus, pair.z_minus]), al


@experiment("def4_2_fst_moments", "Def 4.2: f_{s,t} mean and second moment", count=100000)
def _def4_2(ctx, count):
    for s, t in ((0.5, 0.5), (2.5, 0.5), (1.0, 3.0), (7.5, 6.0)):
        x = ctx.draw(f"{s}_{t}", lambda g, m: sample_fst(s, t, g, m), count, chunk=50000)
        ctx.match(f"s{s}_t{t}.mean", x, (t - s) / (t + s))
        ctx.match(f"s{s}_t{t}.second", x**2, ((t - s) ** 2 + (t + s)) / ((t + s) * (t + s + 1)))


@experiment("eq4_1_jacobi_two_point",
            "Eq 4.1, Eq 4.2: two-point Jacobi quadrature against the alpha route",
            beta=2.0, a=0.5, b=0.5, count=100000)
def _eq4_1(ctx, beta, a, b, count):
    q = an.jacobi_expectation(lambda x: np.prod(2 - x), 2, beta, a, b)
    sched = alpha_schedule_general(beta, a, b, 2)
    prod = 2 * np.prod([an.fst_moment(s, t, 1) for s, t in sched.pairs])
    ctx.info("quadrature_mean_det_plus", q)
    ctx.add("quadrature_vs_alpha_product", abs(q - prod), 1e-4)
    dp = ctx.draw("alpha", lambda g, m: sample_jacobi_det_pair(sched, g, m).z_plus, count, chunk=50000)
    ctx.match("mc_mean_det_plus", dp, q)
    qm = an.jacobi_expectation(lambda x: np.prod(2 + x) ** 2, 2, beta, a, b)
    dm = ctx.draw("alpha_minus", lambda g, m: sample_jacobi_det_pair(sched, g, m).z_minus, count,
                  chunk=50000)
    ctx.match("mc_second_det_minus", dm**2, qm)


@experiment("so_usp_change_of_variables",
            "Sec 4 SO/USp statistics: x = 2 cos(theta) maps them to the Jacobi ensemble")
def _change_vars(ctx):
    from scipy import integrate

    worst = 0.0
    for group, shift in (("so", -0.5), ("usp", 0.5)):
        for f in (lambda x: x, lambda x: x**2, lambda x: (2 - x) ** 3):
            norm = integrate.quad(lambda th: an.so_usp_density([th], group), 0, np.pi)[0]
            lhs = integrate.quad(lambda th: f(2 * np.cos(th)) * an.so_usp_density([th], group),
                                 0, np.pi)[0] / norm
            rhs = an.jacobi_expectation(lambda x: f(x[0]), 1, 2.0, shift, shift)
            worst = max(worst, abs(lhs - rhs))
        sched_g = alpha_schedule_group(group, 3, 1, 1)
        sched_j = alpha_schedule_general(*group_jacobi_parameters(group, 1, 1), 3)
        worst = max(worst, float(np.abs(sched_g.pairs - sched_j.pairs).max()))
    ctx.add("max_abs_difference", worst, 1e-8)


@experiment("cor4_3_moments", "Cor 4.3: SO/USp derivative moments against f_{s,t} products",
            n=4, count=100000)
def _cor4_3(ctx, n, count):
    for group in ("so", "usp"):
        for pp, pm in ((0, 0), (1, 0), (1, 1)):
            sched = alpha_schedule_group(group, n, pp, pm)
            pair = ctx.draw(f"{group}{pp}{pm}", lambda g, m: tuple(
                so_usp_derivative_pair(group, n, pp, pm, g, m)), count, chunk=20000)
            sign = np.where(np.arange(len(sched)) % 2 == 0, 1, -1)
            e_plus = 2 * np.prod([an.fst_moment(s, t, 1) for s, t in sched.pairs])
            e_minus = 2 * np.prod([an.fst_moment(s, t, 1, sign=int(sg))
                                   for (s, t), sg in zip(sched.pairs, sign)])
            e_plus2 = 4 * np.prod([an.fst_moment(s, t, 2) for s, t in sched.pairs])
            tag = f"{group}_p{pp}{pm}"
            ctx.match(tag + ".mean_det_plus", pair[0], e_plus)
            ctx.match(tag + ".mean_det_minus", pair[1], e_minus)
            ctx.match(tag + ".second_det_plus", pair[0] ** 2, e_plus2)


# ================================================================ section 5

# Deep tail window: quantiles of the sample, two decades of probability.
DENSITY_WINDOW = (3e-5, 1e-2)
DENSITY_BINS = 12


def density_slope(ctx, group, n, p, count, beta=2.0, a=0.5, b=0.5):
    """Fit the density exponent near 0 and gate it against the predicted one."""
    if group in ("unitary", "unitary-conditional"):
        xs = ctx.draw("z", lambda g, m: np.abs(sample_z_product_unitary(n, p, g, m)), count,
                      chunk=100000)
        target, tol = 2.0 * p, (0.15 if p <= 1 else 0.2)
    elif group in ("so", "usp"):
        xs = ctx.draw("z", lambda g, m: so_usp_derivative_pair(group, n, p, 0, g, m).z_plus,
                      count, chunk=100000)
        a_ = group_jacobi_parameters(group, p, 0)[1]
        target, tol = a_, (0.15 if group == "so" else 0.2)
    elif group == "jacobi":
        sched = alpha_schedule_general(beta, a, b, n)
        xs = ctx.draw("z", lambda g, m: sample_jacobi_det_pair(sched, g, m).z_plus, count,
                      chunk=100000)
        target, tol = a, 0.15
    else:
        raise DomainError(f"no density experiment for group {group!r}")
    lo, hi = np.quantile(xs, DENSITY_WINDOW)
    slope, se = tail_slope(xs, (lo, hi), bins=DENSITY_BINS)
    ctx.info("slope", slope, se)
    ctx.info("target", target)
    ctx.info("window_lo", lo)
    ctx.info("window_hi", hi)
    ctx.add("abs_slope_error", abs(slope - target), tol, stderr=se)


@experiment("cor5_2_density_unitary_p1", "Cor 5.2: |Z_U^(p)| density ~ eps^(2p), p = 1",
            min_count=100000, n=3, p=1, count=1000000)
def _density_u1(ctx, n, p, count):
    density_slope(ctx, "unitary", n, p, count)


@experiment("cor5_2_density_unitary_p2", "Cor 5.2: |Z_U^(p)| density ~ eps^(2p), p = 2",
            min_count=100000, n=4, p=2, count=1000000)
def _density_u2(ctx, n, p, count):
    density_slope(ctx, "unitary", n, p, count)


@experiment("eq5_1_density_so", "Eq 5.1, Cor 5.1: SO derivative density ~ eps^(2p - 1/2)",
            min_count=100000, n=1, p=1, count=1000000)
def _density_so(ctx, n, p, count):
    density_slope(ctx, "so", n, p, count)


@experiment("cor5_1_density_usp", "Cor 5.1: USp derivative density ~ eps^(2p + 1/2)",
            min_count=100000, n=1, p=1, count=1000000)
def _density_usp(ctx, n, p, count):
    density_slope(ctx, "usp", n, p, count)


@experiment("cor5_1_constant", "Cor 5.1: explicit c(n) against two-point quadrature")
def _cor5_1_constant(ctx):
    for beta, a, b in ((2.0, 1.5, -0.5), (2.0, 2.5, 0.5), (1.0, 0.5, 0.0)):
        prod = an.jacobi_edge_constant(beta, a, b, 2)
        quad = an.jacobi_edge_constant_quadrature(beta, a, b)
        ctx.info(f"beta{beta}_a{a}_b{b}.c2", prod)
        ctx.add(f"beta{beta}_a{a}_b{b}.rel_dev", abs(prod - quad) / quad, 1e-6)


# ------------------------------------------------------------------ CLTs


def _jacobi_log_oracles(sched):
    """Exact mean, variance and covariance of ``(log det+, log det-)``."""
    s, t = sched.s, sched.t
    even = np.arange(len(s)) % 2 == 0
    ln2 = math.log(2)
    mean_lb, var_lb = psi(s) - psi(s + t), polygamma(1, s) - polygamma(1, s + t)
    mean_l1b, var_l1b = psi(t) - psi(s + t), polygamma(1, t) - polygamma(1, s + t)
    m_plus = ln2 + np.sum(ln2 + mean_lb)
    m_minus = ln2 + np.sum(np.where(even, ln2 + mean_l1b, ln2 + mean_lb))
    v_plus = np.sum(var_lb)
    v_minus = np.sum(np.where(even, var_l1b, var_lb))
    cov = np.sum(np.where(even, -polygamma(1, s + t), var_lb))
    return float(m_plus), float(m_minus), float(v_plus), float(v_minus), float(cov)


def _clt_gates(ctx, label, xs, log_n, target_var, count_tol=True):
    info = normality_check(xs)
    se = info["mean_se"]
    ctx.info(f"{label}.mean", info["mean"], se)
    ctx.add(f"{label}.abs_mean", abs(info["mean"]), 5 * se + 0.1 * math.sqrt(0.5 * log_n), stderr=se)
    ratio = info["variance"] / target_var
    ctx.add(f"{label}.variance_ratio_low", ratio, 0.85, op=">=", stderr=info["variance_se"] / target_var)
    ctx.add(f"{label}.variance_ratio_high", ratio, 1.2, op="<=", stderr=info["variance_se"] / target_var)
    ctx.info(f"{label}.skewness", info["skewness"], info["skewness_se"])
    ctx.info(f"{label}.excess_kurtosis", info["excess_kurtosis"], info["excess_kurtosis_se"])
    ctx.add(f"{label}.ks_normal_p", info["ks_p"], 0.001, op=">=")


def _clt_pair(ctx, sched, n, count, centers, scale, norms=(0.0, 0.0)):
    logs = ctx.draw("logs", lambda g, m: tuple(sample_jacobi_log_det_pair(sched, g, m)), count,
                    chunk=250)
    log_n = math.log(n)
    m_p, m_m, v_p, v_m, cov = _jacobi_log_oracles(sched)
    raw = (logs[0], logs[1])
    normed = []
    for label, x, c, nrm, mu, var in (("plus", raw[0], centers[0], norms[0], m_p, v_p),
                                      ("minus", raw[1], centers[1], norms[1], m_m, v_m)):
        ctx.match(f"{label}.exact_log_mean", x, mu)
        ctx.info(f"{label}.exact_variance_ratio", var / (scale * log_n))
        ctx.info(f"{label}.exact_normalized_bias", (mu + nrm - c * log_n) / math.sqrt(scale * log_n))
        z = (x + nrm - c * log_n) / math.sqrt(scale * log_n)
        normed.append(z)
        _clt_gates(ctx, label, z, log_n, 1.0)
    r, se = corr(normed[0], normed[1])
    ctx.info("exact_correlation", cov / math.sqrt(v_p * v_m))
    ctx.add("abs_correlation", abs(r), 0.05, stderr=se)


@experiment("thm5_3_clt_jacobi", "Thm 5.3: CLT for log det(2Id -+ u), Jacobi ensemble",
            n=10000, beta=2.0, a=0.0, b=0.0, count=20000)
def _thm5_3(ctx, n, beta, a, b, count):
    if a < 0 or b < 0:
        raise DomainError("the CLT needs a, b >= 0")
    sched = alpha_schedule_general(beta, a, b, n)
    centers = (-(0.5 - (2 * a + 1) / beta), -(0.5 - (2 * b + 1) / beta))
    _clt_pair(ctx, sched, n, count, centers, 2.0 / beta)


def _group_clt(ctx, group, n, p_plus, p_minus, count):
    sched = alpha_schedule_group(group, n, p_plus, p_minus)
    shift = 0.5 if group == "usp" else -0.5
    centers = (2 * p_plus + shift, 2 * p_minus + shift)
    norms = tuple(math.log(c) for c in derivative_normalizations(p_plus, p_minus))
    _clt_pair(ctx, sched, n, count, centers, 1.0, norms)


@experiment("cor5_4_clt_so", "Cor 5.4: CLT for SO derivatives at +1 and -1",
            n=10000, p_plus=1, p_minus=1, count=20000)
def _cor5_4_so(ctx, n, p_plus, p_minus, count):
    _group_clt(ctx, "so", n, p_plus, p_minus, count)


@experiment("cor5_4_clt_usp", "Cor 5.4: CLT for USp derivatives at +1 and -1",
            n=10000, p_plus=0, p_minus=0, count=20000)
def _cor5_4_usp(ctx, n, p_plus, p_minus, count):
    _group_clt(ctx, "usp", n, p_plus, p_minus, count)


@experiment("cor5_5_clt_unitary", "Cor 5.5: complex CLT for log Z_U^(p)",
            n=10000, p=1, count=20000)
def _cor5_5(ctx, n, p, count):
    logs = ctx.draw("logs", lambda g, m: sample_log_z_product_unitary(n, p, g, m), count, chunk=250)
    log_n = math.log(n)
    lam = np.arange(n - p, dtype=float)
    mu = math.lgamma(p + 1) + float(np.sum(psi(lam + 1 + 2 * p) - psi(lam + 1 + p)))
    var_re = float(np.sum(polygamma(1, lam + 1 + 2 * p) - 0.5 * polygamma(1, lam + 1 + p)))
    var_im = float(np.sum(0.5 * polygamma(1, lam + 1 + p)))
    ctx.match("re.exact_log_mean", logs.real, mu)
    ctx.match("im.exact_log_mean", logs.imag, 0.0)
    ctx.info("re.exact_variance_ratio", var_re / (0.5 * log_n))
    ctx.info("im.exact_variance_ratio", var_im / (0.5 * log_n))
    ctx.info("re.exact_normalized_bias", (mu - p * log_n) / math.sqrt(log_n))
    z = (logs - p * log_n) / math.sqrt(log_n)
    _clt_gates(ctx, "re", z.real, log_n, 0.5)
    _clt_gates(ctx, "im", z.imag, log_n, 0.5)
    r, se = corr(z.real, z.imag)
    ctx.add("abs_correlation", abs(r), 0.05, stderr=se)


# ================================================================ appendix


@experiment("eq_a1_beta_mellin", "Eq A.1: Mellin transform of beta variables", count=100000)
def _eq_a1(ctx, count):
    for a, b, s in ((1.0, 1.0, 2.0), (2.5, 0.5, 1.5), (0.5, 3.0, 0.5)):
        x = ctx.draw(f"{a}_{b}", lambda g, m: sample_beta(a, b, g, m), count, chunk=50000)
        ctx.match(f"a{a}_b{b}_s{s}", x**s, an.beta_mellin(a, b, s))


@experiment("lemma_a2_transform", "Lemma A.2: transform of 1 + e^{i theta} sqrt(B_{1,lam})",
            count=100000)
def _lemma_a2(ctx, count):
    for lam in (1.0, 3.0):
        def fn(g, m):
            return 1 + np.exp(1j * g.uniform(-np.pi, np.pi, m)) * np.sqrt(sample_beta(1, lam, g, m))
        x = ctx.draw(f"lam{lam}", fn, count, chunk=50000)
        for t, s in MF_GRID:
            ctx.match(f"lam{lam}_t{t}_s{s}", _mf_samples(x, t, s), an.mf_one_plus_sphere_coord(lam, t, s))


@experiment("lemma_a3_transform", "Lemma A.3: transform of 2 cos(phi) e^{i phi}", count=100000)
def _lemma_a3(ctx, count):
    for z in (0.0, 1.0, 0.5 + 0.5j):
        zc = complex(z)
        phi = ctx.draw(f"z{z}", lambda g, m: sample_cospower_angle(zc.real, zc.imag, g, m), count,
                       chunk=50000)
        x = 2 * np.cos(phi) * np.exp(1j * phi)
        for t, s in MF_GRID:
            ctx.match(f"z{z}_t{t}_s{s}", _mf_samples(x, t, s), an.mf_cospower(z, t, s))


@experiment("lemma_a4_transform", "Lemma A.4: transform of 1 - Y for the tilted coordinate Y",
            count=100000)
def _lemma_a4(ctx, count):
    for lam in (1.0, 3.0):
        for delta in (0.0, 1.0, 0.5 + 0.5j):
            law = TiltedLaw(lam, delta)
            y = ctx.draw(f"lam{lam}_d{delta}", lambda g, m: sample_tilted_coord(law, g, m,
                                                                                method="rejection"),
                         count, chunk=50000)
            for t, s in MF_GRID:
                ctx.match(f"lam{lam}_d{delta}_t{t}_s{s}", _mf_samples(1 - y, t, s),
                          an.mf_tilted_one_minus(lam, delta, t, s))


@experiment("tilted_routes_ks", "Lemma A.4, Def 3.2: rejection and angle-beta routes agree",
            count=10000)
def _tilted_routes(ctx, count):
    for lam, delta in ((0.0, 1.0), (3.0, 0.5 + 0.5j), (2.0, 2.0)):
        law = TiltedLaw(lam, delta)
        a = ctx.draw(f"rej{lam}_{delta}", lambda g, m: sample_tilted_coord(law, g, m, method="rejection"), count)
        b = ctx.draw(f"rep{lam}_{delta}", lambda g, m: sample_tilted_coord(law, g, m,
                                                                           method="representation"), count)
        ctx.ks(f"lam{lam}_d{delta}.abs_one_minus", np.abs(1 - a), np.abs(1 - b))
        ctx.ks(f"lam{lam}_d{delta}.arg_one_minus", np.angle(1 - a), np.angle(1 - b))


@experiment("thm_a1_identity", "Thm A.1: Y - (1-|Y|^2) B / (1 - conj Y) has the shifted tilted law",
            lam=3.0, count=10000)
def _thm_a1(ctx, lam, count):
    for delta in (1.0, 0.5 + 0.5j):
        def lhs(g, m, delta=delta):
            y = sample_tilted_coord(TiltedLaw(lam, delta), g, m)
            b = sample_beta(1, lam - 1, g, m)
            return y - (1 - np.abs(y) ** 2) * b / (1 - np.conj(y))
        w = ctx.draw(f"lhs{delta}", lhs, count)
        z = ctx.draw(f"rhs{delta}", lambda g, m: sample_tilted_coord(TiltedLaw(lam - 1, delta + 1), g, m),
                     count)
        ctx.ks(f"d{delta}.re", w.real, z.real)
        ctx.ks(f"d{delta}.im", w.imag, z.imag)
        ctx.ks(f"d{delta}.abs", np.abs(w), np.abs(z))
        for t, s in MF_GRID:
            ctx.match(f"d{delta}.t{t}_s{s}", _mf_samples(1 - w, t, s),
                      an.mf_theorem_a1_target(lam, delta, t, s))
