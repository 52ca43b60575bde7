"""Synthetic scenarios, error metrics and replicated benchmarks.

Random streams
--------------
Every replication draws from its own ``numpy.random.Generator`` (PCG64)
seeded with ``SeedSequence([seed, rep_index, scenario_hash])`` where
``scenario_hash`` is the first 8 bytes (little endian) of the BLAKE2b digest
of the scenario id. Replications are therefore independent of each other, of
execution order and of how many replications are requested. Within a
replication the draw order is: precision matrix (models M3 and M5), class
means, training samples class by class, test samples class by class. Uniforms
come from ``Generator.random``/``Generator.uniform``, Bernoulli(0.15) is
``Generator.random() < 0.15`` and normals use numpy's ziggurat sampler.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import hashlib
import logging
import math
import re

import numpy as np

from .estimator import Dataset, GRID_MULTIPLIERS, Hyperparams, tune
from .exceptions import BenchmarkFailed, GAQQError, InvalidInput
from .numerics import cholesky_lower, inv_spd, sym_eig
from .predictor import glda_baseline, predict_batch

logger = logging.getLogger(__name__)

PRECISION_MODELS = ("M1", "M2", "M3", "M4", "M5")
METHODS = ("GAQQ", "GLDA")
M5_MIN_EIGENVALUE = 0.05


@dataclass(frozen=True)
class ScenarioSpec:
    """A simulation design.

    Two-class designs set ``sparsity`` to ``"S1"`` or ``"S2"`` and use
    ``sizes=(n1, n2)``; multi-class designs leave ``sparsity`` as ``None`` and
    give one size per class. ``test_sizes`` defaults to ``sizes``.
    """

    precision_model: str
    p: int
    sizes: tuple
    sparsity: str = None
    test_sizes: tuple = None
    seed: int = 0
    name: str = None

    def __post_init__(self):
        if self.precision_model not in PRECISION_MODELS:
            raise InvalidInput(f"unknown precision model {self.precision_model!r}")
        if self.p < 2:
            raise InvalidInput("p must be at least 2")
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2 or min(sizes) < 2:
            raise InvalidInput("need K >= 2 classes with at least two samples each")
        test = sizes if self.test_sizes is None else tuple(int(s) for s in self.test_sizes)
        if len(test) != len(sizes) or min(test) < 1:
            raise InvalidInput("test sizes must match the classes")
        object.__setattr__(self, "test_sizes", test)
        if self.sparsity is not None:
            if self.sparsity not in ("S1", "S2"):
                raise InvalidInput(f"unknown sparsity {self.sparsity!r}")
            if len(sizes) != 2:
                raise InvalidInput("sparsity scenarios are two-class")

    @property
    def k_classes(self) -> int:
        return len(self.sizes)

    @property
    def scenario_id(self) -> str:
        if self.name:
            return self.name
        m = self.precision_model.lower()
        if self.sparsity is not None:
            return f"{m}-{self.sparsity.lower()}-p{self.p}-n{'x'.join(map(str, self.sizes))}"
        return f"{m}-k{self.k_classes}-p{self.p}-n{'x'.join(map(str, self.sizes))}"


_PRESET = re.compile(r"^t([123])-m([1-5])-(?:(s[12])-)?p(\d+)(?:-k(\d+))?$")


def scenario_preset(name: str, seed: int = 0) -> ScenarioSpec:
    """Named table scenarios.

    ``t1-m<1..5>-s<1|2>-p<p>`` and ``t2-...`` are the two-class designs with 30
    training and 30 test samples per class (``t1`` and ``t2`` name the same
    design); ``t3-m<1..5>-p<p>[-k<K>]`` is the multi-class design with 30 per
    class and ``K = 4`` unless given.
    """
    m = _PRESET.match(name.lower())
    if not m:
        raise InvalidInput(f"unknown scenario preset {name!r}")
    table, model, sparsity, p, k = m.groups()
    p = int(p)
    if table in "12":
        if sparsity is None or k is not None:
            raise InvalidInput(f"two-class preset {name!r} needs s1/s2 and no -k")
        return ScenarioSpec(f"M{model}", p, (30, 30), sparsity.upper(), seed=seed, name=name.lower())
    if sparsity is not None:
        raise InvalidInput(f"multi-class preset {name!r} takes no sparsity")
    K = int(k) if k else 4
    return ScenarioSpec(f"M{model}", p, (30,) * K, None, seed=seed, name=name.lower())


def scenario_hash(scenario_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(scenario_id.encode(), digest_size=8).digest(), "little")


def replication_rng(seed: int, rep_index: int, scenario_id: str) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(rep_index),
                                 scenario_hash(scenario_id)])
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# truth generators


def make_precision(model: str, p: int, rng: np.random.Generator = None) -> np.ndarray:
    if model not in PRECISION_MODELS:
        raise InvalidInput(f"unknown precision model {model!r}")
    if p < 2:
        raise InvalidInput("p must be at least 2")
    if model == "M1":
        return np.eye(p)
    idx = np.arange(p)
    ar = 0.6 ** np.abs(idx[:, None] - idx[None, :])
    if model == "M2":
        return ar
    if model == "M3":
        if rng is None:
            raise InvalidInput("M3 needs a random generator")
        perm = rng.permutation(p)
        return ar[np.ix_(perm, perm)]
    if model == "M4":
        if p < 6:
            raise InvalidInput("M4 needs p >= 6")
        c = np.eye(p)
        c[:5, :5] = 0.6
        np.fill_diagonal(c[:5, :5], 1.0)
        return c
    if rng is None:
        raise InvalidInput("M5 needs a random generator")
    theta = np.zeros((p, p))
    iu = np.triu_indices(p, 1)
    b = rng.random(iu[0].size) < 0.15
    u = rng.uniform(-1.0, 1.0, iu[0].size)
    theta[iu] = b * u
    theta = theta + theta.T
    lam_min = sym_eig(theta).values[0]
    step = 1
    while lam_min + 0.1 * step < M5_MIN_EIGENVALUE:
        step += 1
    return theta + 0.1 * step * np.eye(p)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_means_two_class(p: int, sparsity: str, rng: np.random.Generator):
    """``mu1 = 0``; ``mu2`` has 25% (S1) or 75% (S2) zeros, the rest Unif(0, 2)."""
    if p < 4:
        raise InvalidInput("p must be at least 4")
    frac = {"S1": 0.25, "S2": 0.75}.get(sparsity)
    if frac is None:
        raise InvalidInput(f"unknown sparsity {sparsity!r}")
    n_zero = _round_half_up(frac * p)
    mu2 = np.zeros(p)
    support = rng.permutation(p)[n_zero:]
    mu2[np.sort(support)] = rng.uniform(0.0, 2.0, support.size)
    return np.zeros(p), mu2


def make_means_multi(p: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """Class ``k`` is ``0.5 k + Unif(-1, 1)`` on 1-based coordinates ``2k-1 .. 2k+6``."""
    if K < 2 or p < 2 * K + 6:
        raise InvalidInput(f"need K >= 2 and p >= 2K + 6, got K={K}, p={p}")
    mus = np.zeros((K, p))
    for k in range(1, K + 1):
        mus[k - 1, 2 * k - 2: 2 * k + 6] = 0.5 * k + rng.uniform(-1.0, 1.0, 8)
    return mus


def sample_mvn(mu, precision, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` rows from ``N(mu, precision^{-1})`` via the Cholesky factor of the covariance."""
    mu = np.asarray(mu, float)
    chol = cholesky_lower(inv_spd(precision))
    if mu.shape != (chol.shape[0],):
        raise InvalidInput("mean and precision dimensions differ")
    z = rng.standard_normal((int(n), chol.shape[0]))
    return z @ chol.T + mu


# ---------------------------------------------------------------------------
# metrics


def misclassification_error(truth, pred) -> float:
    truth, pred = np.asarray(truth), np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1 or truth.size == 0:
        raise InvalidInput("label vectors must be non-empty and of equal length")
    return float(np.mean(truth != pred))


def rmspe(truth, pred) -> float:
    truth, pred = np.asarray(truth, float), np.asarray(pred, float)
    if truth.shape != pred.shape or truth.ndim != 1 or truth.size == 0:
        raise InvalidInput("response vectors must be non-empty and of equal length")
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


# ---------------------------------------------------------------------------
# replications


@dataclass(frozen=True)
class BenchmarkConfig:
    """How GAQQ is tuned inside a benchmark.

    Grids are the multipliers applied to ``sqrt(log p / n) * n``.
    """

    grid1: tuple = GRID_MULTIPLIERS
    grid2: tuple = GRID_MULTIPLIERS
    hp: Hyperparams = field(default_factory=Hyperparams)


def simulate(spec: ScenarioSpec, rng: np.random.Generator):
    """Draw truth and the training/test sets of one replication.

    Returns ``(train, test, truth)`` with ``truth = {"precision", "means"}``.
    """
    prec = make_precision(spec.precision_model, spec.p, rng)
    if spec.sparsity is not None:
        means = np.vstack(make_means_two_class(spec.p, spec.sparsity, rng))
    else:
        means = make_means_multi(spec.p, spec.k_classes, rng)

    def draw(sizes):
        w = np.vstack([sample_mvn(means[k], prec, n_k, rng) for k, n_k in enumerate(sizes)])
        z = np.repeat(np.arange(1, len(sizes) + 1), sizes)
        return w, z

    train = Dataset(*draw(spec.sizes))
    test_w, test_z = draw(spec.test_sizes)
    return train, (test_w, test_z), {"precision": prec, "means": means}


def fit_method(method: str, train: Dataset, config: BenchmarkConfig = None):
    config = config or BenchmarkConfig()
    if method == "GLDA":
        return glda_baseline(train)
    if method == "GAQQ":
        base = math.sqrt(math.log(train.p) / train.n) * train.n
        res = tune(train, np.asarray(config.grid1) * base, np.asarray(config.grid2) * base,
                   config.hp)
        return res.model
    raise InvalidInput(f"unknown method {method!r}")


def run_replication(spec: ScenarioSpec, method: str, config: BenchmarkConfig = None,
                    rep_index: int = 0):
    """One replication: simulate, fit ``method`` and score it on the test set.

    Returns ``(me, rmspe)`` with ``me`` a fraction.
    """
    rng = replication_rng(spec.seed, rep_index, spec.scenario_id)
    train, (test_w, test_z), _ = simulate(spec, rng)
    model = fit_method(method, train, config)
    pred = predict_batch(model, test_w[:, :-1])
    return misclassification_error(test_z, pred.z_hat), rmspe(test_w[:, -1], pred.y_hat)


@dataclass
class BenchmarkResult:
    scenario: ScenarioSpec
    method: str
    reps: int
    me_mean: float  # percent
    me_se: float
    rmspe_mean: float
    rmspe_se: float
    failed: int = 0
    per_rep: list = field(default_factory=list, repr=False)  # (rep, me %, rmspe)


def summarize(scenario, method, rows, failed=0) -> BenchmarkResult:
    """Mean and standard error (sample sd / sqrt(reps)) of per-replication rows."""
    rows = sorted(rows)
    me = np.array([r[1] for r in rows])
    rm = np.array([r[2] for r in rows])
    k = len(rows)
    se = (lambda v: float(np.std(v, ddof=1) / math.sqrt(k)) if k > 1 else math.nan)
    return BenchmarkResult(scenario, method, k, float(me.mean()), se(me),
                           float(rm.mean()), se(rm), failed, rows)


def run_benchmark(spec: ScenarioSpec, methods=METHODS, reps: int = 100,
                  config: BenchmarkConfig = None, threads: int = 1):
    """Replicate ``reps`` times per method and summarise ME (percent) and RMSPE."""
    if reps < 2:
        raise InvalidInput("need at least two replications")
    config = config or BenchmarkConfig()
    jobs = [(m, r) for m in methods for r in range(reps)]

    def job(item):
        m, r = item
        try:
            return m, r, run_replication(spec, m, config, r), None
        except GAQQError as exc:
            return m, r, None, str(exc)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(job, jobs))
    else:
        out = [job(j) for j in jobs]

    results = []
    for m in methods:
        rows = [(r, 100.0 * v[0], v[1]) for mm, r, v, err in out if mm == m and err is None]
        failed = sum(1 for mm, _, _, err in out if mm == m and err is not None)
        if failed:
            logger.warning("%s on %s: %d failed replications", m, spec.scenario_id, failed)
        if not rows:
            raise BenchmarkFailed(f"all replications of {m} on {spec.scenario_id} failed")
        results.append(summarize(spec, m, rows, failed))
    return results
