"""Monte Carlo harness: equicorrelated Gaussian data with a sparse mean shift,
named test specs, and rejection-rate tables.

Named tests follow the labels used in the rejection-rate tables:
``T1`` and ``T<k>d`` are the sorted-selection (sign-constrained) sparse
statistics with a diagonal covariance, ``T<k>`` is the sign-symmetric sparse
statistic with the full sample covariance, ``PE`` is the power-enhancement
composite and ``Wald`` the Hotelling-style initial test (an alpha-coin when
p >= n). Arbitrary cone/estimator combinations can be given as dicts.
"""

from __future__ import annotations

import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cones import parse_cone
from .errors import DegenerateInputError, ExistenceError, GridLookupError
from .inference import hotelling_wald_test, power_enhancement_test, randomization_test
from .rng import child_rng

_B_GRID = {(30, 1): 0.75, (30, 20): 0.25, (250, 1): 0.25, (250, 20): 0.07}


@dataclass(frozen=True)
class TestSpec:
    name: str
    kind: str  # "conic" | "pe" | "wald"
    cone: str | None = None
    estimator: str = "full"

    def __post_init__(self):
        if self.kind not in ("conic", "pe", "wald"):
            raise ValueError(f"unknown test kind {self.kind!r}")
        if self.kind == "conic" and not self.cone:
            raise ValueError(f"test {self.name!r} needs a cone spec")


_NAME_RE = re.compile(r"^T(\d+)(d?)$")


def parse_test_spec(spec) -> TestSpec:
    """Resolve a table label or an explicit dict into a TestSpec."""
    if isinstance(spec, TestSpec):
        return spec
    if isinstance(spec, dict):
        cone = spec.get("cone")
        kind = spec.get("kind", "conic")
        return TestSpec(
            name=spec.get("name") or cone or kind,
            kind=kind,
            cone=cone,
            estimator=spec.get("estimator", "full"),
        )
    text = str(spec).strip()
    low = text.lower()
    if low == "pe":
        return TestSpec(name="PE", kind="pe")
    if low == "wald":
        return TestSpec(name="Wald", kind="wald")
    got = _NAME_RE.match(text)
    if got:
        k = int(got.group(1))
        if k < 1:
            raise ValueError(f"test {text!r}: sparsity must be positive")
        if got.group(2) or k == 1:
            # table convention: sorted selection over positive ratios
            return TestSpec(name=text, kind="conic", cone=f"ksparse+:{k}", estimator="diagonal")
        return TestSpec(name=text, kind="conic", cone=f"ksparse:{k}", estimator="full")
    raise ValueError(f"unrecognized test spec {text!r}")


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: int
    rho: float = 0.0
    s: int = 0
    b: float | None = None
    tests: tuple = ()
    alpha: float = 0.05
    repetitions: int = 1000
    resamples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho={self.rho} outside [0, 1)")
        if self.s > self.p or self.s < 0:
            raise ValueError(f"sparsity s={self.s} outside [0, p={self.p}]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        object.__setattr__(self, "tests", tuple(parse_test_spec(t) for t in self.tests))

    def resolved_b(self) -> float:
        if self.s == 0:
            return 0.0
        if self.b is not None:
            return float(self.b)
        return b_lookup(self.n, self.s)


@dataclass(frozen=True)
class TestResult:
    name: str
    rejections: int
    repetitions: int
    failures: int
    wall_seconds: float

    @property
    def reject_rate(self) -> float:
        return self.rejections / self.repetitions

    @property
    def mc_se(self) -> float:
        r = self.reject_rate
        return math.sqrt(r * (1.0 - r) / self.repetitions)


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    tests: tuple  # of TestResult
    wall_seconds: float


def b_lookup(n: int, s: int) -> float:
    """Signal magnitudes used by the reference experiment grid."""
    try:
        return _B_GRID[(n, s)]
    except KeyError:
        raise GridLookupError(
            f"(n={n}, s={s}) not in the built-in grid {sorted(_B_GRID)}; pass b explicitly"
        ) from None


def equicorr_factor(p: int, rho: float) -> np.ndarray:
    """Upper-triangular A with A'A equal to the unit-diagonal equicorrelation
    matrix with off-diagonal rho."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho={rho} outside [0, 1)")
    return _cached_factor(p, float(rho)).copy()


@lru_cache(maxsize=8)
def _cached_factor(p: int, rho: float) -> np.ndarray:
    if rho == 0.0:
        a = np.eye(p)
    else:
        sigma = np.full((p, p), rho)
        np.fill_diagonal(sigma, 1.0)
        a = np.linalg.cholesky(sigma).T
    a.flags.writeable = False
    return a


def mu_vector(p: int, s: int, b: float) -> np.ndarray:
    """First s coordinates at b, the rest zero."""
    if s > p or s < 0:
        raise ValueError(f"sparsity s={s} outside [0, p={p}]")
    mu = np.zeros(p)
    mu[:s] = b
    return mu


def generate_data(cfg: SimConfig, rep_index: int) -> np.ndarray:
    """iota mu' + E A with standard normal E from the repetition's child stream."""
    rng = child_rng(cfg.seed, rep_index)
    e = rng.standard_normal((cfg.n, cfg.p))
    mu = mu_vector(cfg.p, cfg.s, cfg.resolved_b())
    if cfg.rho == 0.0:
        return mu[None, :] + e
    return mu[None, :] + e @ _cached_factor(cfg.p, float(cfg.rho))


def _test_seed(seed: int, rep: int, test_index: int) -> int:
    state = np.random.SeedSequence((int(seed), int(rep), int(test_index))).generate_state(1, np.uint64)
    return int(state[0])


def _wald_or_coin(x, alpha, seed):
    n, p = x.shape
    if p < n:
        return hotelling_wald_test(x, alpha)
    return bool(child_rng(seed, 1).random() < alpha)


def _run_reps(cfg: SimConfig, reps) -> tuple:
    """Rejection/failure/time accumulators over a list of repetition indices."""
    t_count = len(cfg.tests)
    rejections = np.zeros(t_count, dtype=np.int64)
    failures = np.zeros(t_count, dtype=np.int64)
    seconds = np.zeros(t_count)
    for rep in reps:
        x = generate_data(cfg, rep)
        for ti, spec in enumerate(cfg.tests):
            seed_t = _test_seed(cfg.seed, rep, ti)
            start = time.perf_counter()
            try:
                if spec.kind == "conic":
                    cone = parse_cone(spec.cone, cfg.p)
                    out = randomization_test(
                        x, cone,
                        estimator=spec.estimator,
                        alpha=cfg.alpha,
                        resamples=cfg.resamples,
                        seed=seed_t,
                    )
                    rejected = out.reject
                    failures[ti] += out.failed_resamples
                elif spec.kind == "pe":
                    rejected = power_enhancement_test(x, cfg.alpha, seed=seed_t).combined_reject
                else:
                    rejected = _wald_or_coin(x, cfg.alpha, seed_t)
            except (ExistenceError, DegenerateInputError):
                rejected = False
                failures[ti] += 1
            seconds[ti] += time.perf_counter() - start
            rejections[ti] += bool(rejected)
    return rejections, failures, seconds


def run_experiment(cfg: SimConfig, workers: int = 1) -> SimResult:
    """Run every configured test on every repetition.

    Repetitions draw from per-repetition child streams, so the counts are
    bit-identical for any worker split; only the timing fields vary.
    """
    if not cfg.tests:
        raise ValueError("config has no tests")
    start = time.perf_counter()
    reps = list(range(cfg.repetitions))
    if workers <= 1 or cfg.repetitions == 1:
        rejections, failures, seconds = _run_reps(cfg, reps)
    else:
        workers = min(workers, cfg.repetitions)
        chunks = [reps[i::workers] for i in range(workers)]
        rejections = np.zeros(len(cfg.tests), dtype=np.int64)
        failures = np.zeros(len(cfg.tests), dtype=np.int64)
        seconds = np.zeros(len(cfg.tests))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rej, fail, secs in pool.map(_run_reps, [cfg] * workers, chunks):
                rejections += rej
                failures += fail
                seconds += secs
    results = tuple(
        TestResult(
            name=spec.name,
            rejections=int(rejections[ti]),
            repetitions=cfg.repetitions,
            failures=int(failures[ti]),
            wall_seconds=float(seconds[ti]),
        )
        for ti, spec in enumerate(cfg.tests)
    )
    return SimResult(config=cfg, tests=results, wall_seconds=time.perf_counter() - start)


def result_rows(result: SimResult) -> list:
    """Flatten a SimResult into CSV/JSON rows, one per test."""
    cfg = result.config
    rows = []
    for tr in result.tests:
        rows.append(
            {
                "n": cfg.n,
                "p": cfg.p,
                "rho": cfg.rho,
                "s": cfg.s,
                "b": cfg.resolved_b(),
                "test_name": tr.name,
                "alpha": cfg.alpha,
                "reps": tr.repetitions,
                "resamples": cfg.resamples,
                "seed": cfg.seed,
                "reject_rate": tr.reject_rate,
                "mc_se": tr.mc_se,
                "failures": tr.failures,
                "wall_seconds": round(tr.wall_seconds, 3),
            }
        )
    return rows


def grid_configs(grid: dict) -> list:
    """Expand a grid mapping into the cross product of SimConfigs.

    List-valued keys n, p, rho, s are crossed; tests, alpha, repetitions,
    resamples, seed apply to every cell. b, when given, overrides the
    built-in magnitude grid.
    """
    def as_list(key, default):
        v = grid.get(key, default)
        return v if isinstance(v, (list, tuple)) else [v]

    tests = grid.get("tests")
    if not tests:
        raise ValueError("grid config needs a nonempty 'tests' list")
    configs = []
    for n in as_list("n", [30]):
        for p in as_list("p", [100]):
            for rho in as_list("rho", [0.0]):
                for s in as_list("s", [0]):
                    configs.append(
                        SimConfig(
                            n=int(n),
                            p=int(p),
                            rho=float(rho),
                            s=int(s),
                            b=grid.get("b"),
                            tests=tuple(tests),
                            alpha=float(grid.get("alpha", 0.05)),
                            repetitions=int(grid.get("repetitions", 1000)),
                            resamples=int(grid.get("resamples", 1000)),
                            seed=int(grid.get("seed", 0)),
                        )
                    )
    return configs
