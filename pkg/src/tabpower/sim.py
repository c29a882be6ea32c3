"""Simulation scenarios, empirical power and empirical distributions."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import dist
from .power import PowerReport, TestKind, critical_value, functional_value
from .sampling import ReplicateStats, simulate_statistics
from .tables import DomainError, JointTable

SCALES = ("n", "sqrt_n_centered")


def _setting1_table(eps):
    idx = np.arange(1, 7)
    sign = (-1.0) ** (idx[:, None] + idx[None, :])
    return np.full((6, 6), 1.0 / 36.0) + eps * sign


def _setting2_base():
    idx = np.arange(1, 5)
    return 2.0 ** -(idx[:, None] + idx[None, :]) / ((1.0 - 2.0**-4) ** 2)


def _setting2_table(eps):
    p = _setting2_base()
    p[0, 0] += eps
    p[1, 1] += eps
    p[0, 1] -= eps
    p[1, 0] -= eps
    return p


_BUILDERS = {"setting1": _setting1_table, "setting2": _setting2_table}


def scenario_table(kind: str, epsilon: float) -> JointTable:
    """Joint table of a simulation setting at perturbation ``epsilon``.

    Every cell must stay strictly inside (0, 1); the boundary is rejected
    because the delta-method quantities need strictly positive cells.
    """
    try:
        probs = _BUILDERS[kind](float(epsilon))
    except KeyError:
        raise ValueError(f"unknown setting {kind!r}") from None
    bad = np.argwhere((probs <= 0.0) | (probs >= 1.0))
    if bad.size:
        i, j = bad[0]
        raise DomainError(
            f"epsilon={epsilon!r} puts cell ({i + 1}, {j + 1}) of {kind} at {probs[i, j]:.6g}, outside (0, 1)"
        )
    return JointTable(probs)


@dataclass(frozen=True)
class Scenario:
    kind: str
    epsilon: float | None
    table: JointTable = field(compare=False)

    @classmethod
    def setting(cls, number: int, epsilon: float) -> Scenario:
        kind = f"setting{int(number)}"
        return cls(kind, float(epsilon), scenario_table(kind, epsilon))

    @classmethod
    def custom(cls, table: JointTable) -> Scenario:
        return cls("custom", None, table)

    @classmethod
    def pitman(cls, number: int, n: int) -> Scenario:
        """Local alternative with ``epsilon = 1/sqrt(n)``."""
        return cls.setting(number, 1.0 / math.sqrt(n))

    @property
    def null_table(self) -> JointTable:
        return self.table.product_table()


def _values(test: TestKind, reps: ReplicateStats) -> np.ndarray:
    if test is TestKind.PEARSON:
        return reps.pearson[~reps.zero_marginal]
    if test is TestKind.DCOV_MLE:
        return reps.dhat
    return reps.dtilde


def empirical_powers(
    tests,
    scenario: Scenario,
    n: int,
    alpha: float = 0.05,
    replications: int = 10_000,
    seed: int = 0,
    null_method: str = "asymptotic",
    workers: int = 1,
    crits: dict | None = None,
    null_replications: int = dist.DEFAULT_MC,
) -> list[PowerReport]:
    """Rejection rates of several tests on one shared set of replicates."""
    tests = [TestKind.parse(t) for t in tests]
    reps = simulate_statistics(scenario.table, n, replications, seed, workers=workers)
    out = []
    for test in tests:
        if crits is not None and test in crits:
            q = crits[test]
        else:
            q = critical_value(
                test,
                scenario.null_table,
                alpha,
                null_method=null_method,
                n=n,
                seed=seed + 1,
                replications=null_replications,
                workers=workers,
            )
        vals = n * _values(test, reps)
        rejected = int(reps.zero_marginal.sum()) if test is TestKind.PEARSON else 0
        p_hat = float(np.mean(vals > q)) if vals.size else float("nan")
        se = math.sqrt(p_hat * (1.0 - p_hat) / vals.size) if vals.size else float("nan")
        out.append(
            PowerReport(
                test=test,
                alpha=alpha,
                n=n,
                critical_value=q,
                empirical_power=p_hat,
                mc_stderr=se,
                replicates_rejected_for_zero_marginals=rejected,
                epsilon=scenario.epsilon,
            )
        )
    return out


def empirical_power(test, scenario: Scenario, n: int, alpha: float = 0.05, replications: int = 10_000,
                    seed: int = 0, null_method: str = "asymptotic", workers: int = 1) -> PowerReport:
    """Fraction of replicates with ``n * T`` above the critical value.

    Pearson replicates with a zero sample marginal are excluded from the
    denominator and counted in the report.
    """
    return empirical_powers([test], scenario, n, alpha, replications, seed, null_method, workers)[0]


@dataclass(frozen=True)
class EmpiricalDistribution:
    statistic: TestKind
    scale: str
    samples: np.ndarray
    n: int
    replications: int
    seed: int

    @property
    def rejected(self) -> int:
        return self.replications - self.samples.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        for v in self.samples:
            buf.write(f"{v:.17g}\n")
        return buf.getvalue()

    def histogram(self, bins: int = 60, range_=None) -> dict:
        counts, edges = np.histogram(self.samples, bins=bins, range=range_, density=False)
        width = np.diff(edges)
        density = counts / (self.samples.size * width)
        return {
            "statistic": self.statistic.value,
            "scale": self.scale,
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "edges": edges.tolist(),
            "counts": counts.tolist(),
            "density": density.tolist(),
        }

    def histogram_json(self, bins: int = 60) -> str:
        return json.dumps(self.histogram(bins))


def empirical_distribution(
    test, scenario: Scenario, n: int, scale: str = "n", replications: int = 10_000, seed: int = 0, workers: int = 1
) -> EmpiricalDistribution:
    """Replicate values of ``n * T`` or ``sqrt(n) * (T - theta)``, sorted."""
    test = TestKind.parse(test)
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}")
    reps = simulate_statistics(scenario.table, n, replications, seed, workers=workers)
    vals = _values(test, reps)
    if scale == "n":
        out = n * vals
    else:
        theta = functional_value(test, scenario.table)
        out = math.sqrt(n) * (vals - theta)
    return EmpiricalDistribution(test, scale, np.sort(out), n, replications, seed)


def ks_to_cdf(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a vectorized CDF."""
    return float(stats.kstest(np.asarray(samples), cdf).statistic)


def ks_two_sample(a, b) -> float:
    return float(stats.ks_2samp(np.asarray(a), np.asarray(b)).statistic)
