"""Critical values and power for the three independence tests.

Scale conventions: critical values live on the ``n * T`` scale; power is
integrated on the ``sqrt(n) * (T - theta)`` scale. The rejection region
``{n T > q}`` is the same event as
``{sqrt(n) (T - theta) > (q - n theta) / sqrt(n)}``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from . import dist
from .delta import (
    asymptotic_variance,
    grad_dcov,
    grad_pearson,
    null_weights_dcov,
    numeric_hessian,
    second_order_weights,
    sigma_star,
)
from .tables import (
    AlternativeSpec,
    DomainError,
    JointTable,
    dcov_functional,
    lemma1_constant,
    pearson_functional,
)

NULL_WEIGHT_FLOOR = 1e-9


class TestKind(str, enum.Enum):
    PEARSON = "pearson"
    DCOV_MLE = "dcov_mle"
    DCOV_UNBIASED = "dcov_unbiased"

    __test__ = False

    @classmethod
    def parse(cls, value) -> TestKind:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"chisq": "pearson", "dhat": "dcov_mle", "dtilde": "dcov_unbiased"}
        return cls(aliases.get(key, key))


@dataclass
class PowerReport:
    test: TestKind
    alpha: float
    n: int
    critical_value: float
    theoretical_power: float | None = None
    empirical_power: float | None = None
    mc_stderr: float | None = None
    replicates_rejected_for_zero_marginals: int = 0
    epsilon: float | None = None

    CSV_FIELDS = (
        "epsilon",
        "n",
        "test",
        "theoretical",
        "empirical",
        "stderr",
        "alpha",
        "critical_value",
        "zero_marginal_replicates",
    )

    def row(self) -> dict:
        def fmt(v, digits=6):
            return "" if v is None else f"{v:.{digits}f}"

        return {
            "epsilon": "" if self.epsilon is None else repr(float(self.epsilon)),
            "n": str(self.n),
            "test": self.test.value,
            "theoretical": fmt(self.theoretical_power),
            "empirical": fmt(self.empirical_power),
            "stderr": fmt(self.mc_stderr),
            "alpha": repr(float(self.alpha)),
            "critical_value": f"{self.critical_value:.10g}",
            "zero_marginal_replicates": str(self.replicates_rejected_for_zero_marginals),
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["test"] = self.test.value
        return d


def reports_to_csv(reports, header_lines=()) -> str:
    """CSV text in the power-table layout, with optional ``#`` comment lines first."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.DictWriter(buf, fieldnames=PowerReport.CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def reports_to_json(reports, config=None) -> str:
    body = {"reports": [r.to_dict() for r in reports]}
    if config is not None:
        body = {"config": config, **body}
    return json.dumps(body, indent=2, sort_keys=False)


# ---------------------------------------------------------------------------
# Laws
# ---------------------------------------------------------------------------


def _check_null(table: JointTable):
    if not table.is_independent():
        raise DomainError("critical values need an independence table")


def null_law(test, null_table: JointTable):
    """Asymptotic null law of ``n * T``."""
    test = TestKind.parse(test)
    _check_null(null_table)
    I, J = null_table.shape
    if test is TestKind.PEARSON:
        return dist.ChiSquareLaw((I - 1) * (J - 1))
    w = null_weights_dcov(null_table)[: (I - 1) * (J - 1)]
    shift = lemma1_constant(null_table) if test is TestKind.DCOV_MLE else 0.0
    return dist.WeightedCenteredLaw(tuple(w), shift)


def second_order_law(test, alt: AlternativeSpec, n: int) -> dist.SecondOrderLaw:
    """Finite-sample law of ``sqrt(n) * (T - theta)`` under a fixed alternative."""
    test = TestKind.parse(test)
    if alt.is_null:
        raise DomainError("c is identically zero: use the null laws, not the fixed-alternative expansion")
    table = alt.table
    S = sigma_star(table)
    if test is TestKind.PEARSON:
        g = grad_pearson(alt)
        H = numeric_hessian("pearson", table)
        shift = 0.0
    else:
        g = grad_dcov(alt)
        H = numeric_hessian("dcov", table)
        shift = -lemma1_constant(table) if test is TestKind.DCOV_UNBIASED else 0.0
    sigma = math.sqrt(asymptotic_variance(g, S))
    beta = second_order_weights(S, H)
    return dist.SecondOrderLaw(sigma, tuple(beta), shift, int(n))


def asymptotic_normal_law(test, alt: AlternativeSpec, n: int) -> dist.SecondOrderLaw:
    """First-order (normal) law of ``sqrt(n) * (T - theta)``."""
    full = second_order_law(test, alt, n)
    return dist.SecondOrderLaw(full.sigma, (), 0.0, int(n))


def functional_value(test, table: JointTable) -> float:
    test = TestKind.parse(test)
    return pearson_functional(table) if test is TestKind.PEARSON else dcov_functional(table)


# ---------------------------------------------------------------------------
# Critical values and power
# ---------------------------------------------------------------------------


def critical_value(
    test,
    null_table: JointTable,
    alpha: float = 0.05,
    method: str = "cf",
    *,
    null_method: str = "asymptotic",
    n: int | None = None,
    replications: int = dist.DEFAULT_MC,
    seed: int | None = None,
    workers: int = 1,
) -> float:
    """Upper-``alpha`` critical value on the ``n * T`` scale.

    ``null_method="asymptotic"`` uses the limiting null law (chi-square
    for Pearson, weighted centred chi-square for the dcov statistics);
    ``"mc"`` simulates the finite-``n`` null at ``null_table``.
    """
    test = TestKind.parse(test)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    _check_null(null_table)
    if null_method == "asymptotic":
        return dist.quantile(null_law(test, null_table), 1.0 - alpha, method=method, m=replications, seed=seed)
    if null_method != "mc":
        raise ValueError(f"unknown null method {null_method!r}")
    if n is None or seed is None:
        raise ValueError("a Monte Carlo null needs n and seed")
    from .sampling import simulate_statistics

    reps = simulate_statistics(null_table, n, replications, seed, workers=workers)
    values = {
        TestKind.PEARSON: reps.pearson[~reps.zero_marginal],
        TestKind.DCOV_MLE: reps.dhat,
        TestKind.DCOV_UNBIASED: reps.dtilde,
    }[test]
    return float(np.quantile(n * values, 1.0 - alpha))


def power_from_law(law: dist.SecondOrderLaw, crit: float, theta: float, method: str = "cf", m=dist.DEFAULT_MC, seed=None):
    n = law.n
    x = (crit - n * theta) / math.sqrt(n)
    return 1.0 - dist.cdf(law, x, method=method, m=m, seed=seed)


def theoretical_power(
    test,
    alt: AlternativeSpec,
    n: int,
    alpha: float = 0.05,
    method: str = "cf",
    *,
    null_method: str = "asymptotic",
    m: int = dist.DEFAULT_MC,
    seed: int | None = None,
    crit: float | None = None,
) -> float:
    """Power of the level-``alpha`` test at ``alt`` from the second-order law.

    ``crit`` may be supplied to reuse a critical value across sample sizes.
    """
    test = TestKind.parse(test)
    law = second_order_law(test, alt, n)
    if crit is None:
        crit = critical_value(
            test, alt.table.product_table(), alpha, method, null_method=null_method, n=n, replications=m, seed=seed
        )
    p = power_from_law(law, crit, functional_value(test, alt.table), method=method, m=m, seed=seed)
    return float(min(max(p, 0.0), 1.0))


def local_ncp(alt: AlternativeSpec, n: int) -> float:
    """Noncentrality ``sum c^2 / (r s)`` for ``pi = r s + c / sqrt(n)`` matching ``alt`` at ``n``."""
    r = alt.row_marginals
    s = alt.col_marginals
    if np.any(r <= 0) or np.any(s <= 0):
        raise DomainError("noncentrality needs strictly positive marginals")
    c_local = math.sqrt(n) * alt.c
    return float((c_local**2 / np.outer(r, s)).sum())


def pitman_power(alt: AlternativeSpec, n: int, alpha: float = 0.05) -> float:
    """Local-alternative power of Pearson's test from the noncentral chi-square limit."""
    I, J = alt.shape
    df = (I - 1) * (J - 1)
    q = float(stats.chi2.ppf(1.0 - alpha, df))
    return 1.0 - dist.noncentral_chisq_cdf(df, local_ncp(alt, n), q)
