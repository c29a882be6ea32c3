"""Batch runs behind the power tables and distribution figures."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import stats

from . import dist
from .power import (
    PowerReport,
    TestKind,
    asymptotic_normal_law,
    critical_value,
    local_ncp,
    second_order_law,
    theoretical_power,
)
from .rng import derive_seed
from .sim import Scenario, empirical_distribution, empirical_powers, ks_to_cdf, ks_two_sample
from .tables import AlternativeSpec

TABLES = {
    "table1": (1, ("1/100", "1/80")),
    "table2": (2, ("1/20", "1/15")),
}
TABLE_NS = (100, 150, 200, 250)

FIGURE2_NS = {1: (2000, 3500, 5000), 2: (100, 150, 200)}
FIXED_EPS = {1: "1/40", 2: "1/10"}
FIXED_NS = (200, 1000, 5000)
FIGURE_STATISTIC = {"figure3": TestKind.PEARSON, "figure4": TestKind.DCOV_UNBIASED, "figure5": TestKind.DCOV_MLE}

FIGURE2_REPLICATIONS = 100_000
LAW_SAMPLES = 100_000


def parse_fraction(text) -> Fraction:
    return Fraction(str(text).strip())


def power_rows(
    setting: int | None,
    epsilons,
    ns,
    tests,
    alpha: float = 0.05,
    *,
    table=None,
    method: str = "cf",
    null_method: str = "asymptotic",
    empirical: bool = False,
    replications: int = 10_000,
    seed: int = 0,
    workers: int = 1,
) -> list[PowerReport]:
    """Theoretical (and optionally simulated) power, one report per (epsilon, n, test).

    Either ``setting`` with ``epsilons`` or a custom ``table`` must be given.
    Sub-seeds are derived from ``seed`` and the position in the grid, so a
    row's value does not depend on which other rows were requested.
    """
    tests = [TestKind.parse(t) for t in tests]
    scenarios = (
        [Scenario.custom(table)] if table is not None else [Scenario.setting(setting, float(e)) for e in epsilons]
    )
    reports = []
    for ei, sc in enumerate(scenarios):
        alt = AlternativeSpec.from_table(sc.table)
        for n in ns:
            key = (ei, int(n))
            s_theory = derive_seed(seed, 1, *key)
            crits = {
                t: critical_value(
                    t, sc.null_table, alpha, method, null_method=null_method, n=n,
                    seed=derive_seed(seed, 2, *key, list(TestKind).index(t)),
                    replications=replications if null_method == "mc" else dist.DEFAULT_MC, workers=workers,
                )
                for t in tests
            }
            # the null scenario has no fixed-alternative power; only its rejection rate is reported
            theo = {
                t: None if alt.is_null else theoretical_power(t, alt, n, alpha, method, seed=s_theory, crit=crits[t])
                for t in tests
            }
            if empirical:
                emp = empirical_powers(
                    tests, sc, n, alpha, replications, derive_seed(seed, 3, *key), workers=workers, crits=crits
                )
            else:
                emp = [PowerReport(t, alpha, n, crits[t], epsilon=sc.epsilon) for t in tests]
            for rep in emp:
                rep.theoretical_power = theo[rep.test]
                reports.append(rep)
    return reports


def pitman_panel(setting: int, n: int, replications: int, seed: int, workers: int = 1, bins: int = 60) -> dict:
    """Pearson ``n * Delta_n`` under ``epsilon = 1/sqrt(n)`` against the noncentral chi-square."""
    sc = Scenario.pitman(setting, n)
    I, J = sc.table.shape
    df = (I - 1) * (J - 1)
    ncp = local_ncp(AlternativeSpec.from_table(sc.table), n)
    ed = empirical_distribution(TestKind.PEARSON, sc, n, "n", replications, seed, workers)
    ref = stats.ncx2(df, ncp)
    hist = ed.histogram(bins)
    centres = 0.5 * (np.array(hist["edges"][1:]) + np.array(hist["edges"][:-1]))
    hist.update(
        setting=setting,
        epsilon=sc.epsilon,
        df=df,
        ncp=ncp,
        reference_pdf=ref.pdf(centres).tolist(),
        ks_noncentral=ks_to_cdf(ed.samples, ref.cdf),
        zero_marginal_replicates=ed.rejected,
    )
    return hist


def fixed_alternative_panel(
    test, setting: int, n: int, replications: int, seed: int, workers: int = 1, bins: int = 60,
    law_samples: int = LAW_SAMPLES,
) -> dict:
    """``sqrt(n) (T - theta)`` replicates with the normal and second-order laws."""
    test = TestKind.parse(test)
    eps = float(parse_fraction(FIXED_EPS[setting]))
    sc = Scenario.setting(setting, eps)
    alt = AlternativeSpec.from_table(sc.table)
    ed = empirical_distribution(test, sc, n, "sqrt_n_centered", replications, seed, workers)
    law2 = second_order_law(test, alt, n)
    law1 = asymptotic_normal_law(test, alt, n)
    law_draws = dist.sample(law2, law_samples, derive_seed(seed, 7))
    lo = min(ed.samples[0], np.quantile(law_draws, 0.0005))
    hi = max(ed.samples[-1], np.quantile(law_draws, 0.9995))
    hist = ed.histogram(bins, range_=(lo, hi))
    edges = np.array(hist["edges"])
    centres = 0.5 * (edges[1:] + edges[:-1])
    law_counts, _ = np.histogram(law_draws, bins=edges)
    hist.update(
        setting=setting,
        epsilon=eps,
        sigma=law1.sigma,
        normal_pdf=stats.norm(0.0, law1.sigma).pdf(centres).tolist(),
        second_order_density=(law_counts / (law_samples * np.diff(edges))).tolist(),
        second_order_law=law2.to_json(),
        ks_normal=ks_to_cdf(ed.samples, stats.norm(0.0, law1.sigma).cdf),
        ks_second_order=ks_two_sample(ed.samples, law_draws),
    )
    return hist


def figure_panels(target: str, replications: int | None, seed: int, workers: int = 1, ns=None) -> list[dict]:
    """All panels of one figure (both settings, each sample size)."""
    panels = []
    if target == "figure2":
        reps = replications or FIGURE2_REPLICATIONS
        for setting in (1, 2):
            for n in ns or FIGURE2_NS[setting]:
                panels.append(pitman_panel(setting, n, reps, derive_seed(seed, setting, n), workers))
        return panels
    if target not in FIGURE_STATISTIC:
        raise ValueError(f"unknown figure {target!r}")
    reps = replications or 10_000
    for setting in (1, 2):
        for n in ns or FIXED_NS:
            panels.append(
                fixed_alternative_panel(FIGURE_STATISTIC[target], setting, n, reps, derive_seed(seed, setting, n), workers)
            )
    return panels


def pitman_ks(setting: int, n: int, replications: int, seed: int, workers: int = 1) -> float:
    return pitman_panel(setting, n, replications, seed, workers)["ks_noncentral"]
