"""Second-order power analysis for independence tests on two-way tables.

The package covers Pearson's chi-square statistic and two distance
covariance statistics (the plug-in and the unbiased one): their
fixed-alternative laws, null laws, critical values, theoretical power and
a reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .dist import AccuracyError, ChiSquareLaw, SecondOrderLaw, WeightedCenteredLaw  # noqa: E402
from .power import PowerReport, TestKind, critical_value, second_order_law, theoretical_power  # noqa: E402
from .sim import Scenario, empirical_power  # noqa: E402
from .tables import AlternativeSpec, CountTable, DomainError, JointTable  # noqa: E402

__all__ = [
    "AccuracyError",
    "AlternativeSpec",
    "ChiSquareLaw",
    "CountTable",
    "DomainError",
    "JointTable",
    "PowerReport",
    "Scenario",
    "SecondOrderLaw",
    "TestKind",
    "WeightedCenteredLaw",
    "critical_value",
    "empirical_power",
    "second_order_law",
    "theoretical_power",
]
