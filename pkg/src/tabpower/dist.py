"""Laws used for critical values and power.

Every law here is a location-shifted combination

    X = mu + sigma * Z0 + sum_g w_g * Z_g**2,   Z i.i.d. N(0, 1),

which covers the second-order expansions under a fixed alternative, the
weighted centred chi-square null law of the dcov statistics and the
central chi-square law of Pearson's statistic.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from . import kernels
from .rng import std_normals, stream

CDF_TOL = 1e-6
DEFAULT_MC = 100_000
_CHUNK = 1 << 15
_LAW_TAG = 0x1A3


class AccuracyError(ArithmeticError):
    """Numerical inversion could not reach the requested accuracy."""


@dataclass(frozen=True)
class SecondOrderLaw:
    """``sigma*Z0 + (1/(2 sqrt n)) sum beta_g Z_g^2 + shift/sqrt(n)``.

    The scale is that of ``sqrt(n) * (T - theta)``.
    """

    sigma: float
    weights: tuple
    shift: float
    n: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def mean(self) -> float:
        return (sum(self.weights) / 2.0 + self.shift) / math.sqrt(self.n)

    def canonical(self):
        rn = math.sqrt(self.n)
        return self.shift / rn, float(self.sigma), np.asarray(self.weights) / (2.0 * rn)

    def to_json(self) -> str:
        return json.dumps({"sigma": self.sigma, "weights": list(self.weights), "shift": self.shift, "n": self.n})

    @classmethod
    def from_json(cls, text: str) -> SecondOrderLaw:
        d = json.loads(text)
        return cls(float(d["sigma"]), tuple(d["weights"]), float(d["shift"]), int(d["n"]))


@dataclass(frozen=True)
class ChiSquareLaw:
    df: int

    def __post_init__(self):
        if self.df < 1:
            raise ValueError("df must be at least 1")

    @property
    def mean(self) -> float:
        return float(self.df)

    def canonical(self):
        return 0.0, 0.0, np.ones(self.df)

    def to_json(self) -> str:
        return json.dumps({"kind": "chi_square", "df": self.df})


@dataclass(frozen=True)
class WeightedCenteredLaw:
    """``sum_k w_k (Z_k^2 - 1) + shift``."""

    weights: tuple
    shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def mean(self) -> float:
        return float(self.shift)

    def canonical(self):
        w = np.asarray(self.weights)
        return self.shift - float(w.sum()), 0.0, w

    def to_json(self) -> str:
        return json.dumps({"kind": "weighted_centered", "weights": list(self.weights), "shift": self.shift})


def law_std(law) -> float:
    _, sigma, w = law.canonical()
    return math.sqrt(sigma**2 + 2.0 * float(np.sum(w**2)))


# ---------------------------------------------------------------------------
# Characteristic-function inversion
# ---------------------------------------------------------------------------


def _integrand(t, y, w, sigma):
    if t == 0.0:
        return float(w.sum()) - y
    rho, theta = kernels.imhof_parts(t, w, sigma)
    return rho * math.sin(theta - t * y) / t


def _tail_sin_part(t, w, sigma):
    rho, theta = kernels.imhof_parts(t, w, sigma)
    return rho * math.sin(theta) / t


def _tail_cos_part(t, w, sigma):
    rho, theta = kernels.imhof_parts(t, w, sigma)
    return rho * math.cos(theta) / t


def _tail_bound(t, w, sigma) -> float:
    """Upper bound on ``int_t^inf rho(u)/u du``.

    Each factor ``(1 + a^2 u^2)^(-1/4)`` with ``a t >= 1`` decays at least
    like ``2^(1/4) (t/u)^(1/2)`` beyond ``t``; the Gaussian factor gives a
    second bound when ``sigma > 0``.
    """
    rho, _ = kernels.imhof_parts(t, w, sigma)
    k = int(np.sum(2.0 * np.abs(w) * t >= 1.0))
    bound = math.inf
    if k:
        bound = rho * 2.0 ** (k / 4.0) * 2.0 / k
    if sigma > 0.0:
        bound = min(bound, math.exp(-0.5 * (sigma * t) ** 2) / (sigma * t) ** 2)
    return bound


def _slow_tail(y, w, sigma, a, stop, eps):
    """Integrate ``[a, stop)`` on doubling segments; stops early once the rest is negligible."""
    total = err = 0.0
    while a < stop:
        if _tail_bound(a, w, sigma) < eps:
            return total, err + eps, True
        b = min(2.0 * a, stop)
        v, e = integrate.quad(_integrand, a, b, args=(y, w, sigma), epsabs=eps / 64.0, epsrel=0.0, limit=200)
        total += v
        err += e
        a = b
    return total, err, False


def imhof_cdf(y: float, sigma: float, w, tol: float = CDF_TOL) -> float:
    """``P(sigma*Z0 + sum w_g Z_g^2 <= y)`` by Gil-Pelaez / Imhof inversion.

    The integral is split at ``t0 = 1/sd``. The head ``[0, t0]`` is
    integrated directly. Up to one oscillation period ``2 pi/|y|`` the
    integrand varies slowly and is integrated on doubling segments, with
    early exit once a rigorous tail bound falls below the tolerance. The
    remaining oscillating tail is a Fourier integral handled by QUADPACK
    QAWF. (QAWF alone can be silently wrong when ``|y|`` is small, since
    its first cycle then dwarfs the decay scale of the integrand.)
    """
    w = np.asarray(w, dtype=np.float64)
    w = w[w != 0.0]
    sigma = float(sigma)
    if sigma == 0.0 and w.size == 0:
        return 1.0 if y >= 0 else 0.0
    sd = math.sqrt(sigma**2 + 2.0 * float(np.sum(w**2)))
    t0 = 1.0 / sd
    eps = tol * 1e-3
    ay = abs(y)
    t1 = math.inf if ay == 0.0 else max(t0, 2.0 * math.pi / ay)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            head, err_h = integrate.quad(_integrand, 0.0, t0, args=(y, w, sigma), epsabs=eps, epsrel=0.0, limit=200)
            slow, err_s, done = _slow_tail(y, w, sigma, t0, t1, eps)
            fast = err_f = 0.0
            if not done:
                # sin(theta - t y) = sin(theta) cos(t y) - cos(theta) sin(t y)
                sgn = 1.0 if y > 0 else -1.0
                c_part, err_c = integrate.quad(
                    _tail_sin_part, t1, np.inf, args=(w, sigma), weight="cos", wvar=ay, epsabs=eps, limlst=200
                )
                s_part, err_q = integrate.quad(
                    _tail_cos_part, t1, np.inf, args=(w, sigma), weight="sin", wvar=ay, epsabs=eps, limlst=200
                )
                fast = c_part - sgn * s_part
                err_f = err_c + err_q
        except integrate.IntegrationWarning as exc:
            raise AccuracyError(f"characteristic-function inversion did not converge at y={y!r}: {exc}") from None
    total = head + slow + fast
    err = (err_h + err_s + err_f) / math.pi
    if not math.isfinite(total) or err > tol:
        raise AccuracyError(f"inversion error estimate {err:.2e} exceeds tolerance {tol:.1e} at y={y!r}")
    return min(max(0.5 - total / math.pi, 0.0), 1.0)


def _cf_cdf_scalar(law, x):
    if isinstance(law, ChiSquareLaw):
        return float(stats.chi2.cdf(x, law.df))
    mu, sigma, w = law.canonical()
    return imhof_cdf(x - mu, sigma, w)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample(law, m: int, seed: int, stream_id: int = 0) -> np.ndarray:
    """``m`` draws, reproducible from ``(seed, stream_id)``.

    Draws are generated in fixed chunks, each on its own Philox stream.
    """
    if m < 1:
        raise ValueError("need at least one draw")
    mu, sigma, w = law.canonical()
    k = w.size
    out = np.empty(m)
    for c, start in enumerate(range(0, m, _CHUNK)):
        size = min(_CHUNK, m - start)
        gen = stream(seed, _LAW_TAG, stream_id, c)
        z = std_normals(gen, (size, k + 1))
        vals = mu + sigma * z[:, 0]
        if k:
            vals = vals + (z[:, 1:] ** 2) @ w
        out[start : start + size] = vals
    return out


# ---------------------------------------------------------------------------
# Public CDF / quantile
# ---------------------------------------------------------------------------


def cdf(law, x, method: str = "cf", m: int = DEFAULT_MC, seed: int | None = None):
    """Distribution function of ``law`` at ``x`` (scalar or array).

    ``method="cf"`` inverts the characteristic function (absolute error
    target 1e-6); ``method="mc"`` uses the empirical CDF of ``m`` draws.
    """
    xs = np.asarray(x, dtype=np.float64)
    if method == "cf":
        vals = np.array([_cf_cdf_scalar(law, float(v)) for v in xs.ravel()])
    elif method == "mc":
        if m < 1:
            raise ValueError("monte carlo CDF needs m >= 1")
        if seed is None:
            raise ValueError("monte carlo CDF needs an explicit seed")
        draws = np.sort(sample(law, m, seed))
        vals = np.searchsorted(draws, xs.ravel(), side="right") / m
    else:
        raise ValueError(f"unknown method {method!r}")
    vals = vals.reshape(xs.shape)
    return float(vals) if vals.ndim == 0 else vals


def quantile(law, p: float, method: str = "cf", m: int = DEFAULT_MC, seed: int | None = None) -> float:
    """Inverse CDF by bracketing root-finding (``cf``) or the sample quantile (``mc``)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if method == "mc":
        if seed is None:
            raise ValueError("monte carlo quantile needs an explicit seed")
        return float(np.quantile(sample(law, m, seed), p))
    if method != "cf":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(law, ChiSquareLaw):
        return float(stats.chi2.ppf(p, law.df))
    mu, sigma, w = law.canonical()
    w = w[w != 0.0]
    if sigma == 0.0 and w.size == 0:
        return mu
    sd = math.sqrt(sigma**2 + 2.0 * float(np.sum(w**2)))
    centre = float(w.sum())

    def f(y):
        return imhof_cdf(y, sigma, w) - p

    lo, hi = centre - sd, centre + sd
    while f(lo) > 0:
        lo -= 2.0 * (hi - lo)
    while f(hi) < 0:
        hi += 2.0 * (hi - lo)
    # Solve in centred coordinates so shifted laws give exactly shifted quantiles.
    y = optimize.brentq(f, lo, hi, xtol=1e-12 * (1.0 + sd), rtol=1e-13)
    return mu + y


# ---------------------------------------------------------------------------
# Noncentral chi-square
# ---------------------------------------------------------------------------


def noncentral_chisq_cdf(df: int, ncp: float, x: float, tol: float = 1e-12) -> float:
    """CDF of the noncentral chi-square as a Poisson mixture of central ones.

    Terms are summed from ``k = 0`` up to the point where the remaining
    Poisson mass falls below ``tol``; each omitted term is at most its
    Poisson weight, so the truncation error is at most ``tol``.
    """
    if df < 1:
        raise ValueError("df must be at least 1")
    if ncp < 0:
        raise ValueError("ncp must be nonnegative")
    if x <= 0:
        return 0.0
    lam = ncp / 2.0
    if lam == 0.0:
        return float(special.gammainc(df / 2.0, x / 2.0))
    K = int(lam + 10.0 * math.sqrt(lam) + 30)
    while stats.poisson.sf(K, lam) > tol:
        K *= 2
    k = np.arange(K + 1)
    log_w = -lam + k * math.log(lam) - special.gammaln(k + 1.0)
    terms = np.exp(log_w) * special.gammainc(df / 2.0 + k, x / 2.0)
    return float(min(math.fsum(terms), 1.0))
