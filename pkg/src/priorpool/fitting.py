"""Least-squares fitting of parametric families to five-point judgments.

A judgment is (minimum, lower quartile, median, upper quartile, maximum).
The minimum and maximum are treated as the ``eps_bound`` and ``1 -
eps_bound`` quantiles (default 0.01), the inner three as the quartiles,
and the family parameters are chosen to minimize the sum of squared
differences between the family cdf at the five values and the five
target probabilities. Optimization is derivative-free simplex search
with three deterministic restarts from moment-based starting points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from priorpool.distributions import (
    Beta,
    Distribution,
    Gamma,
    LogNormal,
    Normal,
    distribution_from_dict,
)
from priorpool.errors import ConfigurationError, FittingError, ValidationError

FAMILY_ORDER = ("normal", "lognormal", "beta", "gamma")

_RESTART_SPREAD_FACTORS = (1.0, 2.5, 0.4)
_IQR_TO_SD = 1.349


def _support_to_json(support):
    return [None if math.isinf(v) else float(v) for v in support]


def _support_from_json(pair):
    lo = -math.inf if pair[0] is None else float(pair[0])
    hi = math.inf if pair[1] is None else float(pair[1])
    return (lo, hi)


@dataclass(frozen=True)
class ElicitedJudgment:
    """One expert's five-point quantile judgment for one quantity."""

    quantity_id: str
    expert_id: str
    minimum: float
    q25: float
    median: float
    q75: float
    maximum: float
    support: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        values = (self.minimum, self.q25, self.median, self.q75, self.maximum)
        if any(not math.isfinite(v) for v in values):
            raise ValidationError("judgment values must be finite",
                                  code="quantile_order")
        if not (self.minimum < self.q25 < self.median < self.q75 < self.maximum):
            raise ValidationError(
                "judgment values must be strictly increasing "
                "(minimum < q25 < median < q75 < maximum)",
                code="quantile_order")
        lo, hi = self.support
        if not lo < hi:
            raise ValidationError("declared support must be a nonempty interval",
                                  code="support")
        if self.minimum < lo or self.maximum > hi:
            raise ValidationError(
                f"judgment values fall outside declared support [{lo}, {hi}]",
                code="support")

    @property
    def values(self):
        return np.array([self.minimum, self.q25, self.median,
                         self.q75, self.maximum])

    def to_dict(self):
        return {"quantity_id": self.quantity_id,
                "expert_id": self.expert_id,
                "minimum": self.minimum, "q25": self.q25,
                "median": self.median, "q75": self.q75,
                "maximum": self.maximum,
                "support": _support_to_json(self.support)}

    @classmethod
    def from_dict(cls, doc):
        return cls(quantity_id=doc["quantity_id"], expert_id=doc["expert_id"],
                   minimum=float(doc["minimum"]), q25=float(doc["q25"]),
                   median=float(doc["median"]), q75=float(doc["q75"]),
                   maximum=float(doc["maximum"]),
                   support=_support_from_json(doc.get("support", [None, None])))


@dataclass(frozen=True)
class FitResult:
    """Outcome of a least-squares fit.

    ``family_candidates`` lists (family, sse) for every family that
    converged; the chosen distribution always has the smallest sse.
    """

    distribution: Distribution
    sse: float
    family_candidates: tuple[tuple[str, float], ...]

    def to_dict(self):
        return {"distribution": self.distribution.to_dict(),
                "sse": float(self.sse),
                "family_candidates": [[name, float(s)]
                                      for name, s in self.family_candidates]}

    @classmethod
    def from_dict(cls, doc):
        return cls(distribution=distribution_from_dict(doc["distribution"]),
                   sse=float(doc["sse"]),
                   family_candidates=tuple((str(n), float(s))
                                           for n, s in doc["family_candidates"]))


def _moment_guesses(judgment):
    m = judgment.median
    s = (judgment.q75 - judgment.q25) / _IQR_TO_SD
    return m, s


def _normal_starts(j):
    m, s = _moment_guesses(j)
    return [np.array([m, np.log(s * f)]) for f in _RESTART_SPREAD_FACTORS]


def _lognormal_starts(j):
    lm = np.log(j.median)
    ls = (np.log(j.q75) - np.log(j.q25)) / _IQR_TO_SD
    return [np.array([lm, np.log(ls * f)]) for f in _RESTART_SPREAD_FACTORS]


def _beta_starts(j):
    m, s = _moment_guesses(j)
    m = min(max(m, 1e-3), 1.0 - 1e-3)
    out = []
    for f in _RESTART_SPREAD_FACTORS:
        v = min((s * f) ** 2, m * (1.0 - m) * 0.98)
        t = m * (1.0 - m) / v - 1.0
        a = min(max(m * t, 1e-2), 1e4)
        b = min(max((1.0 - m) * t, 1e-2), 1e4)
        out.append(np.array([np.log(a), np.log(b)]))
    return out


def _gamma_starts(j):
    m, s = _moment_guesses(j)
    out = []
    for f in _RESTART_SPREAD_FACTORS:
        sf = s * f
        k = min(max((m / sf) ** 2, 1e-2), 1e6)
        theta = min(max(sf * sf / m, 1e-8), 1e6)
        out.append(np.array([np.log(k), np.log(theta)]))
    return out


def _in_unit_interval(support):
    return support[0] >= 0.0 and support[1] <= 1.0


_FAMILIES = {
    "normal": dict(
        admissible=lambda j: True,
        starts=_normal_starts,
        cdf=lambda t, xs: stats.norm.cdf(xs, loc=t[0], scale=np.exp(t[1])),
        build=lambda t: Normal(mu=float(t[0]), sigma=float(np.exp(t[1])))),
    "lognormal": dict(
        admissible=lambda j: j.minimum > 0.0,
        starts=_lognormal_starts,
        cdf=lambda t, xs: stats.norm.cdf((np.log(xs) - t[0]) / np.exp(t[1])),
        build=lambda t: LogNormal(mu=float(t[0]), sigma=float(np.exp(t[1])))),
    "beta": dict(
        admissible=lambda j: _in_unit_interval(j.support),
        starts=_beta_starts,
        cdf=lambda t, xs: stats.beta.cdf(xs, a=np.exp(t[0]), b=np.exp(t[1])),
        build=lambda t: Beta(alpha=float(np.exp(t[0])),
                             beta=float(np.exp(t[1])))),
    "gamma": dict(
        admissible=lambda j: j.minimum > 0.0,
        starts=_gamma_starts,
        cdf=lambda t, xs: stats.gamma.cdf(xs, a=np.exp(t[0]),
                                          scale=np.exp(t[1])),
        build=lambda t: Gamma(shape=float(np.exp(t[0])),
                              scale=float(np.exp(t[1])))),
}


def admissible_families(judgment):
    """Families whose support can carry the judgment's values."""
    return [name for name in FAMILY_ORDER
            if _FAMILIES[name]["admissible"](judgment)]


def _fit_single(judgment, family, probs, max_evals):
    spec = _FAMILIES[family]
    xs = judgment.values
    cdf = spec["cdf"]

    def objective(t):
        r = cdf(t, xs) - probs
        return float(r @ r)

    best = None
    best_converged = None
    for start in spec["starts"](judgment):
        res = optimize.minimize(
            objective, start, method="Nelder-Mead",
            options={"maxfev": max_evals, "maxiter": max_evals,
                     "xatol": 1e-6, "fatol": 1e-14})
        if best is None or res.fun < best.fun:
            best = res
        if res.success and (best_converged is None or res.fun < best_converged.fun):
            best_converged = res
    if best_converged is None:
        raise FittingError(
            f"{family} fit did not converge within {max_evals} evaluations",
            family=family, best_params=tuple(float(v) for v in best.x),
            best_sse=float(best.fun))
    return spec["build"](best_converged.x), float(best_converged.fun)


def fit_least_squares(judgment, families=None, *, eps_bound=0.01,
                      max_evals=2000) -> FitResult:
    """Fit the best family to a judgment by cdf least squares.

    Parameters
    ----------
    judgment : ElicitedJudgment
    families : sequence of str, optional
        Explicit family names; defaults to every family admissible for
        the judgment's support and values. Requesting an inadmissible
        family raises ConfigurationError.
    eps_bound : float
        Probability level assigned to the elicited minimum (the maximum
        gets ``1 - eps_bound``). Must be in (0, 0.25).
    max_evals : int
        Simplex evaluation budget per restart.

    Returns
    -------
    FitResult
    """
    if not 0.0 < eps_bound < 0.25:
        raise ConfigurationError(f"eps_bound must be in (0, 0.25), got {eps_bound}")
    auto = admissible_families(judgment)
    if families is None or families == "auto":
        selected = auto
    else:
        selected = list(families)
        unknown = [f for f in selected if f not in _FAMILIES]
        if unknown:
            raise ConfigurationError(f"unknown families {unknown}")
        bad = [f for f in selected if f not in auto]
        if bad:
            raise ConfigurationError(
                f"families {bad} are not admissible for support "
                f"{judgment.support} and values >= {judgment.minimum}")
    if not selected:
        raise ConfigurationError("no admissible family for this judgment")

    probs = np.array([eps_bound, 0.25, 0.5, 0.75, 1.0 - eps_bound])
    candidates = []
    fits = {}
    failure = None
    for family in selected:
        try:
            dist, sse = _fit_single(judgment, family, probs, max_evals)
        except FittingError as exc:
            if failure is None or exc.best_sse < failure.best_sse:
                failure = exc
            continue
        fits[family] = dist
        candidates.append((family, sse))
    if not candidates:
        raise failure
    chosen, chosen_sse = min(candidates, key=lambda c: c[1])
    return FitResult(distribution=fits[chosen], sse=chosen_sse,
                     family_candidates=tuple(candidates))
