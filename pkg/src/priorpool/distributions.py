"""Distribution types used to represent elicited and pooled beliefs.

Four parametric families (normal, lognormal, beta, gamma), finite
mixtures of them, and a tabulated piecewise-linear density that carries
the output of log-linear pooling. All densities are vectorized over
numpy arrays; scalars in give scalars out.

Serialization is a plain dict of the form ``{"family": ..., "params":
{...}}`` (mixtures and tabulated densities have their own shapes, see
``to_dict``). ``distribution_from_dict`` accepts fields in any order.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize, stats

from priorpool.errors import DomainError, ValidationError
from priorpool.quadrature import integrate

_WEIGHT_SUM_TOL = 1e-12


def _unwrap(x, out):
    return float(out[0]) if np.ndim(x) == 0 else out


class Distribution(ABC):
    """A one-dimensional probability distribution."""

    family: str

    @property
    @abstractmethod
    def support(self) -> tuple[float, float]:
        """Closure of the set where the density can be positive."""

    @abstractmethod
    def _pdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _cdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _ppf(self, p: np.ndarray) -> np.ndarray: ...

    def pdf(self, x):
        """Density at ``x``; exactly 0 outside the support."""
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        return _unwrap(x, self._pdf(arr))

    def logpdf(self, x):
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return _unwrap(x, np.log(self._pdf(arr)))

    def cdf(self, x):
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        return _unwrap(x, self._cdf(arr))

    def quantile(self, p):
        """Inverse cdf at levels ``p``, which must lie strictly in (0, 1)."""
        arr = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise DomainError("quantile levels must lie strictly inside (0, 1)")
        return _unwrap(p, self._ppf(arr))

    def sample(self, n, rng):
        """Draw ``n`` values by inverse-cdf sampling from ``rng``."""
        return self._ppf(rng.random(int(n)))

    def quadrature_points(self):
        """Interior breakpoints that help quadrature find the mass."""
        return [float(v) for v in self._ppf(np.array([0.05, 0.5, 0.95]))]

    def mean(self):
        lo, hi = self.support
        return integrate(lambda x: x * self._pdf(np.asarray(x)), lo, hi,
                         points=self.quadrature_points())

    def variance(self):
        m = self.mean()
        lo, hi = self.support
        return integrate(lambda x: (x - m) ** 2 * self._pdf(np.asarray(x)),
                         lo, hi, points=self.quadrature_points())

    def sd(self):
        return float(np.sqrt(self.variance()))

    @abstractmethod
    def to_dict(self) -> dict: ...


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float
    sigma: float

    family = "normal"

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise DomainError("normal location must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError("normal scale must be strictly positive")

    @cached_property
    def _dist(self):
        return stats.norm(loc=self.mu, scale=self.sigma)

    @property
    def support(self):
        return (-np.inf, np.inf)

    def _pdf(self, x):
        return self._dist.pdf(x)

    def _cdf(self, x):
        return self._dist.cdf(x)

    def _ppf(self, p):
        return self._dist.ppf(p)

    def mean(self):
        return self.mu

    def variance(self):
        return self.sigma ** 2

    def to_dict(self):
        return {"family": "normal",
                "params": {"mu": float(self.mu), "sigma": float(self.sigma)}}


@dataclass(frozen=True)
class LogNormal(Distribution):
    """Lognormal parameterized by the mean and sd of the underlying normal."""

    mu: float
    sigma: float

    family = "lognormal"

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise DomainError("lognormal location must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError("lognormal scale must be strictly positive")

    @cached_property
    def _dist(self):
        return stats.lognorm(s=self.sigma, scale=np.exp(self.mu))

    @property
    def support(self):
        return (0.0, np.inf)

    def _pdf(self, x):
        return self._dist.pdf(x)

    def _cdf(self, x):
        return self._dist.cdf(x)

    def _ppf(self, p):
        return self._dist.ppf(p)

    def mean(self):
        return float(np.exp(self.mu + 0.5 * self.sigma ** 2))

    def variance(self):
        return float((np.exp(self.sigma ** 2) - 1.0)
                     * np.exp(2.0 * self.mu + self.sigma ** 2))

    def to_dict(self):
        return {"family": "lognormal",
                "params": {"mu": float(self.mu), "sigma": float(self.sigma)}}


@dataclass(frozen=True)
class Beta(Distribution):
    alpha: float
    beta: float

    family = "beta"

    def __post_init__(self):
        ok = (np.isfinite(self.alpha) and self.alpha > 0
              and np.isfinite(self.beta) and self.beta > 0)
        if not ok:
            raise DomainError("beta shape parameters must be strictly positive")

    @cached_property
    def _dist(self):
        return stats.beta(a=self.alpha, b=self.beta)

    @property
    def support(self):
        return (0.0, 1.0)

    def _pdf(self, x):
        return self._dist.pdf(x)

    def _cdf(self, x):
        return self._dist.cdf(x)

    def _ppf(self, p):
        return self._dist.ppf(p)

    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    def variance(self):
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))

    def to_dict(self):
        return {"family": "beta",
                "params": {"alpha": float(self.alpha), "beta": float(self.beta)}}


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    scale: float

    family = "gamma"

    def __post_init__(self):
        ok = (np.isfinite(self.shape) and self.shape > 0
              and np.isfinite(self.scale) and self.scale > 0)
        if not ok:
            raise DomainError("gamma shape and scale must be strictly positive")

    @cached_property
    def _dist(self):
        return stats.gamma(a=self.shape, scale=self.scale)

    @property
    def support(self):
        return (0.0, np.inf)

    def _pdf(self, x):
        return self._dist.pdf(x)

    def _cdf(self, x):
        return self._dist.cdf(x)

    def _ppf(self, p):
        return self._dist.ppf(p)

    def mean(self):
        return self.shape * self.scale

    def variance(self):
        return self.shape * self.scale ** 2

    def to_dict(self):
        return {"family": "gamma",
                "params": {"shape": float(self.shape), "scale": float(self.scale)}}


@dataclass(frozen=True)
class Mixture(Distribution):
    """Finite mixture; components are (weight, distribution) pairs.

    Weights must be nonnegative and sum to one within 1e-12. The linear
    opinion pool is represented directly by this type.
    """

    components: tuple[tuple[float, Distribution], ...]

    family = "mixture"

    def __post_init__(self):
        if len(self.components) == 0:
            raise DomainError("mixture needs at least one component")
        comps = tuple((float(w), d) for w, d in self.components)
        object.__setattr__(self, "components", comps)
        ws = np.array([w for w, _ in comps])
        if np.any(ws < 0) or np.any(~np.isfinite(ws)):
            raise DomainError("mixture weights must be finite and nonnegative")
        if abs(ws.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise DomainError(
                f"mixture weights sum to {ws.sum()!r}, expected 1 within 1e-12")

    @cached_property
    def _weights(self):
        return np.array([w for w, _ in self.components])

    @property
    def support(self):
        los, his = zip(*(d.support for _, d in self.components))
        return (min(los), max(his))

    def _pdf(self, x):
        out = np.zeros_like(x, dtype=float)
        for w, d in self.components:
            if w > 0:
                out += w * d._pdf(x)
        return out

    def _cdf(self, x):
        out = np.zeros_like(x, dtype=float)
        for w, d in self.components:
            if w > 0:
                out += w * d._cdf(x)
        return out

    def _ppf(self, p):
        # Bracketed root search: the mixture cdf at the smallest (largest)
        # component quantile is >= p (<= p) is not guaranteed pointwise,
        # but the min/max across active components always bracket.
        active = [d for w, d in self.components if w > 0]
        out = np.empty_like(p)
        for i, pi in enumerate(p.ravel()):
            qs = [d.quantile(pi) for d in active]
            lo, hi = min(qs), max(qs)
            if lo == hi:
                out.ravel()[i] = lo
                continue
            f = lambda x: self.cdf(x) - pi
            flo, fhi = f(lo), f(hi)
            if flo >= 0:
                out.ravel()[i] = lo
            elif fhi <= 0:
                out.ravel()[i] = hi
            else:
                out.ravel()[i] = optimize.brentq(f, lo, hi, xtol=1e-13,
                                                 rtol=8.9e-16, maxiter=200)
        return out

    def sample(self, n, rng):
        n = int(n)
        idx = rng.choice(len(self.components), size=n, p=self._weights)
        u = rng.random(n)
        out = np.empty(n)
        for i, (_, d) in enumerate(self.components):
            sel = idx == i
            if sel.any():
                out[sel] = d._ppf(u[sel])
        return out

    def quadrature_points(self):
        pts = []
        for w, d in self.components:
            if w > 0:
                pts.extend(d.quadrature_points())
        return sorted(pts)

    def mean(self):
        return float(sum(w * d.mean() for w, d in self.components if w > 0))

    def variance(self):
        m = self.mean()
        acc = 0.0
        for w, d in self.components:
            if w > 0:
                acc += w * (d.variance() + (d.mean() - m) ** 2)
        return float(acc)

    def to_dict(self):
        return {"family": "mixture",
                "components": [{"weight": float(w), "dist": d.to_dict()}
                               for w, d in self.components]}


@dataclass(frozen=True)
class Tabulated(Distribution):
    """Piecewise-linear density on a fixed grid.

    The stored ordinates are normalized so the interpolated density
    integrates exactly to one (trapezoid rule is exact for piecewise
    linear functions). The cdf is the exact integral of the interpolant
    and the quantile function inverts it in closed form per cell, so the
    quantile/cdf round trip is float-exact wherever the density is
    positive.
    """

    x: tuple[float, ...]
    pdf_values: tuple[float, ...]

    family = "tabulated"

    def __post_init__(self):
        xs = np.asarray(self.x, dtype=float)
        ps = np.asarray(self.pdf_values, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or ps.shape != xs.shape:
            raise DomainError("tabulated density needs matching grids of size >= 2")
        if np.any(~np.isfinite(xs)) or np.any(np.diff(xs) <= 0):
            raise DomainError("tabulated grid must be finite and strictly increasing")
        if np.any(~np.isfinite(ps)) or np.any(ps < 0):
            raise DomainError("tabulated density values must be finite and >= 0")
        mass = np.trapezoid(ps, xs)
        if not (np.isfinite(mass) and mass > 0):
            raise DomainError("tabulated density has no mass")
        # Skip renormalization at ulp level so parse/serialize round trips
        # are exact.
        if abs(mass - 1.0) > 1e-12:
            ps = ps / mass
        object.__setattr__(self, "x", tuple(float(v) for v in xs))
        object.__setattr__(self, "pdf_values", tuple(float(v) for v in ps))

    @cached_property
    def _xs(self):
        return np.asarray(self.x)

    @cached_property
    def _ps(self):
        return np.asarray(self.pdf_values)

    @cached_property
    def _cgrid(self):
        xs, ps = self._xs, self._ps
        c = np.concatenate([[0.0], np.cumsum(np.diff(xs) * (ps[:-1] + ps[1:]) / 2.0)])
        return c / c[-1]

    @property
    def support(self):
        return (self.x[0], self.x[-1])

    def _pdf(self, x):
        out = np.interp(x, self._xs, self._ps)
        return np.where((x < self.x[0]) | (x > self.x[-1]), 0.0, out)

    def _cdf(self, x):
        xs, ps, c = self._xs, self._ps, self._cgrid
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        w = x - xs[i]
        px = ps[i] + w * (ps[i + 1] - ps[i]) / (xs[i + 1] - xs[i])
        out = c[i] + w * (ps[i] + px) / 2.0
        out = np.where(x <= self.x[0], 0.0, out)
        out = np.where(x >= self.x[-1], 1.0, out)
        return np.clip(out, 0.0, 1.0)

    def _ppf(self, p):
        xs, ps, c = self._xs, self._ps, self._cgrid
        i = np.clip(np.searchsorted(c, p, side="right") - 1, 0, len(xs) - 2)
        h = xs[i + 1] - xs[i]
        s = (ps[i + 1] - ps[i]) / h
        rem = p - c[i]
        disc = np.maximum(ps[i] ** 2 + 2.0 * s * rem, 0.0)
        denom = ps[i] + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(denom > 0, 2.0 * rem / denom, 0.0)
        return xs[i] + np.minimum(w, h)

    def quadrature_points(self):
        return [float(v) for v in self._ppf(np.array([0.25, 0.5, 0.75]))]

    def mean(self):
        return float(np.trapezoid(self._xs * self._ps, self._xs))

    def variance(self):
        m = self.mean()
        return float(np.trapezoid((self._xs - m) ** 2 * self._ps, self._xs))

    def to_dict(self):
        return {"family": "tabulated",
                "x": [float(v) for v in self.x],
                "pdf": [float(v) for v in self.pdf_values]}


class LogDomain(Distribution):
    """View of ln(X) for a base distribution of X with support in [0, inf).

    Used when scoring log-scale questions; not serializable.
    """

    family = "logdomain"

    def __init__(self, base: Distribution):
        lo, hi = base.support
        if lo < 0:
            raise DomainError("log-domain view requires nonnegative support")
        self.base = base

    @property
    def support(self):
        lo, hi = self.base.support
        return (np.log(lo) if lo > 0 else -np.inf,
                np.log(hi) if np.isfinite(hi) else np.inf)

    def _pdf(self, y):
        y = np.asarray(y, dtype=float)
        # exp overflows for huge y; the density there is 0 regardless
        with np.errstate(over="ignore"):
            x = np.exp(y)
        out = np.zeros(y.shape, dtype=float)
        ok = np.isfinite(x)
        if np.any(ok):
            with np.errstate(over="ignore", invalid="ignore"):
                vals = self.base._pdf(x[ok]) * x[ok]
            out[ok] = np.where(np.isfinite(vals), vals, 0.0)
        return out

    def _cdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore"):
            x = np.exp(y)
        return self.base._cdf(np.where(np.isfinite(x), x, np.inf))

    def _ppf(self, p):
        return np.log(self.base._ppf(p))

    def quadrature_points(self):
        return [np.log(v) for v in self.base.quadrature_points() if v > 0]

    def to_dict(self):
        raise ValidationError("log-domain views are not serializable",
                              code="family")

    def __eq__(self, other):
        return isinstance(other, LogDomain) and self.base == other.base

    def __hash__(self):
        return hash(("logdomain", self.base))


_PARAM_FIELDS = {
    "normal": ("mu", "sigma"),
    "lognormal": ("mu", "sigma"),
    "beta": ("alpha", "beta"),
    "gamma": ("shape", "scale"),
}
_CONSTRUCTORS = {
    "normal": Normal,
    "lognormal": LogNormal,
    "beta": Beta,
    "gamma": Gamma,
}


def distribution_from_dict(doc) -> Distribution:
    """Parse a serialized distribution; fields may appear in any order."""
    if not isinstance(doc, dict):
        raise ValidationError("distribution document must be an object",
                              code="validation")
    family = doc.get("family")
    if family in _CONSTRUCTORS:
        params = doc.get("params")
        if not isinstance(params, dict):
            raise ValidationError(f"{family} document needs a params object",
                                  code="validation")
        fields = _PARAM_FIELDS[family]
        missing = [f for f in fields if f not in params]
        if missing:
            raise ValidationError(
                f"{family} params missing {missing}", code="validation")
        try:
            args = [float(params[f]) for f in fields]
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{family} params must be numeric",
                                  code="validation") from exc
        return _CONSTRUCTORS[family](*args)
    if family == "mixture":
        comps = doc.get("components")
        if not isinstance(comps, list) or not comps:
            raise ValidationError("mixture document needs a component list",
                                  code="validation")
        parsed = []
        for c in comps:
            if not isinstance(c, dict) or "weight" not in c or "dist" not in c:
                raise ValidationError(
                    "mixture components need weight and dist fields",
                    code="validation")
            parsed.append((float(c["weight"]), distribution_from_dict(c["dist"])))
        return Mixture(components=tuple(parsed))
    if family == "tabulated":
        if "x" not in doc or "pdf" not in doc:
            raise ValidationError("tabulated document needs x and pdf arrays",
                                  code="validation")
        return Tabulated(x=tuple(doc["x"]), pdf_values=tuple(doc["pdf"]))
    raise ValidationError(f"unknown distribution family {family!r}",
                          code="family")
