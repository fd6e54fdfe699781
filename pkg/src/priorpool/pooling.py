"""Opinion pooling: linear (mixture) and log-linear (geometric) pools.

The linear pool is represented exactly as a Mixture. The log-linear
pool has no closed form for mixed families, so it is tabulated on an
adaptive grid over the region where every positively-weighted expert
has mass, then renormalized. Grid knots combine a uniform backbone with
per-expert quantiles so narrow experts stay resolved.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from priorpool.distributions import Distribution, Mixture, Tabulated
from priorpool.errors import CoverageError, DomainError, EmptyPoolError

_SUM_TOL = 1e-12
_MIN_LOG_MASS = math.log(1e-12)

PROVENANCES = ("equal", "classical_method", "custom")


@dataclass(frozen=True)
class WeightVector:
    """Normalized expert weights with provenance.

    ``weights`` is an ordered tuple of (expert_id, weight). ``metadata``
    optionally carries per-expert diagnostics (the classical method
    stores calibration, information, and whether the cutoff passed).
    """

    weights: tuple[tuple[str, float], ...]
    provenance: str = "custom"
    metadata: dict | None = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise DomainError(
                f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")
        if len(self.weights) == 0:
            raise DomainError("weight vector must not be empty")
        pairs = tuple((str(e), float(w)) for e, w in self.weights)
        object.__setattr__(self, "weights", pairs)
        ids = [e for e, _ in pairs]
        if len(set(ids)) != len(ids):
            raise DomainError("expert ids in a weight vector must be unique")
        ws = np.array([w for _, w in pairs])
        if np.any(ws < 0) or np.any(~np.isfinite(ws)):
            raise DomainError("weights must be finite and nonnegative")
        if abs(ws.sum() - 1.0) > _SUM_TOL:
            raise DomainError(
                f"weights sum to {ws.sum()!r}, expected 1 within {_SUM_TOL}")
        if self.provenance == "equal":
            share = 1.0 / len(pairs)
            if any(w != share for _, w in pairs):
                raise DomainError("equal-provenance weights must each be 1/n")

    @property
    def expert_ids(self):
        return tuple(e for e, _ in self.weights)

    def to_dict(self):
        doc = {"provenance": self.provenance,
               "weights": [{"expert_id": e, "weight": w}
                           for e, w in self.weights]}
        if self.metadata is not None:
            doc["metadata"] = self.metadata
        return doc

    @classmethod
    def from_dict(cls, doc):
        return cls(weights=tuple((d["expert_id"], float(d["weight"]))
                                 for d in doc["weights"]),
                   provenance=doc.get("provenance", "custom"),
                   metadata=doc.get("metadata"))


def equal_weights(expert_ids) -> WeightVector:
    """Uniform weights, each exactly 1/n."""
    ids = list(expert_ids)
    if not ids:
        raise DomainError("need at least one expert")
    share = 1.0 / len(ids)
    return WeightVector(weights=tuple((e, share) for e in ids),
                        provenance="equal")


def _aligned(distributions, weights: WeightVector):
    """Pair each weight entry with its distribution."""
    if isinstance(distributions, Mapping):
        missing = [e for e in weights.expert_ids if e not in distributions]
        if missing:
            raise CoverageError(f"no distribution for experts {missing}")
        return [(e, w, distributions[e]) for e, w in weights.weights]
    if isinstance(distributions, Sequence):
        if len(distributions) != len(weights.weights):
            raise CoverageError(
                f"{len(distributions)} distributions for "
                f"{len(weights.weights)} weights")
        return [(e, w, d) for (e, w), d in zip(weights.weights, distributions)]
    raise CoverageError("distributions must be a mapping or a sequence")


def linear_pool(distributions, weights: WeightVector) -> Distribution:
    """Weighted mixture of the experts' densities."""
    triples = _aligned(distributions, weights)
    positive = [(w, d) for _, w, d in triples if w > 0]
    if len(positive) == 1 and positive[0][0] == 1.0:
        return positive[0][1]
    return Mixture(components=tuple((w, d) for _, w, d in triples))


# Window edges stop growing once the pooled log density has dropped this
# far below its maximum; the mass beyond is negligible next to the 1e-6
# normalization tolerance.
_EDGE_LOG_DROP = math.log(1e-13)


def _pooled_logpdf(active, xs):
    logg = np.zeros_like(xs)
    for _, w, d in active:
        logg = logg + w * d.logpdf(xs)
    return logg


def _pool_window(active, tail_mass):
    """Finite interval carrying essentially all of the pooled mass."""
    tau = tail_mass / 2.0
    slo, shi = -math.inf, math.inf
    los, his = [], []
    for _, _, d in active:
        dlo, dhi = d.support
        slo = max(slo, dlo)
        shi = min(shi, dhi)
        los.append(dlo if math.isfinite(dlo) else d.quantile(tau))
        his.append(dhi if math.isfinite(dhi) else d.quantile(1.0 - tau))
    if not slo < shi:
        raise EmptyPoolError(
            "expert supports do not overlap; log-linear pool is empty")
    lo = max(slo, min(los))
    hi = min(shi, max(his))
    if not lo < hi:
        raise EmptyPoolError("pooled support window is degenerate")

    # Grow each side until the pooled density is negligible relative to
    # its peak (or the exact support edge is reached), then trim dead
    # space so the grid spends its points where the mass is.
    for _ in range(40):
        probes = np.linspace(lo, hi, 513)
        logg = _pooled_logpdf(active, probes)
        top = logg.max()
        if not np.isfinite(top):
            raise EmptyPoolError("pooled density vanishes on the whole grid")
        span = hi - lo
        grew = False
        if logg[0] > top + _EDGE_LOG_DROP and lo > slo:
            lo = max(slo, lo - span) if math.isfinite(slo) else lo - span
            grew = True
        if logg[-1] > top + _EDGE_LOG_DROP and hi < shi:
            hi = min(shi, hi + span) if math.isfinite(shi) else hi + span
            grew = True
        if not grew:
            alive = np.nonzero(logg >= top + _EDGE_LOG_DROP)[0]
            lo = probes[max(alive[0] - 1, 0)]
            hi = probes[min(alive[-1] + 1, len(probes) - 1)]
            return lo, hi
    return lo, hi


def log_linear_pool(distributions, weights: WeightVector, *,
                    grid_size=2048, tail_mass=1e-6) -> Distribution:
    """Renormalized weighted geometric mean of the experts' densities.

    Returns a Tabulated distribution supported inside the intersection
    of the positively-weighted experts' supports (the pooled density is
    identically zero wherever any such expert has none). Raises
    EmptyPoolError when the intersection is empty or the unnormalized
    pool carries total mass below 1e-12, which happens for effectively
    disjoint experts.
    """
    triples = _aligned(distributions, weights)
    active = [(e, w, d) for e, w, d in triples if w > 0]
    if len(active) == 1:
        # Geometric mean with a single unit weight is that expert.
        return active[0][2]

    lo, hi = _pool_window(active, tail_mass)

    backbone = np.linspace(lo, hi, grid_size // 2)
    per_expert = max((grid_size - grid_size // 2) // len(active), 8)
    tau = tail_mass / 2.0
    levels = np.linspace(tau, 1.0 - tau, per_expert)
    knot_sets = [backbone]
    for _, _, d in active:
        qs = np.asarray(d.quantile(levels))
        inside = qs[(qs > lo) & (qs < hi)]
        knot_sets.append(inside)
    xs = np.unique(np.concatenate(knot_sets))

    logg = _pooled_logpdf(active, xs)
    finite = np.isfinite(logg)
    if not finite.any():
        raise EmptyPoolError("pooled density vanishes on the whole grid")
    shift = logg[finite].max()
    g = np.exp(logg - shift)
    # +inf can appear at an integrable edge singularity; truncate it.
    g = np.where(np.isfinite(g), g, 0.0)
    raw_mass = np.trapezoid(g, xs)
    if raw_mass <= 0 or shift + math.log(raw_mass) < _MIN_LOG_MASS:
        raise EmptyPoolError(
            "log-linear pool mass below 1e-12; experts are effectively disjoint")
    return Tabulated(x=tuple(xs), pdf_values=tuple(g / raw_mass))
