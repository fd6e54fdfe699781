"""Probability model for the two-test diagnostic trial.

Patients split into three groups: reference-test positive at the start
(mass eta), positive by the six-month retest (mass (1-eta)*psi), and
never positive. Each group has its own probability of a positive early
test (theta1, theta2, theta3). Parameters may be point values or
distributions on [0, 1]; the coherence checks below back the
facilitation UI during elicitation sessions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from priorpool.distributions import Distribution, distribution_from_dict
from priorpool.errors import (
    ConfigurationError,
    UndefinedSensitivityError,
    ValidationError,
)

PARAMETER_NAMES = ("eta", "psi", "theta1", "theta2", "theta3")

GROUP_ORDER = ("rt_pos_start", "rt_pos_6mo", "rt_never")
CELL_ORDER = (
    "rt_pos_start_et_pos",
    "rt_pos_start_et_neg",
    "rt_pos_6mo_et_pos",
    "rt_pos_6mo_et_neg",
    "rt_never_et_pos",
    "rt_never_et_neg",
)


def _check_unit_value(name, value):
    if isinstance(value, Distribution):
        lo, hi = value.support
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(
                f"{name} distribution must be supported within [0, 1]")
        return value
    value = float(value)
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1]")
    return value


@dataclass(frozen=True)
class TrialParameters:
    """The five model parameters, as point values or distributions."""

    eta: float | Distribution
    psi: float | Distribution
    theta1: float | Distribution
    theta2: float | Distribution
    theta3: float | Distribution

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name,
                               _check_unit_value(f.name, getattr(self, f.name)))

    @property
    def is_point(self) -> bool:
        return not any(isinstance(getattr(self, n), Distribution)
                       for n in PARAMETER_NAMES)

    def medians(self) -> "TrialParameters":
        """Collapse distribution-valued parameters to their medians."""
        values = {}
        for name in PARAMETER_NAMES:
            v = getattr(self, name)
            values[name] = float(v.quantile(0.5)) if isinstance(v, Distribution) else v
        return TrialParameters(**values)

    def to_dict(self) -> dict:
        out = {}
        for name in PARAMETER_NAMES:
            v = getattr(self, name)
            out[name] = v.to_dict() if isinstance(v, Distribution) else v
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "TrialParameters":
        values = {}
        for name in PARAMETER_NAMES:
            v = doc[name]
            values[name] = distribution_from_dict(v) if isinstance(v, dict) else float(v)
        return cls(**values)


@dataclass(frozen=True)
class CellProbabilities:
    """Three group masses and their early-test splits."""

    group_masses: tuple[float, float, float]
    et_positive: tuple[float, float, float]
    et_negative: tuple[float, float, float]

    def six_cells(self) -> list[tuple[str, float]]:
        """(cell id, mass) pairs in canonical rendering order."""
        out = []
        for group, ep, en in zip(GROUP_ORDER, self.et_positive,
                                 self.et_negative):
            out.append((f"{group}_et_pos", ep))
            out.append((f"{group}_et_neg", en))
        return out

    def to_dict(self) -> dict:
        return {
            "groups": dict(zip(GROUP_ORDER, self.group_masses)),
            "cells": dict(self.six_cells()),
        }


def cell_probabilities(params: TrialParameters) -> CellProbabilities:
    """Joint table of group membership and early-test outcome.

    The third group mass is computed as the complement of the first
    two, so the three masses sum to exactly 1 in floating point.
    """
    if not params.is_point:
        raise ValidationError(
            "cell probabilities need point-valued parameters; "
            "collapse distributions with medians() first")
    eta, psi = params.eta, params.psi
    g1 = eta
    g2 = (1.0 - eta) * psi
    g3 = 1.0 - (g1 + g2)
    groups = (g1, g2, g3)
    positive = (g1 * params.theta1, g2 * params.theta2, g3 * params.theta3)
    negative = tuple(g - p for g, p in zip(groups, positive))
    return CellProbabilities(group_masses=groups, et_positive=positive,
                             et_negative=negative)


def _diagnosed_mass(eta: float, psi: float) -> float:
    eta = _check_unit_value("eta", eta)
    psi = _check_unit_value("psi", psi)
    denom = eta + (1.0 - eta) * psi
    if denom == 0.0:
        raise UndefinedSensitivityError(
            "no patient is ever reference-test positive (eta = psi = 0)")
    return denom


def rt_sensitivity(eta: float, psi: float) -> float:
    """Share of eventual positives already positive at the start."""
    return eta / _diagnosed_mass(eta, psi)


def et_sensitivity(eta: float, psi: float, theta1: float,
                   theta2: float) -> float:
    """Early-test sensitivity among patients who ever test positive."""
    denom = _diagnosed_mass(eta, psi)
    theta1 = _check_unit_value("theta1", theta1)
    theta2 = _check_unit_value("theta2", theta2)
    return (eta * theta1 + (1.0 - eta) * psi * theta2) / denom


@dataclass(frozen=True)
class DelayedPositiveResult:
    """Monte Carlo summary of the delayed-positive mass (1-eta)*psi."""

    estimate: float
    interval: tuple[float, float]
    level: float
    n_draws: int

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "interval": list(self.interval),
            "level": self.level,
            "n_draws": self.n_draws,
        }


def _draws(value, n, rng):
    if isinstance(value, Distribution):
        return np.asarray(value.sample(n, rng), dtype=float)
    return np.full(n, float(value))


def delayed_positive_check(eta, psi, *, n_draws: int = 10000,
                           level: float = 0.9,
                           seed: int = 0) -> DelayedPositiveResult:
    """Median and central interval of (1-eta)*psi under independence.

    eta and psi may be point values or distributions; draws are
    independent and the generator is seeded, so repeated calls with the
    same arguments return identical results.
    """
    if n_draws < 1000:
        raise ConfigurationError("need at least 1000 Monte Carlo draws")
    if not 0.0 < level < 1.0:
        raise ConfigurationError("interval level must lie in (0, 1)")
    eta = _check_unit_value("eta", eta)
    psi = _check_unit_value("psi", psi)

    if not isinstance(eta, Distribution) and not isinstance(psi, Distribution):
        value = (1.0 - eta) * psi
        return DelayedPositiveResult(estimate=value, interval=(value, value),
                                     level=level, n_draws=n_draws)

    rng = np.random.default_rng(seed)
    product = (1.0 - _draws(eta, n_draws, rng)) * _draws(psi, n_draws, rng)
    tail = (1.0 - level) / 2.0
    lo, mid, hi = np.quantile(product, [tail, 0.5, 1.0 - tail])
    return DelayedPositiveResult(estimate=float(mid),
                                 interval=(float(lo), float(hi)),
                                 level=level, n_draws=n_draws)


@dataclass(frozen=True)
class PatientSample:
    """Integer patient counts per cell plus per-patient categories."""

    total: int
    counts: dict
    patients: tuple[str, ...]

    def __post_init__(self):
        if set(self.counts) != set(CELL_ORDER):
            raise ValidationError("counts must cover all six cells")
        if any(c < 0 for c in self.counts.values()):
            raise ValidationError("counts cannot be negative")
        if sum(self.counts.values()) != self.total:
            raise ValidationError("counts must sum to the total")
        if len(self.patients) != self.total:
            raise ValidationError("patient categories must cover the total")

    def group_counts(self) -> tuple[int, int, int]:
        return tuple(self.counts[f"{g}_et_pos"] + self.counts[f"{g}_et_neg"]
                     for g in GROUP_ORDER)

    def et_positive_total(self) -> int:
        return sum(self.counts[f"{g}_et_pos"] for g in GROUP_ORDER)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "counts": {c: self.counts[c] for c in CELL_ORDER},
            "patients": list(self.patients),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PatientSample":
        return cls(total=int(doc["total"]),
                   counts={c: int(doc["counts"][c]) for c in doc["counts"]},
                   patients=tuple(doc["patients"]))


def _largest_remainder(masses, total):
    """Integer apportionment; remainder ties resolve to earlier entries."""
    floors = [math.floor(m * total) for m in masses]
    remainders = [m * total - f for m, f in zip(masses, floors)]
    leftover = total - sum(floors)
    order = sorted(range(len(masses)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        floors[i] += 1
    return floors


def patient_sample(params: TrialParameters, total: int) -> PatientSample:
    """Deterministic example cohort via largest-remainder rounding.

    Distribution-valued parameters are collapsed to medians. The three
    group masses are rounded to group counts first, then each group is
    split between early-test positive and negative, so exact group
    masses (say 0.5, 0.25, 0.25) always survive as exact counts no
    matter how the early-test probabilities fall.
    """
    total = int(total)
    if total < 1:
        raise ValidationError("total must be at least 1")
    point = params.medians()
    cells = cell_probabilities(point)
    group_counts = _largest_remainder(cells.group_masses, total)
    thetas = (point.theta1, point.theta2, point.theta3)

    counts = {}
    for group, n_group, theta in zip(GROUP_ORDER, group_counts, thetas):
        pos, neg = _largest_remainder((theta, 1.0 - theta), n_group)
        counts[f"{group}_et_pos"] = pos
        counts[f"{group}_et_neg"] = neg
    patients = []
    for cell in CELL_ORDER:
        patients.extend([cell] * counts[cell])
    return PatientSample(total=total, counts=counts,
                         patients=tuple(patients))
