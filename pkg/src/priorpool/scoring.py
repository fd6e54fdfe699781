"""Proper scoring rules and cross-method comparison tables.

Distributions are scored against known truths with the logarithmic,
Brier, and quadratic rules. Tables aggregate per-question scores per
evaluand (an expert or a pooling method); correlation matrices compare
the evaluands' median errors. Log-scale questions are scored on logged
values through a change-of-variables view of the density; the Brier
score defaults to the raw scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from priorpool.distributions import Distribution, LogDomain
from priorpool.errors import (
    ConfigurationError,
    CoverageError,
    UndefinedCorrelationError,
    ValidationError,
)
from priorpool.quadrature import integrate

_SCALES = ("linear", "log")
_RULES = ("brier", "logarithmic", "quadratic")
_DEFAULT_AGGREGATION = {"brier": "sum", "logarithmic": "sum",
                        "quadratic": "mean"}


def logarithmic_score(d: Distribution, truth: float) -> float:
    """Negative log density at the truth; +inf where the density is 0."""
    truth = float(truth)
    if not math.isfinite(truth):
        raise ValidationError("truth must be finite")
    density = float(d.pdf(truth))
    if density <= 0.0:
        return math.inf
    return -math.log(density)


def brier_score(median: float, truth: float) -> float:
    """Squared error of the median."""
    median, truth = float(median), float(truth)
    if not (math.isfinite(median) and math.isfinite(truth)):
        raise ValidationError("median and truth must be finite")
    return (median - truth) ** 2


def quadratic_score(d: Distribution, truth: float, *,
                    tol: float = 1e-8) -> float:
    """2 f(truth) minus the integral of f squared."""
    truth = float(truth)
    if not math.isfinite(truth):
        raise ValidationError("truth must be finite")
    lo, hi = d.support
    self_mass = integrate(lambda x: d.pdf(x) ** 2, lo, hi, tol=tol,
                          points=d.quadrature_points())
    return 2.0 * float(d.pdf(truth)) - self_mass


@dataclass(frozen=True)
class ScoreRow:
    evaluand_id: str
    brier: float
    logarithmic: float
    quadratic: float


@dataclass(frozen=True)
class ScoreTable:
    """Aggregated scores per evaluand over a common question set."""

    rows: tuple[ScoreRow, ...]
    question_count: int

    def __post_init__(self):
        if not self.rows:
            raise ValidationError("score table needs at least one row")
        if self.question_count < 1:
            raise ValidationError("score table needs at least one question")
        for row in self.rows:
            if not row.brier >= 0.0:
                raise ValidationError(
                    f"negative brier score for {row.evaluand_id!r}")

    def row_for(self, evaluand_id: str) -> ScoreRow:
        for row in self.rows:
            if row.evaluand_id == evaluand_id:
                return row
        raise KeyError(evaluand_id)

    def to_dict(self) -> dict:
        return {
            "question_count": self.question_count,
            "rows": [
                {"id": r.evaluand_id, "brier": r.brier,
                 "logarithmic": r.logarithmic, "quadratic": r.quadratic}
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        lines = ["id,brier,logarithmic,quadratic"]
        for r in self.rows:
            lines.append(f"{r.evaluand_id},{r.brier!r},{r.logarithmic!r},"
                         f"{r.quadratic!r}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = ("evaluand", "brier", "logarithmic", "quadratic")
        body = [
            (r.evaluand_id, f"{r.brier:.6g}", f"{r.logarithmic:.6g}",
             f"{r.quadratic:.6g}")
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in [header] + body)
                  for i in range(4)]
        def fmt(row):
            return "  ".join(cell.rjust(w) if i else cell.ljust(w)
                             for i, (cell, w) in enumerate(zip(row, widths)))
        rule = "  ".join("-" * w for w in widths)
        return "\n".join([fmt(header), rule] + [fmt(r) for r in body]) + "\n"


def _check_truths(truths):
    truths = [float(t) for t in truths]
    if not truths:
        raise ValidationError("need at least one question")
    if any(not math.isfinite(t) for t in truths):
        raise ValidationError("truths must be finite")
    return truths


def _check_scales(scales, n):
    if scales is None:
        return ["linear"] * n
    scales = list(scales)
    if len(scales) != n:
        raise ValidationError("scales must align with truths")
    for s in scales:
        if s not in _SCALES:
            raise ValidationError(f"unknown scale {s!r}")
    return scales


def _aggregate(values, mode):
    return sum(values) if mode == "sum" else sum(values) / len(values)


def score_table(evaluands, truths, *, scales=None, brier_scale: str = "raw",
                aggregation=None, tol: float = 1e-8) -> ScoreTable:
    """Score every evaluand's per-question distributions against truths.

    ``evaluands`` maps an id to its per-question distributions, aligned
    with ``truths``. Log-scale questions score the logarithmic and
    quadratic rules on logged values; ``brier_scale`` chooses whether
    the Brier rule follows suit ("log") or stays raw (default).
    Aggregation defaults to summed brier and logarithmic scores and a
    mean quadratic score; pass e.g. {"brier": "mean"} to override.
    """
    if not evaluands:
        raise ValidationError("need at least one evaluand")
    truths = _check_truths(truths)
    n = len(truths)
    scales = _check_scales(scales, n)
    if brier_scale not in ("raw", "log"):
        raise ConfigurationError("brier_scale must be 'raw' or 'log'")
    agg = dict(_DEFAULT_AGGREGATION)
    for key, mode in (aggregation or {}).items():
        if key not in _RULES:
            raise ConfigurationError(f"unknown scoring rule {key!r}")
        if mode not in ("sum", "mean"):
            raise ConfigurationError("aggregation modes are 'sum' and 'mean'")
        agg[key] = mode

    for eid, dists in evaluands.items():
        if len(dists) != n:
            raise CoverageError(
                f"evaluand {eid!r} covers {len(dists)} of {n} questions")

    for truth, scale in zip(truths, scales):
        if scale == "log" and truth <= 0:
            raise ValidationError("log-scale truths must be positive")

    rows = []
    for eid, dists in evaluands.items():
        briers, logs, quads = [], [], []
        for d, truth, scale in zip(dists, truths, scales):
            median = float(d.quantile(0.5))
            if scale == "log":
                view = LogDomain(d)
                logs.append(logarithmic_score(view, math.log(truth)))
                quads.append(quadratic_score(view, math.log(truth), tol=tol))
                if brier_scale == "log":
                    briers.append(brier_score(math.log(median),
                                              math.log(truth)))
                else:
                    briers.append(brier_score(median, truth))
            else:
                logs.append(logarithmic_score(d, truth))
                quads.append(quadratic_score(d, truth, tol=tol))
                briers.append(brier_score(median, truth))
        rows.append(ScoreRow(
            evaluand_id=eid,
            brier=_aggregate(briers, agg["brier"]),
            logarithmic=_aggregate(logs, agg["logarithmic"]),
            quadratic=_aggregate(quads, agg["quadratic"]),
        ))
    return ScoreTable(rows=tuple(rows), question_count=n)


@dataclass(frozen=True)
class ErrorCorrelationMatrix:
    """Pearson correlations between evaluands' median errors."""

    ids: tuple[str, ...]
    matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(
            self, "matrix",
            tuple(tuple(float(v) for v in row) for row in self.matrix))
        n = len(self.ids)
        if len(self.matrix) != n or any(len(r) != n for r in self.matrix):
            raise ValidationError("correlation matrix must be square")
        for i in range(n):
            if self.matrix[i][i] != 1.0:
                raise ValidationError("correlation diagonal must be exactly 1")
            for j in range(n):
                v = self.matrix[i][j]
                if not -1.0 <= v <= 1.0:
                    raise ValidationError(
                        "correlations must lie in [-1, 1]")
                if abs(v - self.matrix[j][i]) > 1e-12:
                    raise ValidationError("correlation matrix must be symmetric")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    def to_dict(self) -> dict:
        return {"ids": list(self.ids),
                "matrix": [list(row) for row in self.matrix]}

    @classmethod
    def from_dict(cls, doc: dict) -> "ErrorCorrelationMatrix":
        return cls(ids=tuple(doc["ids"]),
                   matrix=tuple(tuple(row) for row in doc["matrix"]))

    def to_csv(self) -> str:
        lines = ["id," + ",".join(self.ids)]
        for eid, row in zip(self.ids, self.matrix):
            lines.append(eid + "," + ",".join(repr(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = ("",) + self.ids
        body = [(eid,) + tuple(f"{v:+.3f}" for v in row)
                for eid, row in zip(self.ids, self.matrix)]
        widths = [max(len(row[i]) for row in [header] + body)
                  for i in range(len(header))]
        def fmt(row):
            return "  ".join(cell.rjust(w) if i else cell.ljust(w)
                             for i, (cell, w) in enumerate(zip(row, widths)))
        return "\n".join([fmt(header)] + [fmt(r) for r in body]) + "\n"


def median_error_correlations(evaluands, truths) -> ErrorCorrelationMatrix:
    """Correlate the evaluands' per-question median errors.

    ``evaluands`` maps an id to per-question medians aligned with
    ``truths``. Pearson correlation needs spread, so at least three
    questions are required and any evaluand whose errors are constant
    makes the result undefined.
    """
    truths = _check_truths(truths)
    n = len(truths)
    if n < 3:
        raise ValidationError("correlations need at least three questions")
    if not evaluands:
        raise ValidationError("need at least one evaluand")
    ids = list(evaluands)
    errors = []
    for eid in ids:
        medians = [float(m) for m in evaluands[eid]]
        if len(medians) != n:
            raise CoverageError(
                f"evaluand {eid!r} covers {len(medians)} of {n} questions")
        errors.append([m - t for m, t in zip(medians, truths)])
    errs = np.asarray(errors)
    spread = errs.std(axis=1)
    flat = [eid for eid, sd in zip(ids, spread) if sd == 0.0]
    if flat:
        raise UndefinedCorrelationError(
            f"zero-variance median errors for {', '.join(flat)}", ids=flat)

    corr = np.corrcoef(errs)
    corr = np.asarray(corr, dtype=float).reshape(len(ids), len(ids))
    corr = (corr + corr.T) / 2.0
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return ErrorCorrelationMatrix(
        ids=tuple(ids),
        matrix=tuple(tuple(row) for row in corr.tolist()))
