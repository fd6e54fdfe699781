"""Performance-based expert weighting from seed questions.

Seed questions have answers known to the facilitator but not the
experts. An expert's calibration measures how often the truths land in
the four interquantile ranges of their judgments; information measures
how tightly their quantiles carve up the plausible range for each
question. Weights are calibration times information, with experts below
a calibration cutoff removed entirely.

The calibration statistic 2qI is compared against a chi-squared
distribution with r - 1 = 3 degrees of freedom (four interquantile
cells), and the score is the upper-tail p-value, so well calibrated
experts score near 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from priorpool.errors import (
    ConfigurationError,
    CoverageError,
    DomainError,
    NoCalibratedExpertError,
    ValidationError,
)
from priorpool.fitting import ElicitedJudgment, FitResult, fit_least_squares
from priorpool.pooling import WeightVector, linear_pool

SCALES = ("linear", "log")
THEORETICAL_P = (0.25, 0.25, 0.25, 0.25)

# mass assigned to each of the six segments cut out of the intrinsic
# range by the five elicited values
SEGMENT_MASSES = (0.01, 0.24, 0.25, 0.25, 0.24, 0.01)
OVERSHOOT = 0.10

_SUM_TOL = 1e-9
# quantile levels read off a pooled distribution when the virtual
# decision maker is scored like an expert during the alpha search
_DM_LEVELS = (0.01, 0.25, 0.5, 0.75, 0.99)


@dataclass(frozen=True)
class SeedQuestion:
    """One calibration question: expert judgments plus the known answer."""

    question_id: str
    judgments: tuple[ElicitedJudgment, ...]
    truth: float
    scale: str = "linear"
    text: str = ""

    def __post_init__(self):
        if not self.question_id:
            raise ValidationError("question_id must be nonempty")
        if self.scale not in SCALES:
            raise ValidationError(f"unknown scale {self.scale!r}")
        if not math.isfinite(self.truth):
            raise ValidationError("truth must be finite")
        if not self.judgments:
            raise ValidationError("seed question needs at least one judgment")
        seen = set()
        for j in self.judgments:
            if j.quantity_id != self.question_id:
                raise ValidationError(
                    f"judgment for {j.quantity_id!r} attached to question "
                    f"{self.question_id!r}")
            if j.expert_id in seen:
                raise ValidationError(
                    f"duplicate judgment from expert {j.expert_id!r}")
            seen.add(j.expert_id)
        if self.scale == "log":
            if self.truth <= 0:
                raise ValidationError("log-scale truth must be positive")
            if any(j.minimum <= 0 for j in self.judgments):
                raise ValidationError(
                    "log-scale judgments must have positive values")

    @property
    def expert_ids(self) -> tuple[str, ...]:
        return tuple(j.expert_id for j in self.judgments)

    def judgment_for(self, expert_id: str) -> ElicitedJudgment | None:
        for j in self.judgments:
            if j.expert_id == expert_id:
                return j
        return None

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "text": self.text,
            "truth": self.truth,
            "scale": self.scale,
            "judgments": [j.to_dict() for j in self.judgments],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SeedQuestion":
        return cls(
            question_id=doc["question_id"],
            judgments=tuple(
                ElicitedJudgment.from_dict(j) for j in doc["judgments"]),
            truth=float(doc["truth"]),
            scale=doc.get("scale", "linear"),
            text=doc.get("text", ""),
        )


@dataclass(frozen=True)
class CalibrationResult:
    """One expert's calibration and information over a seed set."""

    expert_id: str
    hit_counts: tuple[int, ...]
    s: tuple[float, ...]
    p: tuple[float, ...]
    relent: float
    calibration: float
    information: float
    q: int

    def __post_init__(self):
        object.__setattr__(self, "hit_counts", tuple(int(c) for c in self.hit_counts))
        object.__setattr__(self, "s", tuple(float(v) for v in self.s))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        if sum(self.hit_counts) != self.q:
            raise ValidationError("hit counts must sum to the question count")
        if abs(sum(self.s) - 1.0) > _SUM_TOL or abs(sum(self.p) - 1.0) > _SUM_TOL:
            raise ValidationError("s and p must each sum to 1")
        if self.relent < -1e-12:
            raise ValidationError("relative entropy cannot be negative")
        object.__setattr__(self, "relent", max(float(self.relent), 0.0))
        if not 0.0 <= self.calibration <= 1.0:
            raise ValidationError("calibration must lie in [0, 1]")
        if self.information < 0:
            raise ValidationError("information must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "expert_id": self.expert_id,
            "hit_counts": list(self.hit_counts),
            "s": list(self.s),
            "p": list(self.p),
            "relent": self.relent,
            "calibration": self.calibration,
            "information": self.information,
            "q": self.q,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationResult":
        return cls(
            expert_id=doc["expert_id"],
            hit_counts=tuple(doc["hit_counts"]),
            s=tuple(doc["s"]),
            p=tuple(doc["p"]),
            relent=float(doc["relent"]),
            calibration=float(doc["calibration"]),
            information=float(doc["information"]),
            q=int(doc["q"]),
        )


def _hit_bin(judgment: ElicitedJudgment, truth: float) -> int:
    # boundary values fall into the upper range
    if truth < judgment.q25:
        return 0
    if truth < judgment.median:
        return 1
    if truth < judgment.q75:
        return 2
    return 3


def interquantile_hits(judgments, truths) -> tuple[int, int, int, int]:
    """Count truths per interquantile range of the paired judgments."""
    judgments = list(judgments)
    truths = list(truths)
    if not judgments:
        raise ValidationError("need at least one judgment")
    if len(judgments) != len(truths):
        raise ValidationError("judgments and truths must be aligned")
    counts = [0, 0, 0, 0]
    for judgment, truth in zip(judgments, truths):
        counts[_hit_bin(judgment, float(truth))] += 1
    return tuple(counts)


def relative_entropy_statistic(s, p) -> float:
    """Sum of s_j ln(s_j / p_j) with the convention 0 ln 0 = 0."""
    s = tuple(float(v) for v in s)
    p = tuple(float(v) for v in p)
    if len(s) != len(p):
        raise ValidationError("s and p must have the same length")
    if any(v < 0 for v in s) or any(v < 0 for v in p):
        raise ValidationError("proportions cannot be negative")
    if abs(sum(s) - 1.0) > _SUM_TOL or abs(sum(p) - 1.0) > _SUM_TOL:
        raise ValidationError("s and p must each sum to 1")
    if any(pj == 0.0 for pj in p):
        raise DomainError("background proportions must be positive")
    return float(sum(sj * math.log(sj / pj) for sj, pj in zip(s, p) if sj > 0))


def calibration_score(relent: float, q: int, r: int = 4) -> float:
    """Upper-tail chi-squared p-value of the statistic 2q * relent.

    Degrees of freedom are r - 1 for r interquantile cells. High values
    mean the expert's empirical hit proportions look like the
    theoretical ones.
    """
    if relent < 0:
        raise DomainError("relative entropy statistic cannot be negative")
    if q < 1:
        raise DomainError("need at least one seed question")
    if r < 2:
        raise DomainError("need at least two interquantile ranges")
    return float(stats.chi2.sf(2.0 * q * relent, df=r - 1))


def intrinsic_range(question: SeedQuestion, *,
                    overshoot: float = OVERSHOOT) -> tuple[float, float]:
    """Background interval: all elicited values and the truth, widened.

    The overshoot fraction of the value span is added on each side, in
    log space for log-scale questions.
    """
    if overshoot < 0:
        raise ConfigurationError("overshoot cannot be negative")
    values = [v for j in question.judgments for v in j.values]
    values.append(question.truth)
    if question.scale == "log":
        logs = np.log(values)
        span = float(logs.max() - logs.min())
        return (math.exp(float(logs.min()) - overshoot * span),
                math.exp(float(logs.max()) + overshoot * span))
    lo, hi = min(values), max(values)
    span = hi - lo
    return lo - overshoot * span, hi + overshoot * span


def _segment_information(points, lo, hi) -> float:
    edges = np.concatenate([[lo], points, [hi]])
    widths = np.diff(edges)
    if np.any(widths <= 0):
        raise DomainError(
            "intrinsic range must strictly contain the elicited values")
    u = widths / (hi - lo)
    masses = np.asarray(SEGMENT_MASSES)
    return float(np.sum(masses * np.log(masses / u)))


def information_score(judgment: ElicitedJudgment, bounds,
                      scale: str = "linear") -> float:
    """Relative entropy of the judgment's segment masses against a
    uniform (log-uniform for log scale) background over ``bounds``."""
    if scale not in SCALES:
        raise ConfigurationError(f"unknown scale {scale!r}")
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise DomainError("intrinsic range must have positive width")
    points = np.asarray(judgment.values, dtype=float)
    if scale == "log":
        if lo <= 0:
            raise DomainError("log-scale intrinsic range must be positive")
        return _segment_information(np.log(points), math.log(lo), math.log(hi))
    return _segment_information(points, lo, hi)


def _expert_roster(seeds) -> tuple[str, ...]:
    roster: list[str] = []
    for question in seeds:
        for eid in question.expert_ids:
            if eid not in roster:
                roster.append(eid)
    return tuple(roster)


def _require_full_coverage(seeds, roster):
    for question in seeds:
        for eid in roster:
            if question.judgment_for(eid) is None:
                raise CoverageError(
                    f"expert {eid!r} has no judgment for question "
                    f"{question.question_id!r}")


def evaluate_experts(seeds) -> tuple[CalibrationResult, ...]:
    """Calibration and information for every expert over the seed set.

    Every expert must have answered every question; the information
    score averages per-question values computed against that question's
    intrinsic range over all experts and the truth.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValidationError("need at least one seed question")
    roster = _expert_roster(seeds)
    _require_full_coverage(seeds, roster)
    q = len(seeds)
    ranges = {s.question_id: intrinsic_range(s) for s in seeds}

    results = []
    for eid in roster:
        judgments = [s.judgment_for(eid) for s in seeds]
        counts = interquantile_hits(judgments, [s.truth for s in seeds])
        s_props = tuple(c / q for c in counts)
        relent = relative_entropy_statistic(s_props, THEORETICAL_P)
        infos = [
            information_score(j, ranges[s.question_id], s.scale)
            for j, s in zip(judgments, seeds)
        ]
        results.append(CalibrationResult(
            expert_id=eid,
            hit_counts=counts,
            s=s_props,
            p=THEORETICAL_P,
            relent=relent,
            calibration=calibration_score(relent, q),
            information=float(np.mean(infos)),
            q=q,
        ))
    return tuple(results)


def cm_weights(cal_results, alpha: float) -> WeightVector:
    """Normalized calibration-times-information weights with a cutoff.

    Experts whose calibration falls below ``alpha`` get raw weight zero.
    If that removes everyone, there is no usable weighting and a
    NoCalibratedExpertError is raised.
    """
    cal_results = list(cal_results)
    if not cal_results:
        raise ValidationError("need at least one calibration result")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("alpha must lie in [0, 1]")
    ids = [r.expert_id for r in cal_results]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate expert ids in calibration results")

    raw = []
    meta = {}
    for r in cal_results:
        passed = r.calibration >= alpha
        raw.append(r.calibration * r.information if passed else 0.0)
        meta[r.expert_id] = {
            "calibration": r.calibration,
            "information": r.information,
            "cutoff_passed": passed,
        }
    total = sum(raw)
    if total == 0.0:
        raise NoCalibratedExpertError(
            f"no expert passes the calibration cutoff alpha={alpha}")
    weights = tuple((eid, w / total) for eid, w in zip(ids, raw))
    return WeightVector(weights=weights, provenance="classical_method",
                        metadata={"alpha": alpha, "experts": meta})


@dataclass(frozen=True)
class CvFold:
    """One leave-one-out fold: held-out question plus trained weights."""

    question_id: str
    weights: WeightVector
    pool: object
    fits: tuple[tuple[str, FitResult], ...]
    truth: float
    scale: str

    def fit_for(self, expert_id: str) -> FitResult:
        for eid, fit in self.fits:
            if eid == expert_id:
                return fit
        raise KeyError(expert_id)


def _tag_fold(exc: Exception, question_id: str):
    exc.args = (f"fold {question_id!r}: {exc.args[0]}",) + exc.args[1:]


def leave_one_out_cv(seeds, alpha: float = 0.05, *, families=None,
                     eps_bound: float = 0.01) -> tuple[CvFold, ...]:
    """Cross-validated pools: each question predicted from the others.

    For each seed question, weights are computed from the remaining
    questions, the held-out judgments are fitted, and the fits are
    linearly pooled with those weights.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValidationError("leave-one-out needs at least two seed questions")
    ids = [s.question_id for s in seeds]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate question ids in seed set")
    roster = _expert_roster(seeds)
    _require_full_coverage(seeds, roster)

    fits: dict[str, dict[str, FitResult]] = {}
    for question in seeds:
        per_expert = {}
        for eid in roster:
            judgment = question.judgment_for(eid)
            try:
                per_expert[eid] = fit_least_squares(
                    judgment, families, eps_bound=eps_bound)
            except Exception as exc:
                _tag_fold(exc, question.question_id)
                raise
        fits[question.question_id] = per_expert

    folds = []
    for k, held_out in enumerate(seeds):
        training = seeds[:k] + seeds[k + 1:]
        try:
            weights = cm_weights(evaluate_experts(training), alpha)
        except (NoCalibratedExpertError, ValidationError) as exc:
            _tag_fold(exc, held_out.question_id)
            raise
        fold_fits = fits[held_out.question_id]
        pool = linear_pool(
            {eid: fit.distribution for eid, fit in fold_fits.items()}, weights)
        folds.append(CvFold(
            question_id=held_out.question_id,
            weights=weights,
            pool=pool,
            fits=tuple(fold_fits.items()),
            truth=held_out.truth,
            scale=held_out.scale,
        ))
    return tuple(folds)


@dataclass(frozen=True)
class OptimizedAlpha:
    """Cutoff chosen by maximizing the virtual decision maker's score."""

    alpha: float
    score: float
    calibration: float
    information: float
    weights: WeightVector


def _dm_information(pool_values, question: SeedQuestion) -> float:
    # widen the background so the pooled quantiles are strictly inside
    values = [v for j in question.judgments for v in j.values]
    values.append(question.truth)
    values.extend(pool_values)
    if question.scale == "log":
        if min(values) <= 0:
            raise DomainError("nonpositive pooled quantile on a log scale")
        logs = np.log(values)
        span = float(logs.max() - logs.min())
        lo = math.exp(float(logs.min()) - OVERSHOOT * span)
        hi = math.exp(float(logs.max()) + OVERSHOOT * span)
        return _segment_information(np.log(np.asarray(pool_values)),
                                    math.log(lo), math.log(hi))
    span = max(values) - min(values)
    lo = min(values) - OVERSHOOT * span
    hi = max(values) + OVERSHOOT * span
    return _segment_information(np.asarray(pool_values, dtype=float), lo, hi)


def optimize_alpha(seeds, *, families=None,
                   eps_bound: float = 0.01) -> OptimizedAlpha:
    """Search the cutoff over the observed calibration values.

    Candidates are 0 and each expert's calibration score. For each
    candidate the pooled distributions act as a virtual decision maker
    whose own calibration times information is the objective; ties pick
    the smallest alpha. Candidates whose pools degenerate (for example
    nonpositive quantiles on a log scale) are skipped.
    """
    seeds = list(seeds)
    results = evaluate_experts(seeds)
    roster = [r.expert_id for r in results]

    fits = {
        s.question_id: {
            eid: fit_least_squares(s.judgment_for(eid), families,
                                   eps_bound=eps_bound)
            for eid in roster
        }
        for s in seeds
    }

    candidates = sorted({0.0} | {r.calibration for r in results})
    best: OptimizedAlpha | None = None
    q = len(seeds)
    failure: Exception | None = None
    for alpha in candidates:
        try:
            weights = cm_weights(results, alpha)
            counts = [0, 0, 0, 0]
            infos = []
            for question in seeds:
                pool = linear_pool(
                    {eid: fit.distribution
                     for eid, fit in fits[question.question_id].items()},
                    weights)
                pool_values = [float(pool.quantile(p)) for p in _DM_LEVELS]
                q25, median, q75 = pool_values[1], pool_values[2], pool_values[3]
                t = question.truth
                b = 0 if t < q25 else 1 if t < median else 2 if t < q75 else 3
                counts[b] += 1
                infos.append(_dm_information(pool_values, question))
            s_props = tuple(c / q for c in counts)
            relent = relative_entropy_statistic(s_props, THEORETICAL_P)
            calibration = calibration_score(relent, q)
            information = float(np.mean(infos))
        except (NoCalibratedExpertError, DomainError) as exc:
            failure = exc
            continue
        score = calibration * information
        if best is None or score > best.score + 1e-15:
            best = OptimizedAlpha(alpha=alpha, score=score,
                                  calibration=calibration,
                                  information=information, weights=weights)
    if best is None:
        raise failure if failure is not None else NoCalibratedExpertError(
            "no usable cutoff candidate")
    return best
