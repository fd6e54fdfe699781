"""Shared analysis engine behind the CLI and the HTTP service.

Every runner returns a plain JSON-serializable document built from the
core modules, and ``canonical_json`` renders documents with one fixed
layout. Both front ends funnel through here, so the same inputs always
produce byte-identical output files and response bodies.
"""

from __future__ import annotations

import json
import math

import numpy as np

from priorpool.classical import (
    _expert_roster,
    _require_full_coverage,
    cm_weights,
    evaluate_experts,
    leave_one_out_cv,
    optimize_alpha,
)
from priorpool.distributions import Distribution, distribution_from_dict
from priorpool.errors import UndefinedSensitivityError, ValidationError
from priorpool.fitting import ElicitedJudgment, fit_least_squares
from priorpool.pooling import (
    WeightVector,
    equal_weights,
    linear_pool,
    log_linear_pool,
)
from priorpool.scoring import (
    ErrorCorrelationMatrix,
    ScoreTable,
    median_error_correlations,
    score_table,
)
from priorpool.trial import (
    GROUP_ORDER,
    cell_probabilities,
    delayed_positive_check,
    et_sensitivity,
    patient_sample,
    rt_sensitivity,
)

POOL_METHODS = ("linear", "loglinear")

# reserved row ids in score tables; experts may not use them
POOL_ROW_IDS = ("EW", "CM")

OVERLAY_POINTS = 512
_OVERLAY_TAIL = 1e-3


def _jsonable(value):
    # JSON has no infinities; scores use +inf as the zero-density
    # sentinel, so render non-finite floats as strings
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def canonical_json(doc) -> str:
    """Fixed JSON layout shared by the CLI and the HTTP service."""
    return json.dumps(_jsonable(doc), ensure_ascii=False, sort_keys=True,
                      indent=2, allow_nan=False) + "\n"


def run_fit(judgment: ElicitedJudgment, families=None, *,
            eps_bound: float = 0.01) -> dict:
    """Fit one judgment and report the chosen family and alternatives."""
    fit = fit_least_squares(judgment, families, eps_bound=eps_bound)
    return {"judgment": judgment.to_dict(), "fit": fit.to_dict()}


def _as_distributions(items):
    out = []
    for item in items:
        if isinstance(item, Distribution):
            out.append(item)
        else:
            out.append(distribution_from_dict(item))
    return out


def run_pool(distributions, weights=None, method: str = "linear") -> dict:
    """Pool distributions with the requested method.

    ``weights`` may be a WeightVector or its document form, a plain
    list aligned with the distributions, or None for equal weights.
    """
    if method not in POOL_METHODS:
        raise ValidationError(f"method must be one of {POOL_METHODS}",
                              code="pool_method")
    dists = _as_distributions(distributions)
    if not dists:
        raise ValidationError("need at least one distribution")
    ids = [f"d{i + 1}" for i in range(len(dists))]
    if isinstance(weights, dict):
        try:
            weights = WeightVector.from_dict(weights)
        except (KeyError, TypeError) as err:
            raise ValidationError(f"bad weight vector: {err}") from err
    if weights is None:
        wv = equal_weights(ids)
    elif isinstance(weights, WeightVector):
        wv = weights
        if len(wv.weights) != len(dists):
            raise ValidationError(
                f"{len(wv.weights)} weights for {len(dists)} distributions")
    else:
        ws = [float(w) for w in weights]
        if len(ws) != len(dists):
            raise ValidationError(
                f"{len(ws)} weights for {len(dists)} distributions")
        wv = WeightVector(weights=tuple(zip(ids, ws)), provenance="custom")
    if method == "linear":
        pooled = linear_pool(dists, wv)
    else:
        pooled = log_linear_pool(dists, wv)
    return {"method": method, "weights": wv.to_dict(),
            "distribution": pooled.to_dict()}


def run_cm_weights(seeds, alpha: float) -> dict:
    """Calibration, information, and normalized weights per expert."""
    seeds = list(seeds)
    results = evaluate_experts(seeds)
    wv = cm_weights(results, float(alpha))
    return {"alpha": float(alpha), "question_count": len(seeds),
            "experts": [r.to_dict() for r in results],
            "weights": wv.to_dict()}


def run_optimized_weights(seeds, *, families=None,
                          eps_bound: float = 0.01) -> dict:
    """Weights at the cutoff that maximizes the pooled score."""
    seeds = list(seeds)
    opt = optimize_alpha(seeds, families=families, eps_bound=eps_bound)
    return {"alpha": opt.alpha, "score": opt.score,
            "calibration": opt.calibration, "information": opt.information,
            "question_count": len(seeds),
            "experts": [r.to_dict() for r in evaluate_experts(seeds)],
            "weights": opt.weights.to_dict()}


def run_crossval(seeds, alpha: float = 0.05, *, families=None,
                 eps_bound: float = 0.01) -> dict:
    """Leave-one-out folds with per-fold weights and pools.

    The document deliberately omits the seed truths: scoring reads them
    from the seed file, so fold files can circulate like expert
    material.
    """
    seeds = list(seeds)
    folds = leave_one_out_cv(seeds, float(alpha), families=families,
                             eps_bound=eps_bound)
    docs = []
    for fold in folds:
        roster = [eid for eid, _ in fold.fits]
        ew_pool = linear_pool({eid: f.distribution for eid, f in fold.fits},
                              equal_weights(roster))
        docs.append({
            "question_id": fold.question_id,
            "scale": fold.scale,
            "weights": fold.weights.to_dict(),
            "fits": {eid: f.to_dict() for eid, f in fold.fits},
            "cm_pool": fold.pool.to_dict(),
            "ew_pool": ew_pool.to_dict(),
        })
    return {"alpha": float(alpha), "question_count": len(seeds),
            "folds": docs}


def _fold_entries(folds_doc):
    if not isinstance(folds_doc, dict) or not folds_doc.get("folds"):
        raise ValidationError("folds document has no folds")
    return folds_doc["folds"]


def run_scores(folds_doc, seeds, *, brier_scale: str = "raw",
               aggregation=None, tol: float = 1e-8) -> ScoreTable:
    """Score experts and both pools from a folds document.

    Each expert's held-out fit, the equal-weight pool, and the
    calibration-weighted pool are scored against the seed truths, one
    row each.
    """
    seeds = list(seeds)
    by_id = {s.question_id: s for s in seeds}
    folds = _fold_entries(folds_doc)
    qids = [f["question_id"] for f in folds]
    if len(set(qids)) != len(qids):
        raise ValidationError("duplicate question ids in folds document")
    missing = [qid for qid in qids if qid not in by_id]
    if missing:
        raise ValidationError(f"no truths for fold questions {missing}")
    for fold in folds:
        if fold.get("scale") != by_id[fold["question_id"]].scale:
            raise ValidationError(
                f"fold {fold['question_id']!r} was built on a different "
                "scale than the seed file")

    truths = [by_id[qid].truth for qid in qids]
    scales = [by_id[qid].scale for qid in qids]
    roster = list(folds[0]["fits"])
    clash = [eid for eid in roster if eid in POOL_ROW_IDS]
    if clash:
        raise ValidationError(f"expert ids {clash} collide with pool rows")

    evaluands = {}
    for eid in roster:
        dists = []
        for fold in folds:
            fit = fold["fits"].get(eid)
            if fit is None:
                raise ValidationError(
                    f"fold {fold['question_id']!r} lacks a fit for {eid!r}")
            dists.append(distribution_from_dict(fit["distribution"]))
        evaluands[eid] = dists
    evaluands["EW"] = [distribution_from_dict(f["ew_pool"]) for f in folds]
    evaluands["CM"] = [distribution_from_dict(f["cm_pool"]) for f in folds]
    return score_table(evaluands, truths, scales=scales,
                       brier_scale=brier_scale, aggregation=aggregation,
                       tol=tol)


def run_correlations(seeds) -> ErrorCorrelationMatrix:
    """Correlations between the experts' elicited-median errors."""
    seeds = list(seeds)
    roster = _expert_roster(seeds)
    _require_full_coverage(seeds, roster)
    evaluands = {
        eid: [s.judgment_for(eid).median for s in seeds] for eid in roster
    }
    truths = [s.truth for s in seeds]
    return median_error_correlations(evaluands, truths)


def run_overlay(quantity_id: str, distributions, support=None,
                consensus=None, points: int = OVERLAY_POINTS) -> dict:
    """All densities sampled on one shared grid for plotting.

    ``distributions`` maps a label to a Distribution. The grid spans
    the declared support when it is finite, otherwise the hull of the
    per-distribution 0.1 and 99.9 percent quantiles.
    """
    dists = {str(k): v for k, v in dict(distributions).items()}
    if consensus is not None:
        everything = list(dists.values()) + [consensus]
    else:
        everything = list(dists.values())
    if not everything:
        raise ValidationError("no distributions to overlay")
    if points < 2:
        raise ValidationError("overlay grid needs at least two points")

    lo_s, hi_s = (-math.inf, math.inf) if support is None else support
    if math.isfinite(lo_s) and math.isfinite(hi_s):
        lo, hi = float(lo_s), float(hi_s)
    else:
        lo = min(float(d.quantile(_OVERLAY_TAIL)) for d in everything)
        hi = max(float(d.quantile(1.0 - _OVERLAY_TAIL)) for d in everything)
        lo, hi = max(lo, lo_s), min(hi, hi_s)
    if not lo < hi:
        raise ValidationError("overlay window is degenerate")

    xs = np.linspace(lo, hi, int(points))

    def sampled(d):
        ys = np.asarray(d.pdf(xs), dtype=float)
        # unbounded densities at a support edge would poison the JSON
        return [float(v) if math.isfinite(v) else 0.0 for v in ys]

    doc = {
        "quantity_id": quantity_id,
        "x": [float(v) for v in xs],
        "densities": {eid: sampled(d) for eid, d in dists.items()},
        "consensus": None if consensus is None else sampled(consensus),
    }
    return doc


def run_checks(params, *, total: int = 100, n_draws: int = 10000,
               level: float = 0.9, seed: int = 0) -> dict:
    """Both trial sanity checks from one parameter set.

    Point summaries (cells, sensitivities, the patient grid) use the
    parameter medians; the delayed-positive interval uses the full
    distributions when present. Undefined sensitivities render as null
    rather than failing the whole panel.
    """
    point = params.medians()
    cells = cell_probabilities(point)
    try:
        rt = rt_sensitivity(point.eta, point.psi)
    except UndefinedSensitivityError:
        rt = None
    try:
        et = et_sensitivity(point.eta, point.psi, point.theta1, point.theta2)
    except UndefinedSensitivityError:
        et = None
    sample = patient_sample(point, total)
    delayed = delayed_positive_check(params.eta, params.psi, n_draws=n_draws,
                                     level=level, seed=seed)
    groups = dict(zip(GROUP_ORDER, sample.group_counts()))
    return {
        "parameters": point.to_dict(),
        "cells": cells.to_dict(),
        "rt_sensitivity": rt,
        "et_sensitivity": et,
        "delayed_positive": delayed.to_dict(),
        "patient_sample": {**sample.to_dict(), "group_counts": groups},
    }
