"""HTTP service over the elicitation store and the analysis engine.

Handlers stay thin: they parse the request, call the same runners the
CLI uses, and render through ``canonical_json``, so a given input
produces byte-identical JSON whichever front end asked. All state lives
in the document store; per-session writes serialize via base_version
tokens and everything else is a pure function of the request.

Expert-facing routes never expose seed truths. Routes that read a
stored seed dataset (which embeds the answers) require the shared
facilitator token in the X-Facilitator-Token header.
"""

from __future__ import annotations

import hmac
import io
import json
import math
import os

from fastapi import FastAPI, Request, Response

from priorpool import analysis
from priorpool.errors import (
    ConfigurationError,
    CoverageError,
    DomainError,
    EmptyPoolError,
    FittingError,
    IntegrationError,
    NoCalibratedExpertError,
    NotFoundError,
    PriorPoolError,
    UndefinedCorrelationError,
    UndefinedSensitivityError,
    ValidationError,
    VersionConflictError,
)
from priorpool.fitting import ElicitedJudgment, fit_least_squares
from priorpool.pooling import equal_weights, linear_pool
from priorpool.store import (
    ExpertProfile,
    Quantity,
    SeedDataset,
    SessionStore,
    load_seed_csv,
    new_session,
)
from priorpool.trial import PARAMETER_NAMES, TrialParameters, patient_sample

_ERROR_CODES = (
    (ValidationError, 400, None),  # carries its own code
    (UndefinedSensitivityError, 400, "undefined_sensitivity"),
    (DomainError, 400, "domain"),
    (ConfigurationError, 400, "configuration"),
    (CoverageError, 400, "coverage"),
    (EmptyPoolError, 400, "empty_pool"),
    (NoCalibratedExpertError, 400, "no_calibrated_expert"),
    (FittingError, 400, "fitting"),
    (UndefinedCorrelationError, 400, "undefined_correlation"),
    (NotFoundError, 404, "not_found"),
    (VersionConflictError, 409, "version_conflict"),
    (IntegrationError, 500, "integration"),
)


class _Forbidden(Exception):
    pass


def _json_response(doc, status: int = 200) -> Response:
    return Response(content=analysis.canonical_json(doc),
                    media_type="application/json", status_code=status)


def _error_response(code: str, message: str, status: int,
                    details=None) -> Response:
    return _json_response(
        {"code": code, "message": message, "details": details}, status)


async def _body(request: Request) -> dict:
    try:
        doc = json.loads(await request.body())
    except json.JSONDecodeError as err:
        raise ValidationError(f"request body is not valid JSON: {err}",
                              code="json") from err
    if not isinstance(doc, dict):
        raise ValidationError("request body must be a JSON object",
                              code="json")
    return doc


def _require(body: dict, key: str):
    if key not in body:
        raise ValidationError(f"missing required field {key!r}")
    return body[key]


def _number(value, name: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number") from None
    if not math.isfinite(out):
        raise ValidationError(f"{name} must be finite")
    return out


def _int_query(request: Request, name: str, default: int) -> int:
    raw = request.query_params.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{name} must be an integer") from None


def _float_query(request: Request, name: str, default: float) -> float:
    raw = request.query_params.get(name)
    if raw is None:
        return default
    return _number(raw, name)


def _alpha_value(value):
    if value == "auto":
        return "auto"
    alpha = _number(value, "alpha")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    return alpha


def create_app(data_dir=None, facilitator_token=None) -> FastAPI:
    """Build the application. Arguments default to DATA_DIR and
    FACILITATOR_TOKEN from the environment; with no token configured
    every facilitator route refuses."""
    data_dir = data_dir or os.environ.get("DATA_DIR", "./data")
    if facilitator_token is None:
        facilitator_token = os.environ.get("FACILITATOR_TOKEN")

    app = FastAPI(title="priorpool", docs_url=None, redoc_url=None)
    store = SessionStore(data_dir)

    def gate(request: Request) -> None:
        supplied = request.headers.get("X-Facilitator-Token", "")
        if not facilitator_token or not hmac.compare_digest(
                supplied, facilitator_token):
            raise _Forbidden()

    @app.exception_handler(_Forbidden)
    async def forbidden_handler(request: Request, exc: _Forbidden):
        return _error_response("forbidden",
                               "facilitator token missing or wrong", 403)

    @app.exception_handler(PriorPoolError)
    async def domain_error_handler(request: Request, exc: PriorPoolError):
        for cls, status, code in _ERROR_CODES:
            if isinstance(exc, cls):
                if code is None:
                    code = exc.code
                details = getattr(exc, "details", None)
                if isinstance(exc, VersionConflictError):
                    details = {"expected": exc.expected, "actual": exc.actual}
                return _error_response(code, str(exc), status, details)
        return _error_response("internal", str(exc), 500)

    # ------------------------------------------------------- sessions

    def _load(session_id):
        return store.load_session(session_id)

    def _session_doc(session, version):
        return {"session": session.to_dict(), "version": version}

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await _body(request)
        try:
            quantities = tuple(Quantity.from_dict(q)
                               for q in body.get("quantities", ()))
            experts = tuple(ExpertProfile.from_dict(e)
                            for e in body.get("experts", ()))
        except (KeyError, TypeError) as err:
            raise ValidationError(
                f"bad quantity or expert entry: {err}") from err
        session = new_session(str(_require(body, "session_id")),
                              quantities=quantities, experts=experts)
        version = store.save_session(session)
        return _json_response(_session_doc(session, version), 201)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        session, version = _load(session_id)
        return _json_response(_session_doc(session, version))

    @app.put("/sessions/{session_id}/stage")
    async def put_stage(session_id: str, request: Request):
        body = await _body(request)
        session, version = _load(session_id)
        base = body.get("base_version", version)
        updated = session.with_stage(str(_require(body, "stage")))
        new_version = store.save_session(updated, base_version=base)
        return _json_response(_session_doc(updated, new_version))

    def _judgment_from_body(body, quantity, expert_id):
        values = {k: _number(_require(body, k), k)
                  for k in ("minimum", "q25", "median", "q75", "maximum")}
        return ElicitedJudgment(quantity_id=quantity.quantity_id,
                                expert_id=expert_id,
                                support=quantity.support, **values)

    def _families_from_body(body):
        family = body.get("family", "auto")
        if family == "auto":
            return "auto"
        if isinstance(family, str):
            return [family]
        return list(family)

    @app.put("/sessions/{session_id}/judgments/{expert_id}/{quantity_id}")
    async def put_judgment(session_id: str, expert_id: str, quantity_id: str,
                           request: Request):
        body = await _body(request)
        session, version = _load(session_id)
        quantity = session.quantity_for(quantity_id)
        if quantity is None:
            raise NotFoundError(f"unknown quantity {quantity_id!r}")
        if session.expert_for(expert_id) is None:
            raise NotFoundError(f"unknown expert {expert_id!r}")
        judgment = _judgment_from_body(body, quantity, expert_id)
        fit = fit_least_squares(judgment, _families_from_body(body))
        updated = session.with_judgment(judgment, fit)
        new_version = store.save_session(
            updated, base_version=body.get("base_version", version))
        return _json_response({"fit": fit.to_dict(), "version": new_version})

    @app.put("/sessions/{session_id}/consensus/{quantity_id}")
    async def put_consensus(session_id: str, quantity_id: str,
                            request: Request):
        body = await _body(request)
        session, version = _load(session_id)
        quantity = session.quantity_for(quantity_id)
        if quantity is None:
            raise NotFoundError(f"unknown quantity {quantity_id!r}")
        judgment = _judgment_from_body(body, quantity, "consensus")
        fit = fit_least_squares(judgment, _families_from_body(body))
        updated = session.with_consensus(judgment, fit)
        new_version = store.save_session(
            updated, base_version=body.get("base_version", version))
        return _json_response({"fit": fit.to_dict(), "stage": updated.stage,
                               "version": new_version})

    @app.get("/sessions/{session_id}/overlay/{quantity_id}")
    async def get_overlay(session_id: str, quantity_id: str):
        session, _ = _load(session_id)
        quantity = session.quantity_for(quantity_id)
        if quantity is None:
            raise NotFoundError(f"unknown quantity {quantity_id!r}")
        dists = {}
        for (eid, qid), rec in session.judgments:
            if qid == quantity_id and rec.fit is not None:
                dists[eid] = rec.fit.distribution
        consensus_rec = session.consensus_for(quantity_id)
        consensus = None
        if consensus_rec is not None and consensus_rec.fit is not None:
            consensus = consensus_rec.fit.distribution
        if not dists and consensus is None:
            raise ValidationError(
                f"no fitted judgments for quantity {quantity_id!r}",
                code="no_fits")
        return _json_response(analysis.run_overlay(
            quantity_id, dists, support=quantity.support,
            consensus=consensus))

    # ------------------------------------------------- trial checks

    def _fits_for_quantity(session, quantity_id):
        return {eid: rec.fit.distribution
                for (eid, qid), rec in session.judgments
                if qid == quantity_id and rec.fit is not None}

    def _resolve_distribution(session, source, quantity_id):
        if source == "consensus":
            rec = session.consensus_for(quantity_id)
            return None if rec is None or rec.fit is None \
                else rec.fit.distribution
        if source.startswith("expert:"):
            rec = session.judgment_for(source[len("expert:"):], quantity_id)
            return None if rec is None or rec.fit is None \
                else rec.fit.distribution
        if source == "ew":
            fits = _fits_for_quantity(session, quantity_id)
            if not fits:
                return None
            return linear_pool(fits, equal_weights(sorted(fits)))
        raise ValidationError(
            f"source must be consensus, ew, or expert:<id>, got {source!r}")

    def _resolve_median(session, source, quantity_id):
        # elicited medians, not fitted ones, so a stated 0.5 stays 0.5
        if source == "consensus":
            rec = session.consensus_for(quantity_id)
            return None if rec is None else rec.judgment.median
        if source.startswith("expert:"):
            rec = session.judgment_for(source[len("expert:"):], quantity_id)
            return None if rec is None else rec.judgment.median
        dist = _resolve_distribution(session, source, quantity_id)
        return None if dist is None else float(dist.quantile(0.5))

    def _missing(names, values):
        gone = [n for n, v in zip(names, values) if v is None]
        if gone:
            raise ValidationError(
                "no value available for " + ", ".join(gone),
                code="missing_parameters", details=[{"quantity": n}
                                                    for n in gone])

    @app.get("/sessions/{session_id}/checks/delayed-positive")
    async def get_delayed_positive(session_id: str, request: Request):
        session, _ = _load(session_id)
        source = request.query_params.get("source", "consensus")
        values = []
        for name in ("eta", "psi"):
            raw = request.query_params.get(name)
            if raw is not None:
                values.append(_number(raw, name))
            else:
                values.append(_resolve_distribution(session, source, name))
        _missing(("eta", "psi"), values)
        result = analysis.delayed_positive_check(
            values[0], values[1],
            n_draws=_int_query(request, "draws", 10000),
            level=_float_query(request, "level", 0.9),
            seed=_int_query(request, "seed", 0))
        return _json_response({"source": source, "result": result.to_dict()})

    @app.get("/sessions/{session_id}/checks/patient-sample")
    async def get_patient_sample(session_id: str, request: Request):
        session, _ = _load(session_id)
        source = request.query_params.get("source", "consensus")
        total = _int_query(request, "total", 100)
        values = []
        for name in PARAMETER_NAMES:
            raw = request.query_params.get(name)
            if raw is not None:
                values.append(_number(raw, name))
            else:
                values.append(_resolve_median(session, source, name))
        _missing(PARAMETER_NAMES, values)
        params = TrialParameters(**dict(zip(PARAMETER_NAMES, values)))
        sample = patient_sample(params, total)
        groups = dict(zip(analysis.GROUP_ORDER, sample.group_counts()))
        return _json_response({
            "source": source,
            "parameters": params.to_dict(),
            "sample": {**sample.to_dict(), "group_counts": groups},
        })

    # ---------------------------------------------- pure computation

    @app.post("/pool")
    async def post_pool(request: Request):
        body = await _body(request)
        return _json_response(analysis.run_pool(
            _require(body, "distributions"), body.get("weights"),
            body.get("method", "linear")))

    def _seeds_for(body):
        dataset = store.load_seed_dataset(str(_require(body, "dataset_id")))
        return list(dataset.questions)

    @app.post("/cm/weights")
    async def post_cm_weights(request: Request):
        gate(request)
        body = await _body(request)
        seeds = _seeds_for(body)
        alpha = _alpha_value(body.get("alpha", 0.05))
        if alpha == "auto":
            return _json_response(analysis.run_optimized_weights(seeds))
        return _json_response(analysis.run_cm_weights(seeds, alpha))

    @app.post("/cm/crossval")
    async def post_cm_crossval(request: Request):
        gate(request)
        body = await _body(request)
        seeds = _seeds_for(body)
        alpha = _alpha_value(body.get("alpha", 0.05))
        if alpha == "auto":
            alpha = analysis.run_optimized_weights(seeds)["alpha"]
        return _json_response(analysis.run_crossval(seeds, alpha))

    @app.post("/scores")
    async def post_scores(request: Request):
        body = await _body(request)
        if "dataset_id" in body:
            gate(request)
            seeds = _seeds_for(body)
            table = analysis.run_scores(_require(body, "folds"), seeds)
        else:
            evaluands = {
                str(eid): [analysis.distribution_from_dict(d) for d in dists]
                for eid, dists in _require(body, "evaluands").items()
            }
            table = analysis.score_table(
                evaluands, _require(body, "truths"),
                scales=body.get("scales"))
        return _json_response(table.to_dict())

    @app.post("/scores/correlations")
    async def post_correlations(request: Request):
        body = await _body(request)
        if "dataset_id" in body:
            gate(request)
            corr = analysis.run_correlations(_seeds_for(body))
        else:
            corr = analysis.median_error_correlations(
                _require(body, "evaluands"), _require(body, "truths"))
        return _json_response(corr.to_dict())

    # ---------------------------------------------------- seed data

    @app.post("/seed-datasets")
    async def post_seed_dataset(request: Request):
        gate(request)
        body = await _body(request)
        if "csv" in body:
            dataset = load_seed_csv(io.StringIO(_require(body, "csv")),
                                    dataset_id=str(_require(body,
                                                            "dataset_id")))
        else:
            try:
                dataset = SeedDataset.from_dict(body)
            except (KeyError, TypeError) as err:
                raise ValidationError(
                    f"bad seed dataset document: {err}") from err
        store.save_seed_dataset(dataset)
        return _json_response({"dataset_id": dataset.dataset_id,
                               "question_count": len(dataset.questions)},
                              201)

    @app.get("/seed-datasets/{dataset_id}/questions")
    async def get_seed_questions(dataset_id: str):
        dataset = store.load_seed_dataset(dataset_id)
        return _json_response(dataset.expert_view())

    @app.get("/seed-datasets/{dataset_id}")
    async def get_seed_dataset(dataset_id: str, request: Request):
        gate(request)
        dataset = store.load_seed_dataset(dataset_id)
        return _json_response(dataset.to_dict())

    return app
