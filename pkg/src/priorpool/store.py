"""Versioned session records, seed dataset ingestion, and JSON schemas.

Sessions persist as a directory of JSON documents, one file per version,
so every historical state stays readable and auditable. Writes are
optimistic: the caller passes the version it loaded, and the save fails
with a conflict if another writer got there first. Seed datasets are
immutable single documents.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
import tempfile
import zipfile
from collections.abc import Mapping
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path

from priorpool.classical import SCALES, SeedQuestion
from priorpool.errors import (
    NotFoundError,
    ValidationError,
    VersionConflictError,
)
from priorpool.fitting import (
    ElicitedJudgment,
    FitResult,
    _support_from_json,
    _support_to_json,
)

STAGES = ("setup", "training", "background", "individual", "review_checks",
          "group_discussion", "consensus", "feedback", "closed")

# ids double as file and directory names
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")

SCHEMA_NAMES = ("session", "judgment", "fit", "seed_dataset")


def stage_index(stage: str) -> int:
    try:
        return STAGES.index(stage)
    except ValueError:
        raise ValidationError(f"unknown stage {stage!r}", code="stage") from None


def utc_now() -> str:
    """Current time as an RFC 3339 string with an explicit UTC offset."""
    return datetime.now(timezone.utc).isoformat()


def _parse_timestamp(text):
    if isinstance(text, str):
        normalized = text[:-1] + "+00:00" if text.endswith("Z") else text
        try:
            parsed = datetime.fromisoformat(normalized)
        except ValueError:
            parsed = None
    else:
        parsed = None
    if parsed is None:
        raise ValidationError(f"timestamp {text!r} is not RFC 3339",
                              code="timestamp")
    if parsed.tzinfo is None:
        raise ValidationError(f"timestamp {text!r} lacks a UTC offset",
                              code="timestamp")
    return parsed


def _next_timestamp(last: str | None) -> str:
    # consecutive events may land on the same clock tick; nudge forward
    # so the audit log stays strictly monotone
    now = utc_now()
    if last is not None:
        prev = _parse_timestamp(last)
        if _parse_timestamp(now) <= prev:
            return (prev + timedelta(microseconds=1)).isoformat()
    return now


def _validate_id(value, label):
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise ValidationError(
            f"{label} must match {_ID_RE.pattern} (got {value!r})",
            code=label)


@dataclass(frozen=True)
class Quantity:
    """A quantity of interest with its declared support and scale."""

    quantity_id: str
    support: tuple[float, float]
    scale: str = "linear"
    text: str = ""

    def __post_init__(self):
        _validate_id(self.quantity_id, "quantity_id")
        lo, hi = self.support
        object.__setattr__(self, "support", (float(lo), float(hi)))
        if self.scale not in SCALES:
            raise ValidationError(f"unknown scale {self.scale!r}", code="scale")
        lo, hi = self.support
        if not lo < hi:
            raise ValidationError("support must be a nonempty interval",
                                  code="support")
        if self.scale == "log" and lo < 0:
            raise ValidationError(
                "log-scale quantities need nonnegative support", code="support")

    def to_dict(self):
        return {"quantity_id": self.quantity_id,
                "support": _support_to_json(self.support),
                "scale": self.scale, "text": self.text}

    @classmethod
    def from_dict(cls, doc):
        return cls(quantity_id=doc["quantity_id"],
                   support=_support_from_json(doc["support"]),
                   scale=doc.get("scale", "linear"),
                   text=doc.get("text", ""))


@dataclass(frozen=True)
class ExpertProfile:
    """An expert with their self-assessed knowledge and experience."""

    expert_id: str
    name: str = ""
    knowledge_ratings: tuple[tuple[str, float], ...] = ()
    strengths: str = ""
    weaknesses: str = ""

    def __post_init__(self):
        _validate_id(self.expert_id, "expert_id")
        ratings = self.knowledge_ratings
        if isinstance(ratings, Mapping):
            ratings = tuple((k, float(v)) for k, v in ratings.items())
        else:
            ratings = tuple((k, float(v)) for k, v in ratings)
        object.__setattr__(self, "knowledge_ratings", ratings)
        for topic, rating in ratings:
            if not topic:
                raise ValidationError("rating topic must be nonempty")
            if not 1.0 <= rating <= 5.0:
                raise ValidationError(
                    f"knowledge rating for {topic!r} must be in [1, 5], "
                    f"got {rating}")

    def to_dict(self):
        return {"expert_id": self.expert_id, "name": self.name,
                "knowledge_ratings": dict(self.knowledge_ratings),
                "strengths": self.strengths, "weaknesses": self.weaknesses}

    @classmethod
    def from_dict(cls, doc):
        return cls(expert_id=doc["expert_id"], name=doc.get("name", ""),
                   knowledge_ratings=doc.get("knowledge_ratings", ()),
                   strengths=doc.get("strengths", ""),
                   weaknesses=doc.get("weaknesses", ""))


@dataclass(frozen=True)
class AuditEvent:
    """One append-only log entry; timestamps are RFC 3339 UTC."""

    timestamp: str
    event: str
    details: dict | None = None

    def __post_init__(self):
        _parse_timestamp(self.timestamp)
        if not self.event or not isinstance(self.event, str):
            raise ValidationError("audit event name must be nonempty")
        if self.details is not None:
            if not isinstance(self.details, Mapping):
                raise ValidationError("audit details must be an object or null")
            object.__setattr__(self, "details", dict(self.details))

    def to_dict(self):
        return {"timestamp": self.timestamp, "event": self.event,
                "details": self.details}

    @classmethod
    def from_dict(cls, doc):
        return cls(timestamp=doc["timestamp"], event=doc["event"],
                   details=doc.get("details"))


@dataclass(frozen=True)
class JudgmentRecord:
    """An elicited judgment together with the fit chosen for it."""

    judgment: ElicitedJudgment
    fit: FitResult | None = None

    def __post_init__(self):
        if not isinstance(self.judgment, ElicitedJudgment):
            raise ValidationError("judgment must be an ElicitedJudgment")
        if self.fit is not None and not isinstance(self.fit, FitResult):
            raise ValidationError("fit must be a FitResult or None")

    def to_dict(self):
        return {"judgment": self.judgment.to_dict(),
                "fit": None if self.fit is None else self.fit.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        fit = doc.get("fit")
        return cls(judgment=ElicitedJudgment.from_dict(doc["judgment"]),
                   fit=None if fit is None else FitResult.from_dict(fit))


def _freeze_judgments(value):
    items = value.items() if isinstance(value, Mapping) else value
    out = []
    for key, rec in items:
        key = tuple(key)
        if len(key) != 2 or not all(isinstance(k, str) for k in key):
            raise ValidationError(
                "judgment keys must be (expert_id, quantity_id) pairs")
        out.append((key, rec))
    return tuple(out)


def _freeze_consensus(value):
    items = value.items() if isinstance(value, Mapping) else value
    return tuple((key, rec) for key, rec in items)


@dataclass(frozen=True)
class ElicitationSession:
    """Full state of one elicitation workshop.

    The stage only ever moves forward through ``STAGES``; helpers that
    mutate state return a new session with an audit entry appended.
    """

    session_id: str
    stage: str = "setup"
    quantities: tuple[Quantity, ...] = ()
    experts: tuple[ExpertProfile, ...] = ()
    judgments: tuple[tuple[tuple[str, str], JudgmentRecord], ...] = ()
    consensus: tuple[tuple[str, JudgmentRecord], ...] = ()
    audit_log: tuple[AuditEvent, ...] = ()

    def __post_init__(self):
        _validate_id(self.session_id, "session_id")
        stage_index(self.stage)
        object.__setattr__(self, "quantities", tuple(self.quantities))
        object.__setattr__(self, "experts", tuple(self.experts))
        object.__setattr__(self, "judgments", _freeze_judgments(self.judgments))
        object.__setattr__(self, "consensus", _freeze_consensus(self.consensus))
        object.__setattr__(self, "audit_log", tuple(self.audit_log))

        quantity_ids = [q.quantity_id for q in self.quantities]
        if len(set(quantity_ids)) != len(quantity_ids):
            raise ValidationError("quantity ids must be unique")
        expert_ids = [e.expert_id for e in self.experts]
        if len(set(expert_ids)) != len(expert_ids):
            raise ValidationError("expert ids must be unique")

        seen = set()
        for (eid, qid), rec in self.judgments:
            if not isinstance(rec, JudgmentRecord):
                raise ValidationError("judgment entries must be JudgmentRecords")
            if (eid, qid) in seen:
                raise ValidationError(f"duplicate judgment key ({eid}, {qid})")
            seen.add((eid, qid))
            if eid not in expert_ids:
                raise ValidationError(
                    f"judgment references unknown expert {eid!r}")
            if qid not in quantity_ids:
                raise ValidationError(
                    f"judgment references unknown quantity {qid!r}")
            if rec.judgment.expert_id != eid or rec.judgment.quantity_id != qid:
                raise ValidationError(
                    f"judgment under key ({eid}, {qid}) is labeled "
                    f"({rec.judgment.expert_id}, {rec.judgment.quantity_id})")
            self._check_values_fit(qid, rec.judgment)

        seen_consensus = set()
        for qid, rec in self.consensus:
            if not isinstance(rec, JudgmentRecord):
                raise ValidationError("consensus entries must be JudgmentRecords")
            if qid in seen_consensus:
                raise ValidationError(f"duplicate consensus for {qid!r}")
            seen_consensus.add(qid)
            if qid not in quantity_ids:
                raise ValidationError(
                    f"consensus references unknown quantity {qid!r}")
            if rec.judgment.quantity_id != qid:
                raise ValidationError(
                    f"consensus under {qid!r} is labeled "
                    f"{rec.judgment.quantity_id!r}")
            self._check_values_fit(qid, rec.judgment)
        if self.consensus and stage_index(self.stage) < stage_index("consensus"):
            raise ValidationError(
                f"consensus recorded while stage is {self.stage!r}; the "
                "stage must be at least 'consensus'", code="stage")

        prev = None
        for ev in self.audit_log:
            if not isinstance(ev, AuditEvent):
                raise ValidationError("audit_log entries must be AuditEvents")
            t = _parse_timestamp(ev.timestamp)
            if prev is not None and t <= prev:
                raise ValidationError(
                    "audit log timestamps must strictly increase",
                    code="audit")
            prev = t

    def _check_values_fit(self, quantity_id, judgment):
        lo, hi = self.quantity_for(quantity_id).support
        if judgment.minimum < lo or judgment.maximum > hi:
            raise ValidationError(
                f"judgment values for {quantity_id!r} fall outside the "
                f"quantity support [{lo}, {hi}]", code="support")

    # ------------------------------------------------------------ lookup

    def quantity_for(self, quantity_id):
        for q in self.quantities:
            if q.quantity_id == quantity_id:
                return q
        return None

    def expert_for(self, expert_id):
        for e in self.experts:
            if e.expert_id == expert_id:
                return e
        return None

    def judgment_for(self, expert_id, quantity_id):
        for key, rec in self.judgments:
            if key == (expert_id, quantity_id):
                return rec
        return None

    def consensus_for(self, quantity_id):
        for qid, rec in self.consensus:
            if qid == quantity_id:
                return rec
        return None

    # ------------------------------------------------------- transitions

    def _appended(self, events):
        log = list(self.audit_log)
        last = log[-1].timestamp if log else None
        for event, details in events:
            stamp = _next_timestamp(last)
            log.append(AuditEvent(stamp, event, details))
            last = stamp
        return tuple(log)

    def _reject_closed(self):
        if self.stage == "closed":
            raise ValidationError("session is closed; no further edits",
                                  code="stage")

    def with_stage(self, stage):
        """Move the stage forward; backwards transitions are invalid."""
        target = stage_index(stage)
        current = stage_index(self.stage)
        if target == current:
            return self
        if target < current:
            raise ValidationError(
                f"stage may not move backwards from {self.stage!r} to "
                f"{stage!r}", code="stage_transition")
        log = self._appended([("stage_changed",
                               {"from": self.stage, "to": stage})])
        return replace(self, stage=stage, audit_log=log)

    def with_judgment(self, judgment, fit=None):
        """Record or replace one expert's judgment for one quantity."""
        self._reject_closed()
        key = (judgment.expert_id, judgment.quantity_id)
        rec = JudgmentRecord(judgment, fit)
        entries = [(k, r) for k, r in self.judgments if k != key]
        entries.append((key, rec))
        log = self._appended([("judgment_recorded",
                               {"expert_id": key[0], "quantity_id": key[1]})])
        return replace(self, judgments=tuple(entries), audit_log=log)

    def with_consensus(self, judgment, fit=None):
        """Record the group consensus for one quantity.

        Requires the discussion to have started; the first consensus
        moves the session into the feedback stage.
        """
        self._reject_closed()
        if stage_index(self.stage) < stage_index("group_discussion"):
            raise ValidationError(
                f"consensus entry requires the group_discussion stage; "
                f"session is at {self.stage!r}", code="stage")
        qid = judgment.quantity_id
        rec = JudgmentRecord(judgment, fit)
        entries = [(k, r) for k, r in self.consensus if k != qid]
        entries.append((qid, rec))
        events = [("consensus_recorded", {"quantity_id": qid})]
        stage = self.stage
        if stage_index(stage) < stage_index("feedback"):
            events.append(("stage_changed", {"from": stage, "to": "feedback"}))
            stage = "feedback"
        log = self._appended(events)
        return replace(self, stage=stage, consensus=tuple(entries),
                       audit_log=log)

    def with_event(self, event, details=None):
        return replace(self, audit_log=self._appended([(event, details)]))

    # ----------------------------------------------------- serialization

    def to_dict(self):
        return {
            "session_id": self.session_id,
            "stage": self.stage,
            "quantities": [q.to_dict() for q in self.quantities],
            "experts": [e.to_dict() for e in self.experts],
            "judgments": [rec.to_dict() for _, rec in self.judgments],
            "consensus": [rec.to_dict() for _, rec in self.consensus],
            "audit_log": [ev.to_dict() for ev in self.audit_log],
        }

    @classmethod
    def from_dict(cls, doc):
        judgments = []
        for item in doc.get("judgments", ()):
            rec = JudgmentRecord.from_dict(item)
            judgments.append(((rec.judgment.expert_id,
                               rec.judgment.quantity_id), rec))
        consensus = []
        for item in doc.get("consensus", ()):
            rec = JudgmentRecord.from_dict(item)
            consensus.append((rec.judgment.quantity_id, rec))
        return cls(
            session_id=doc["session_id"],
            stage=doc.get("stage", "setup"),
            quantities=tuple(Quantity.from_dict(q)
                             for q in doc.get("quantities", ())),
            experts=tuple(ExpertProfile.from_dict(e)
                          for e in doc.get("experts", ())),
            judgments=judgments,
            consensus=consensus,
            audit_log=tuple(AuditEvent.from_dict(ev)
                            for ev in doc.get("audit_log", ())),
        )


def new_session(session_id, quantities=(), experts=()):
    """A fresh session at the setup stage with a creation audit entry."""
    return ElicitationSession(
        session_id=session_id, stage="setup",
        quantities=quantities, experts=experts,
        audit_log=(AuditEvent(utc_now(), "session_created",
                              {"stage": "setup"}),))


def stage_history(session) -> tuple[str, ...]:
    """Replay the audit log into the sequence of stages visited."""
    history = []
    for ev in session.audit_log:
        if ev.event == "session_created" and ev.details:
            history.append(ev.details.get("stage", STAGES[0]))
        elif ev.event == "stage_changed" and ev.details and "to" in ev.details:
            history.append(ev.details["to"])
    if not history:
        return (session.stage,)
    return tuple(history)


# -------------------------------------------------------------- datasets

@dataclass(frozen=True)
class SeedDataset:
    """A set of seed questions whose truths stay facilitator-only."""

    dataset_id: str
    questions: tuple[SeedQuestion, ...] = ()

    def __post_init__(self):
        _validate_id(self.dataset_id, "dataset_id")
        object.__setattr__(self, "questions", tuple(self.questions))
        ids = [q.question_id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise ValidationError("question ids must be unique")

    def to_dict(self):
        return {"dataset_id": self.dataset_id,
                "questions": [q.to_dict() for q in self.questions]}

    @classmethod
    def from_dict(cls, doc):
        return cls(dataset_id=doc["dataset_id"],
                   questions=tuple(SeedQuestion.from_dict(q)
                                   for q in doc.get("questions", ())))

    def expert_view(self):
        """Serialized dataset with every truth removed."""
        questions = []
        for q in self.questions:
            doc = q.to_dict()
            del doc["truth"]
            questions.append(doc)
        return {"dataset_id": self.dataset_id, "questions": questions}


_CSV_COLUMNS = ("question_id", "expert_id", "min", "q25", "median",
                "q75", "max", "truth", "scale")
_CSV_NUMERIC = ("min", "q25", "median", "q75", "max", "truth")


def _slug(stem):
    cleaned = re.sub(r"[^A-Za-z0-9._-]+", "-", stem)
    cleaned = re.sub(r"^[^A-Za-z0-9]+", "", cleaned).rstrip("-._")
    return cleaned[:64] or "seed-dataset"


def load_seed_csv(source, *, dataset_id=None) -> SeedDataset:
    """Parse a seed question CSV into a SeedDataset.

    ``source`` is a path or an open text stream. Columns: question_id,
    expert_id, min, q25, median, q75, max, truth, scale; header row
    required, "." as the decimal separator. All row problems are
    collected and reported together with their line numbers.
    """
    if hasattr(source, "read"):
        return _parse_seed_csv(source, dataset_id or "seed-dataset")
    path = Path(source)
    with open(path, encoding="utf-8", newline="") as fh:
        return _parse_seed_csv(fh, dataset_id or _slug(path.stem))


def _csv_error(errors, line, message):
    errors.append({"line": line, "message": message})


def _raise_csv_errors(errors):
    parts = [f"line {e['line']}: {e['message']}" if e["line"] else e["message"]
             for e in errors]
    raise ValidationError("seed CSV invalid: " + "; ".join(parts),
                          code="seed_csv", details=errors)


def _parse_seed_csv(stream, dataset_id):
    reader = csv.DictReader(stream, restkey="_extra", restval=None)
    if reader.fieldnames is None:
        raise ValidationError("seed CSV is empty", code="seed_csv")
    missing = [c for c in _CSV_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ValidationError(f"seed CSV is missing columns {missing}",
                              code="seed_csv",
                              details=[{"line": 1,
                                        "message": f"missing columns {missing}"}])
    errors = []
    rows = []
    for row in reader:
        line = reader.line_num
        if row.get("_extra"):
            _csv_error(errors, line, "row has more fields than the header")
            continue
        if any(row.get(c) is None for c in _CSV_COLUMNS):
            _csv_error(errors, line, "row has fewer fields than the header")
            continue
        qid = row["question_id"].strip()
        eid = row["expert_id"].strip()
        if not qid or not eid:
            _csv_error(errors, line,
                       "question_id and expert_id must be nonempty")
            continue
        numbers = {}
        bad = False
        for col in _CSV_NUMERIC:
            cell = row[col].strip()
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                _csv_error(errors, line,
                           f"column {col!r} is not a finite number: {cell!r}")
                bad = True
                continue
            numbers[col] = value
        scale = row["scale"].strip()
        if scale not in SCALES:
            _csv_error(errors, line, f"unknown scale {scale!r}")
            bad = True
        if bad:
            continue
        if scale == "log":
            if numbers["min"] <= 0:
                _csv_error(errors, line,
                           "log-scale judgment values must be positive")
                continue
            if numbers["truth"] <= 0:
                _csv_error(errors, line, "log-scale truth must be positive")
                continue
        rows.append((line, qid, eid, numbers, scale))

    by_question = {}
    for line, qid, eid, numbers, scale in rows:
        entry = by_question.setdefault(
            qid, {"line": line, "truth": numbers["truth"], "scale": scale,
                  "experts": {}, "judgments": []})
        if eid in entry["experts"]:
            _csv_error(errors, line,
                       f"duplicate judgment for question {qid!r} and expert "
                       f"{eid!r}; first at line {entry['experts'][eid]}")
            continue
        entry["experts"][eid] = line
        if numbers["truth"] != entry["truth"]:
            _csv_error(errors, line,
                       f"truth {numbers['truth']} differs from "
                       f"{entry['truth']} given at line {entry['line']}")
            continue
        if scale != entry["scale"]:
            _csv_error(errors, line,
                       f"scale {scale!r} differs from {entry['scale']!r} "
                       f"given at line {entry['line']}")
            continue
        support = (0.0, math.inf) if scale == "log" else (-math.inf, math.inf)
        try:
            judgment = ElicitedJudgment(
                quantity_id=qid, expert_id=eid,
                minimum=numbers["min"], q25=numbers["q25"],
                median=numbers["median"], q75=numbers["q75"],
                maximum=numbers["max"], support=support)
        except ValidationError as exc:
            _csv_error(errors, line, str(exc))
            continue
        entry["judgments"].append(judgment)

    if errors:
        _raise_csv_errors(errors)
    if not rows:
        raise ValidationError("seed CSV contains no data rows",
                              code="seed_csv")

    questions = []
    for qid, entry in by_question.items():
        try:
            questions.append(SeedQuestion(
                question_id=qid, judgments=tuple(entry["judgments"]),
                truth=entry["truth"], scale=entry["scale"]))
        except ValidationError as exc:
            _csv_error(errors, entry["line"], str(exc))
    if errors:
        _raise_csv_errors(errors)
    return SeedDataset(dataset_id=dataset_id, questions=tuple(questions))


# ----------------------------------------------------------------- store

def _dumps(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _write_exclusive(path: Path, payload: bytes) -> bool:
    """Atomically create path with payload; False if it already exists.

    The payload lands in a temp file first, then os.link claims the
    final name, so a reader can never observe a partial document and
    two writers can never both win.
    """
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        try:
            os.link(tmp, path)
        except FileExistsError:
            return False
        return True
    finally:
        os.unlink(tmp)


class SessionStore:
    """Directory-backed store with one JSON file per session version."""

    def __init__(self, root):
        self.root = Path(root)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)
        (self.root / "seed_datasets").mkdir(parents=True, exist_ok=True)

    def _session_dir(self, session_id) -> Path:
        _validate_id(session_id, "session_id")
        return self.root / "sessions" / session_id

    @staticmethod
    def _version_path(sdir: Path, version: int) -> Path:
        return sdir / f"v{version:07d}.json"

    @staticmethod
    def _version_numbers(sdir: Path) -> tuple[int, ...]:
        if not sdir.is_dir():
            return ()
        out = []
        for path in sdir.glob("v*.json"):
            try:
                out.append(int(path.stem[1:]))
            except ValueError:
                continue
        return tuple(sorted(out))

    def _read_version(self, sdir: Path, version: int) -> ElicitationSession:
        doc = json.loads(self._version_path(sdir, version)
                         .read_text(encoding="utf-8"))
        return ElicitationSession.from_dict(doc)

    # ----------------------------------------------------------- sessions

    def save_session(self, session, *, base_version=None) -> int:
        """Persist a new version; returns the version token.

        ``base_version`` is the version the caller loaded (None when
        creating). A mismatch with the stored latest raises a conflict.
        """
        sdir = self._session_dir(session.session_id)
        existing = self._version_numbers(sdir)
        latest = existing[-1] if existing else 0
        base = 0 if base_version is None else int(base_version)
        if base != latest:
            raise VersionConflictError(
                f"session {session.session_id!r} is at version {latest}; "
                f"save was based on {base}", expected=latest, actual=base)
        if latest:
            prior = self._read_version(sdir, latest)
            if stage_index(session.stage) < stage_index(prior.stage):
                raise ValidationError(
                    f"stage may not move backwards from {prior.stage!r} "
                    f"to {session.stage!r}", code="stage_transition")
        sdir.mkdir(parents=True, exist_ok=True)
        version = latest + 1
        if not _write_exclusive(self._version_path(sdir, version),
                                _dumps(session.to_dict())):
            moved = self._version_numbers(sdir)
            raise VersionConflictError(
                f"session {session.session_id!r} advanced to version "
                f"{moved[-1]} during save", expected=moved[-1], actual=base)
        return version

    def load_session(self, session_id):
        """Latest version of a session as (session, version)."""
        sdir = self._session_dir(session_id)
        numbers = self._version_numbers(sdir)
        if not numbers:
            raise NotFoundError(f"no session {session_id!r}")
        return self._read_version(sdir, numbers[-1]), numbers[-1]

    def load_version(self, session_id, version) -> ElicitationSession:
        sdir = self._session_dir(session_id)
        if int(version) not in self._version_numbers(sdir):
            raise NotFoundError(
                f"no version {version} of session {session_id!r}")
        return self._read_version(sdir, int(version))

    def versions(self, session_id) -> tuple[int, ...]:
        return self._version_numbers(self._session_dir(session_id))

    def list_sessions(self) -> tuple[str, ...]:
        base = self.root / "sessions"
        out = [p.name for p in base.iterdir()
               if p.is_dir() and self._version_numbers(p)]
        return tuple(sorted(out))

    # ------------------------------------------------------ seed datasets

    def _dataset_path(self, dataset_id) -> Path:
        _validate_id(dataset_id, "dataset_id")
        return self.root / "seed_datasets" / f"{dataset_id}.json"

    def save_seed_dataset(self, dataset) -> None:
        path = self._dataset_path(dataset.dataset_id)
        if not _write_exclusive(path, _dumps(dataset.to_dict())):
            raise VersionConflictError(
                f"seed dataset {dataset.dataset_id!r} is already stored")

    def load_seed_dataset(self, dataset_id) -> SeedDataset:
        path = self._dataset_path(dataset_id)
        if not path.is_file():
            raise NotFoundError(f"no seed dataset {dataset_id!r}")
        return SeedDataset.from_dict(
            json.loads(path.read_text(encoding="utf-8")))

    def list_seed_datasets(self) -> tuple[str, ...]:
        base = self.root / "seed_datasets"
        return tuple(sorted(p.stem for p in base.glob("*.json")))

    # ------------------------------------------------------------ export

    def export_bundle(self, session_id, out_path, *, tables=None) -> Path:
        """Archive every stored version plus optional CSV score tables."""
        sdir = self._session_dir(session_id)
        numbers = self._version_numbers(sdir)
        if not numbers:
            raise NotFoundError(f"no session {session_id!r}")
        out_path = Path(out_path)
        with zipfile.ZipFile(out_path, "w", zipfile.ZIP_DEFLATED) as z:
            for version in numbers:
                path = self._version_path(sdir, version)
                z.writestr(f"session/{session_id}/{path.name}",
                           path.read_bytes())
            for name, table in (tables or {}).items():
                z.writestr(f"scores/{name}.csv", table.to_csv())
        return out_path


# ---------------------------------------------------------------- schemas

def load_schema(name: str) -> dict:
    """One of the shipped JSON document schemas by short name."""
    if name not in SCHEMA_NAMES:
        raise NotFoundError(f"no schema {name!r}; have {SCHEMA_NAMES}")
    text = (resources.files("priorpool").joinpath("schemas")
            .joinpath(f"{name}.schema.json").read_text(encoding="utf-8"))
    return json.loads(text)
