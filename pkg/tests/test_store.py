"""Session records, the versioned store, and seed CSV ingestion."""

import copy
import io
import json
import math
import threading
import zipfile
from dataclasses import replace
from datetime import datetime, timedelta, timezone

import jsonschema
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from priorpool.distributions import Mixture, Normal, Tabulated
from priorpool.errors import (
    NotFoundError,
    ValidationError,
    VersionConflictError,
)
from priorpool.fitting import ElicitedJudgment, FitResult
from priorpool.scoring import ScoreRow, ScoreTable
from priorpool.store import (
    STAGES,
    AuditEvent,
    ElicitationSession,
    ExpertProfile,
    JudgmentRecord,
    Quantity,
    SeedDataset,
    SessionStore,
    load_schema,
    load_seed_csv,
    new_session,
    stage_history,
    stage_index,
    utc_now,
)


def ts(i=0):
    base = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)
    return (base + timedelta(seconds=i)).isoformat()


def make_quantities():
    return (
        Quantity("eta", (0.0, 1.0), scale="linear", text="prevalence"),
        Quantity("delay", (0.0, math.inf), scale="log", text="months to onset"),
    )


def make_experts():
    return (
        ExpertProfile("e1", name="Expert One",
                      knowledge_ratings=(("disease", 4.0), ("test", 5.0)),
                      strengths="research expertise",
                      weaknesses="distance from clinical care"),
        ExpertProfile("e2", knowledge_ratings=(("disease", 3.5),)),
    )


def make_judgment(expert="e1", quantity="eta",
                  values=(0.1, 0.2, 0.3, 0.4, 0.5), support=(0.0, 1.0)):
    lo, q25, med, q75, hi = values
    return ElicitedJudgment(quantity_id=quantity, expert_id=expert,
                            minimum=lo, q25=q25, median=med, q75=q75,
                            maximum=hi, support=support)


def make_fit():
    return FitResult(distribution=Normal(mu=0.3, sigma=0.12), sse=2.5e-4,
                     family_candidates=(("normal", 2.5e-4), ("beta", 3.1e-4)))


def make_session(stage="individual", consensus=(), judgments=None):
    if judgments is None:
        judgments = {("e1", "eta"): JudgmentRecord(make_judgment(), make_fit())}
    return ElicitationSession(
        session_id="s1", stage=stage,
        quantities=make_quantities(), experts=make_experts(),
        judgments=judgments, consensus=consensus,
        audit_log=(AuditEvent(ts(0), "session_created", {"stage": "setup"}),
                   AuditEvent(ts(1), "stage_changed",
                              {"from": "setup", "to": stage})))


# ---------------------------------------------------------------- types

class TestQuantity:
    def test_fields(self):
        q = Quantity("eta", (0.0, 1.0), scale="linear", text="prevalence")
        assert q.support == (0.0, 1.0)
        assert q.scale == "linear"

    def test_default_scale_is_linear(self):
        assert Quantity("x", (0.0, 1.0)).scale == "linear"

    def test_unknown_scale_rejected(self):
        with pytest.raises(ValidationError):
            Quantity("x", (0.0, 1.0), scale="decibel")

    def test_empty_support_rejected(self):
        with pytest.raises(ValidationError):
            Quantity("x", (1.0, 1.0))

    def test_log_scale_requires_nonnegative_support(self):
        with pytest.raises(ValidationError):
            Quantity("x", (-1.0, 1.0), scale="log")

    def test_empty_id_rejected(self):
        with pytest.raises(ValidationError):
            Quantity("", (0.0, 1.0))

    def test_roundtrip(self):
        q = Quantity("delay", (0.0, math.inf), scale="log", text="months")
        assert Quantity.from_dict(q.to_dict()) == q

    def test_roundtrip_unbounded(self):
        q = Quantity("shift", (-math.inf, math.inf))
        doc = json.loads(json.dumps(q.to_dict()))
        assert Quantity.from_dict(doc) == q


class TestExpertProfile:
    def test_ratings_accept_mapping(self):
        p = ExpertProfile("e1", knowledge_ratings={"disease": 4.0, "rt": 5.0})
        assert p.knowledge_ratings == (("disease", 4.0), ("rt", 5.0))

    def test_rating_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            ExpertProfile("e1", knowledge_ratings={"disease": 5.5})
        with pytest.raises(ValidationError):
            ExpertProfile("e1", knowledge_ratings={"disease": 0.5})

    def test_empty_id_rejected(self):
        with pytest.raises(ValidationError):
            ExpertProfile("")

    def test_roundtrip(self):
        p = make_experts()[0]
        assert ExpertProfile.from_dict(json.loads(json.dumps(p.to_dict()))) == p


class TestAuditEvent:
    def test_fields(self):
        e = AuditEvent(ts(0), "note", {"text": "hello"})
        assert e.event == "note"

    def test_timestamp_must_parse(self):
        with pytest.raises(ValidationError):
            AuditEvent("yesterday", "note")

    def test_timestamp_requires_offset(self):
        with pytest.raises(ValidationError):
            AuditEvent("2026-03-01T12:00:00", "note")

    def test_zulu_suffix_accepted(self):
        AuditEvent("2026-03-01T12:00:00Z", "note")

    def test_empty_event_rejected(self):
        with pytest.raises(ValidationError):
            AuditEvent(ts(0), "")

    def test_roundtrip(self):
        e = AuditEvent(ts(3), "stage_changed", {"from": "setup", "to": "training"})
        assert AuditEvent.from_dict(json.loads(json.dumps(e.to_dict()))) == e

    def test_utc_now_parses(self):
        AuditEvent(utc_now(), "note")


# -------------------------------------------------------------- session

class TestSessionValidation:
    def test_valid_session(self):
        s = make_session()
        assert s.stage == "individual"
        assert s.judgment_for("e1", "eta") is not None

    def test_stage_order(self):
        assert STAGES == ("setup", "training", "background", "individual",
                          "review_checks", "group_discussion", "consensus",
                          "feedback", "closed")
        assert stage_index("setup") == 0
        assert stage_index("closed") == 8

    def test_unknown_stage(self):
        with pytest.raises(ValidationError):
            make_session(stage="negotiation")

    def test_bad_session_id(self):
        for bad in ("", "a/b", "../up", ".hidden"):
            with pytest.raises(ValidationError):
                ElicitationSession(session_id=bad)

    def test_duplicate_quantity_ids(self):
        with pytest.raises(ValidationError):
            ElicitationSession(session_id="s1",
                               quantities=(Quantity("x", (0, 1)),
                                           Quantity("x", (0, 2))))

    def test_duplicate_expert_ids(self):
        with pytest.raises(ValidationError):
            ElicitationSession(session_id="s1",
                               experts=(ExpertProfile("e1"),
                                        ExpertProfile("e1")))

    def test_judgment_for_unknown_expert(self):
        rec = JudgmentRecord(make_judgment(expert="ghost"))
        with pytest.raises(ValidationError):
            make_session(judgments={("ghost", "eta"): rec})

    def test_judgment_for_unknown_quantity(self):
        rec = JudgmentRecord(make_judgment(quantity="ghost", support=(0, 1)))
        with pytest.raises(ValidationError):
            make_session(judgments={("e1", "ghost"): rec})

    def test_judgment_key_must_match_record(self):
        rec = JudgmentRecord(make_judgment(expert="e2"))
        with pytest.raises(ValidationError):
            make_session(judgments={("e1", "eta"): rec})

    def test_judgment_values_must_fit_quantity_support(self):
        j = make_judgment(values=(0.1, 0.5, 1.5, 2.0, 2.5), support=(0.0, 3.0))
        with pytest.raises(ValidationError, match="support"):
            make_session(judgments={("e1", "eta"): JudgmentRecord(j)})

    def test_consensus_for_unknown_quantity(self):
        rec = JudgmentRecord(make_judgment(expert="RIO", quantity="ghost",
                                           support=(0, 1)))
        with pytest.raises(ValidationError):
            make_session(stage="consensus", consensus={"ghost": rec})

    def test_consensus_requires_consensus_stage(self):
        rec = JudgmentRecord(make_judgment(expert="RIO"))
        with pytest.raises(ValidationError, match="stage"):
            make_session(stage="group_discussion", consensus={"eta": rec})

    def test_consensus_at_consensus_stage_ok(self):
        rec = JudgmentRecord(make_judgment(expert="RIO"), )
        s = make_session(stage="consensus", consensus={"eta": rec})
        assert s.consensus_for("eta") == rec
        assert s.consensus_for("delay") is None

    def test_audit_log_must_be_strictly_monotone(self):
        with pytest.raises(ValidationError, match="monotone|increase"):
            ElicitationSession(
                session_id="s1",
                audit_log=(AuditEvent(ts(1), "a"), AuditEvent(ts(0), "b")))

    def test_audit_log_equal_timestamps_rejected(self):
        with pytest.raises(ValidationError):
            ElicitationSession(
                session_id="s1",
                audit_log=(AuditEvent(ts(1), "a"), AuditEvent(ts(1), "b")))

    def test_lookup_helpers(self):
        s = make_session()
        assert s.quantity_for("eta").scale == "linear"
        assert s.quantity_for("nope") is None
        assert s.expert_for("e2").expert_id == "e2"
        assert s.expert_for("nope") is None
        assert s.judgment_for("e2", "eta") is None


class TestStageMachine:
    def test_forward_transition(self):
        s = make_session(stage="individual", judgments={})
        s2 = s.with_stage("review_checks")
        assert s2.stage == "review_checks"
        assert s2.audit_log[-1].event == "stage_changed"
        assert s2.audit_log[-1].details == {"from": "individual",
                                            "to": "review_checks"}

    def test_forward_skip_allowed(self):
        s = make_session(stage="setup", judgments={})
        assert s.with_stage("individual").stage == "individual"

    def test_backwards_transition_rejected(self):
        s = make_session(stage="review_checks", judgments={})
        with pytest.raises(ValidationError) as err:
            s.with_stage("individual")
        assert err.value.code == "stage_transition"

    def test_same_stage_is_noop(self):
        s = make_session(stage="individual", judgments={})
        assert s.with_stage("individual") is s

    def test_unknown_target_stage(self):
        s = make_session(judgments={})
        with pytest.raises(ValidationError):
            s.with_stage("negotiation")

    def test_audit_timestamps_strictly_increase_under_rapid_calls(self):
        s = make_session(stage="setup", judgments={})
        for target in ("training", "background", "individual"):
            s = s.with_stage(target)
        stamps = [e.timestamp for e in s.audit_log]
        assert stamps == sorted(stamps)
        assert len(set(stamps)) == len(stamps)


class TestSessionHelpers:
    def test_with_judgment_adds_record(self):
        s = make_session(judgments={})
        j = make_judgment(expert="e2")
        s2 = s.with_judgment(j, make_fit())
        rec = s2.judgment_for("e2", "eta")
        assert rec.judgment == j
        assert rec.fit == make_fit()
        assert s2.audit_log[-1].event == "judgment_recorded"
        assert s2.audit_log[-1].details == {"expert_id": "e2",
                                            "quantity_id": "eta"}

    def test_with_judgment_replaces_existing(self):
        s = make_session()
        j = make_judgment(values=(0.2, 0.3, 0.4, 0.5, 0.6))
        s2 = s.with_judgment(j, None)
        assert s2.judgment_for("e1", "eta").judgment == j
        assert len(s2.judgments) == 1

    def test_with_judgment_unknown_expert(self):
        s = make_session(judgments={})
        with pytest.raises(ValidationError):
            s.with_judgment(make_judgment(expert="ghost"), None)

    def test_with_consensus_requires_group_discussion(self):
        s = make_session(stage="individual")
        with pytest.raises(ValidationError) as err:
            s.with_consensus(make_judgment(expert="RIO"), make_fit())
        assert err.value.code == "stage"

    def test_with_consensus_advances_to_feedback(self):
        s = make_session(stage="group_discussion")
        s2 = s.with_consensus(make_judgment(expert="RIO"), make_fit())
        assert s2.stage == "feedback"
        assert s2.consensus_for("eta") is not None
        events = [e.event for e in s2.audit_log]
        assert "consensus_recorded" in events
        assert events[-1] == "stage_changed"

    def test_with_consensus_keeps_later_stage(self):
        s = make_session(stage="group_discussion")
        s2 = s.with_consensus(make_judgment(expert="RIO"), make_fit())
        j2 = make_judgment(expert="RIO", quantity="delay",
                           values=(1.0, 2.0, 3.0, 4.0, 5.0),
                           support=(0.0, math.inf))
        s3 = s2.with_consensus(j2, None)
        assert s3.stage == "feedback"
        assert s3.consensus_for("delay").judgment == j2

    def test_mutation_rejected_once_closed(self):
        s = make_session(stage="closed")
        with pytest.raises(ValidationError):
            s.with_judgment(make_judgment(expert="e2"), None)
        with pytest.raises(ValidationError):
            s.with_consensus(make_judgment(expert="RIO"), None)

    def test_with_event_appends(self):
        s = make_session()
        s2 = s.with_event("note", {"text": "break for coffee"})
        assert s2.audit_log[-1].event == "note"

    def test_new_session_starts_at_setup(self):
        s = new_session("fresh", quantities=make_quantities(),
                        experts=make_experts())
        assert s.stage == "setup"
        assert s.audit_log[0].event == "session_created"

    def test_stage_history_replays_audit_log(self):
        s = new_session("fresh", quantities=make_quantities())
        for target in ("training", "individual", "group_discussion"):
            s = s.with_stage(target)
        assert stage_history(s) == ("setup", "training", "individual",
                                    "group_discussion")
        assert stage_history(s)[-1] == s.stage

    def test_stage_history_includes_consensus_jump(self):
        s = new_session("fresh", quantities=make_quantities(),
                        experts=make_experts())
        s = s.with_stage("group_discussion")
        s = s.with_consensus(make_judgment(expert="RIO"), make_fit())
        assert stage_history(s)[-1] == "feedback"
        assert stage_history(s)[-1] == s.stage


class TestSessionSerialization:
    def test_roundtrip(self):
        rec = JudgmentRecord(make_judgment(expert="RIO"), make_fit())
        s = make_session(stage="consensus", consensus={"eta": rec})
        doc = json.loads(json.dumps(s.to_dict()))
        assert ElicitationSession.from_dict(doc) == s

    def test_roundtrip_without_fit(self):
        s = make_session(judgments={("e1", "eta"):
                                    JudgmentRecord(make_judgment())})
        assert ElicitationSession.from_dict(s.to_dict()) == s

    def test_roundtrip_preserves_judgment_order(self):
        s = make_session(judgments={})
        s = s.with_judgment(make_judgment(expert="e2"), None)
        s = s.with_judgment(make_judgment(expert="e1"), make_fit())
        back = ElicitationSession.from_dict(s.to_dict())
        assert [k for k, _ in back.judgments] == [("e2", "eta"), ("e1", "eta")]


# ---------------------------------------------------------------- store

class TestSessionStore:
    def test_save_and_reload_identical(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session()
        assert store.save_session(s) == 1
        loaded, version = store.load_session("s1")
        assert version == 1
        assert loaded == s

    def test_version_strictly_increases(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session(stage="setup", judgments={})
        v1 = store.save_session(s)
        v2 = store.save_session(s.with_stage("training"), base_version=v1)
        v3 = store.save_session(s.with_stage("background"), base_version=v2)
        assert (v1, v2, v3) == (1, 2, 3)
        assert store.versions("s1") == (1, 2, 3)

    def test_prior_versions_retained(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session(stage="setup", judgments={})
        store.save_session(s)
        store.save_session(s.with_stage("training"), base_version=1)
        old = store.load_version("s1", 1)
        assert old.stage == "setup"
        assert (store.load_version("s1", 2)).stage == "training"

    def test_stale_base_version_conflicts(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session(stage="setup", judgments={})
        store.save_session(s)
        store.save_session(s.with_stage("training"), base_version=1)
        with pytest.raises(VersionConflictError) as err:
            store.save_session(s.with_stage("background"), base_version=1)
        assert err.value.expected == 2
        assert err.value.actual == 1

    def test_new_session_conflicts_if_already_present(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(make_session())
        with pytest.raises(VersionConflictError):
            store.save_session(make_session())

    def test_concurrent_saves_single_winner(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session(stage="setup", judgments={})
        store.save_session(s)
        s2 = s.with_stage("training")
        barrier = threading.Barrier(4)
        outcomes = []

        def attempt():
            barrier.wait()
            try:
                outcomes.append(("ok", store.save_session(s2, base_version=1)))
            except VersionConflictError:
                outcomes.append(("conflict", None))

        threads = [threading.Thread(target=attempt) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(o for o, _ in outcomes) == ["conflict"] * 3 + ["ok"]
        assert store.versions("s1") == (1, 2)

    def test_backwards_stage_save_rejected(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session(stage="review_checks", judgments={})
        store.save_session(s)
        earlier = replace(s, stage="individual")
        with pytest.raises(ValidationError) as err:
            store.save_session(earlier, base_version=1)
        assert err.value.code == "stage_transition"

    def test_load_unknown_session(self, tmp_path):
        store = SessionStore(tmp_path)
        with pytest.raises(NotFoundError):
            store.load_session("missing")

    def test_load_unknown_version(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(make_session())
        with pytest.raises(NotFoundError):
            store.load_version("s1", 5)

    def test_list_sessions(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(make_session())
        other = replace(make_session(), session_id="a0")
        store.save_session(other)
        assert store.list_sessions() == ("a0", "s1")

    def test_no_temp_files_left_behind(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(make_session())
        leftovers = [p for p in (tmp_path / "sessions" / "s1").iterdir()
                     if not p.name.endswith(".json")]
        assert leftovers == []

    def test_stored_document_is_valid_json(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session()
        store.save_session(s)
        path = tmp_path / "sessions" / "s1" / "v0000001.json"
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert doc["session_id"] == "s1"


class TestSeedDatasetStore:
    def make_dataset(self):
        src = io.StringIO(well_formed_csv(3, ("A", "B")))
        return load_seed_csv(src, dataset_id="ds1")

    def test_save_and_load(self, tmp_path):
        store = SessionStore(tmp_path)
        ds = self.make_dataset()
        store.save_seed_dataset(ds)
        assert store.load_seed_dataset("ds1") == ds
        assert store.list_seed_datasets() == ("ds1",)

    def test_duplicate_dataset_conflicts(self, tmp_path):
        store = SessionStore(tmp_path)
        ds = self.make_dataset()
        store.save_seed_dataset(ds)
        with pytest.raises(VersionConflictError):
            store.save_seed_dataset(ds)

    def test_load_unknown_dataset(self, tmp_path):
        with pytest.raises(NotFoundError):
            SessionStore(tmp_path).load_seed_dataset("nope")


class TestExportBundle:
    def test_bundle_contents(self, tmp_path):
        store = SessionStore(tmp_path)
        s = make_session(stage="setup", judgments={})
        store.save_session(s)
        store.save_session(s.with_stage("training"), base_version=1)
        table = ScoreTable(rows=(ScoreRow("e1", 0.1, 0.2, 0.3),),
                           question_count=3)
        out = store.export_bundle("s1", tmp_path / "bundle.zip",
                                  tables={"seed_scores": table})
        with zipfile.ZipFile(out) as z:
            names = set(z.namelist())
            assert names == {"session/s1/v0000001.json",
                             "session/s1/v0000002.json",
                             "scores/seed_scores.csv"}
            doc = json.loads(z.read("session/s1/v0000002.json"))
            assert doc["stage"] == "training"
            assert z.read("scores/seed_scores.csv").decode() == table.to_csv()

    def test_bundle_unknown_session(self, tmp_path):
        store = SessionStore(tmp_path)
        with pytest.raises(NotFoundError):
            store.export_bundle("nope", tmp_path / "bundle.zip")


# ------------------------------------------------------------- seed csv

HEADER = "question_id,expert_id,min,q25,median,q75,max,truth,scale"


def well_formed_csv(n_questions=10, experts=("A", "B", "C"), scale="linear"):
    lines = [HEADER]
    for i in range(n_questions):
        qid = f"q{i + 1:02d}"
        truth = 3.5 + i
        for k, e in enumerate(experts):
            base = 1.0 + i + 0.1 * k
            vals = [base, base + 1, base + 2, base + 3, base + 4]
            cells = [qid, e] + [repr(v) for v in vals] + [repr(truth), scale]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


class TestLoadSeedCsv:
    def test_well_formed_file(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv()))
        assert len(ds.questions) == 10
        assert all(len(q.judgments) == 3 for q in ds.questions)
        assert ds.questions[0].question_id == "q01"
        assert ds.questions[0].truth == 3.5
        assert ds.questions[0].expert_ids == ("A", "B", "C")

    def test_question_order_is_first_appearance(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(4)))
        assert [q.question_id for q in ds.questions] == ["q01", "q02",
                                                         "q03", "q04"]

    def test_linear_scale_support_unbounded(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(1)))
        j = ds.questions[0].judgments[0]
        assert j.support == (-math.inf, math.inf)

    def test_log_scale_support_positive(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(1, scale="log")))
        j = ds.questions[0].judgments[0]
        assert j.support == (0.0, math.inf)
        assert ds.questions[0].scale == "log"

    def test_quartile_order_violation_names_line(self):
        text = HEADER + "\nq01,A,1.0,3.0,2.0,4.0,5.0,2.5,linear\n"
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "line 2" in str(err.value)
        assert "increasing" in str(err.value)
        assert err.value.details and err.value.details[0]["line"] == 2

    def test_duplicate_question_expert_pair(self):
        text = (HEADER + "\n"
                "q01,A,1.0,2.0,3.0,4.0,5.0,2.5,linear\n"
                "q01,A,1.5,2.5,3.5,4.5,5.5,2.5,linear\n")
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "duplicate" in str(err.value)
        assert "line 3" in str(err.value)

    def test_missing_column(self):
        text = ("question_id,expert_id,min,q25,median,q75,max,scale\n"
                "q01,A,1.0,2.0,3.0,4.0,5.0,linear\n")
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "truth" in str(err.value)

    def test_non_numeric_cell(self):
        text = HEADER + "\nq01,A,1.0,2.0,soon,4.0,5.0,2.5,linear\n"
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "median" in str(err.value)
        assert "line 2" in str(err.value)

    def test_unknown_scale_value(self):
        text = HEADER + "\nq01,A,1.0,2.0,3.0,4.0,5.0,2.5,decibel\n"
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "scale" in str(err.value)

    def test_inconsistent_truth_within_question(self):
        text = (HEADER + "\n"
                "q01,A,1.0,2.0,3.0,4.0,5.0,2.5,linear\n"
                "q01,B,1.0,2.0,3.0,4.0,5.0,9.9,linear\n")
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "truth" in str(err.value)
        assert "line 3" in str(err.value)

    def test_inconsistent_scale_within_question(self):
        text = (HEADER + "\n"
                "q01,A,1.0,2.0,3.0,4.0,5.0,2.5,linear\n"
                "q01,B,1.0,2.0,3.0,4.0,5.0,2.5,log\n")
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "scale" in str(err.value)

    def test_log_scale_rejects_nonpositive_minimum(self):
        text = HEADER + "\nq01,A,0.0,2.0,3.0,4.0,5.0,2.5,log\n"
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "line 2" in str(err.value)

    def test_log_scale_rejects_nonpositive_truth(self):
        text = HEADER + "\nq01,A,1.0,2.0,3.0,4.0,5.0,-2.5,log\n"
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "truth" in str(err.value)

    def test_errors_aggregate_across_rows(self):
        text = (HEADER + "\n"
                "q01,A,1.0,3.0,2.0,4.0,5.0,2.5,linear\n"
                "q02,A,1.0,2.0,oops,4.0,5.0,2.5,linear\n")
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert len(err.value.details) == 2
        assert "line 2" in str(err.value) and "line 3" in str(err.value)

    def test_header_only_rejected(self):
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(HEADER + "\n"))
        assert "no data rows" in str(err.value)

    def test_extra_fields_in_row_rejected(self):
        text = HEADER + "\nq01,A,1.0,2.0,3.0,4.0,5.0,2.5,linear,surprise\n"
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "line 2" in str(err.value)

    def test_short_row_rejected(self):
        text = HEADER + "\nq01,A,1.0,2.0,3.0\n"
        with pytest.raises(ValidationError) as err:
            load_seed_csv(io.StringIO(text))
        assert "line 2" in str(err.value)

    def test_path_input_and_derived_dataset_id(self, tmp_path):
        path = tmp_path / "spring seeds.csv"
        path.write_text(well_formed_csv(2), encoding="utf-8")
        ds = load_seed_csv(path)
        assert ds.dataset_id == "spring-seeds"
        assert len(ds.questions) == 2

    def test_explicit_dataset_id(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(1)), dataset_id="ten")
        assert ds.dataset_id == "ten"


class TestSeedDataset:
    def test_duplicate_question_ids_rejected(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(2)), dataset_id="d")
        with pytest.raises(ValidationError):
            SeedDataset(dataset_id="d",
                        questions=(ds.questions[0], ds.questions[0]))

    def test_bad_dataset_id(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(1)), dataset_id="d")
        with pytest.raises(ValidationError):
            SeedDataset(dataset_id="a/b", questions=ds.questions)

    def test_roundtrip(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(3)), dataset_id="d")
        doc = json.loads(json.dumps(ds.to_dict()))
        assert SeedDataset.from_dict(doc) == ds

    def test_expert_view_has_no_truth(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(3)), dataset_id="d")
        view = ds.expert_view()
        assert "truth" not in json.dumps(view)
        assert len(view["questions"]) == 3
        assert view["questions"][0]["judgments"]


# --------------------------------------------------------------- schemas

class TestSchemas:
    def test_all_schemas_load_and_are_wellformed(self):
        for name in ("session", "judgment", "fit", "seed_dataset"):
            schema = load_schema(name)
            jsonschema.Draft202012Validator.check_schema(schema)

    def test_session_document_validates(self):
        rec = JudgmentRecord(make_judgment(expert="RIO"), make_fit())
        s = make_session(stage="consensus", consensus={"eta": rec})
        jsonschema.validate(s.to_dict(), load_schema("session"))

    def test_session_schema_rejects_unknown_stage(self):
        doc = make_session().to_dict()
        doc["stage"] = "negotiation"
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(doc, load_schema("session"))

    def test_judgment_document_validates(self):
        jsonschema.validate(make_judgment().to_dict(), load_schema("judgment"))

    def test_judgment_schema_rejects_missing_median(self):
        doc = make_judgment().to_dict()
        del doc["median"]
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(doc, load_schema("judgment"))

    def test_fit_document_validates(self):
        jsonschema.validate(make_fit().to_dict(), load_schema("fit"))

    def test_fit_schema_accepts_mixture_and_tabulated(self):
        mix = Mixture(components=((0.5, Normal(0.0, 1.0)),
                                  (0.5, Normal(4.0, 1.0))))
        tab = Tabulated(x=(0.0, 0.5, 1.0), pdf_values=(0.0, 2.0, 0.0))
        for dist in (mix, tab):
            doc = FitResult(dist, 0.0, (("normal", 0.0),)).to_dict()
            jsonschema.validate(doc, load_schema("fit"))

    def test_seed_dataset_document_validates(self):
        ds = load_seed_csv(io.StringIO(well_formed_csv(2)), dataset_id="d")
        jsonschema.validate(ds.to_dict(), load_schema("seed_dataset"))

    def test_expert_view_schema_diff(self):
        # the expert-facing schema is the dataset schema with the truth
        # property removed; the full document must then fail it
        ds = load_seed_csv(io.StringIO(well_formed_csv(2)), dataset_id="d")
        schema = load_schema("seed_dataset")
        expert_schema = copy.deepcopy(schema)
        q = expert_schema["$defs"]["question"]
        q["required"].remove("truth")
        del q["properties"]["truth"]
        jsonschema.validate(ds.expert_view(), expert_schema)
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(ds.to_dict(), expert_schema)
        jsonschema.validate(ds.to_dict(), schema)


# ------------------------------------------------------------ properties

def sorted_values(lo=0.01, hi=0.99):
    return st.lists(
        st.floats(min_value=lo, max_value=hi, allow_nan=False),
        min_size=5, max_size=5, unique=True).map(lambda v: tuple(sorted(v)))


@st.composite
def session_strategy(draw):
    quantities = make_quantities()
    n_experts = draw(st.integers(min_value=1, max_value=3))
    experts = tuple(
        ExpertProfile(f"e{i}",
                      name=draw(st.text(max_size=6)),
                      knowledge_ratings=(
                          ("disease",
                           draw(st.floats(min_value=1, max_value=5,
                                          allow_nan=False))),),
                      strengths=draw(st.text(max_size=10)),
                      weaknesses=draw(st.text(max_size=10)))
        for i in range(n_experts))
    judgments = {}
    for e in experts:
        for q in quantities:
            if draw(st.booleans()):
                vals = draw(sorted_values())
                j = ElicitedJudgment(
                    quantity_id=q.quantity_id, expert_id=e.expert_id,
                    minimum=vals[0], q25=vals[1], median=vals[2],
                    q75=vals[3], maximum=vals[4], support=q.support)
                fit = make_fit() if draw(st.booleans()) else None
                judgments[(e.expert_id, q.quantity_id)] = JudgmentRecord(j, fit)
    consensus = {}
    if draw(st.booleans()):
        vals = draw(sorted_values())
        j = ElicitedJudgment(
            quantity_id="eta", expert_id="RIO",
            minimum=vals[0], q25=vals[1], median=vals[2],
            q75=vals[3], maximum=vals[4], support=(0.0, 1.0))
        consensus["eta"] = JudgmentRecord(j, make_fit())
        stage = draw(st.sampled_from(("consensus", "feedback", "closed")))
    else:
        stage = draw(st.sampled_from(STAGES))
    n_events = draw(st.integers(min_value=1, max_value=4))
    audit = tuple(AuditEvent(ts(i), f"event{i}",
                             draw(st.one_of(st.none(),
                                            st.just({"note": "x"}))))
                  for i in range(n_events))
    return ElicitationSession(session_id="prop", stage=stage,
                              quantities=quantities, experts=experts,
                              judgments=judgments, consensus=consensus,
                              audit_log=audit)


@settings(max_examples=60, deadline=None)
@given(session_strategy())
def test_session_roundtrip_property(session):
    doc = json.loads(json.dumps(session.to_dict()))
    assert ElicitationSession.from_dict(doc) == session


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=6),
       st.lists(st.sampled_from(("A", "B", "C", "D")), min_size=1,
                max_size=4, unique=True),
       st.sampled_from(("linear", "log")))
def test_seed_csv_roundtrip_property(n_questions, experts, scale):
    text = well_formed_csv(n_questions, tuple(experts), scale)
    ds = load_seed_csv(io.StringIO(text), dataset_id="prop")
    doc = json.loads(json.dumps(ds.to_dict()))
    assert SeedDataset.from_dict(doc) == ds
