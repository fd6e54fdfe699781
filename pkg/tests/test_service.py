import json
import pathlib

import pytest
from fastapi.testclient import TestClient

from priorpool.cli import main
from priorpool.service import create_app

DATA = pathlib.Path(__file__).parent / "data"
TOKEN = "workshop-key"
AUTH = {"X-Facilitator-Token": TOKEN}

QUANTITIES = [
    {"quantity_id": name, "support": [0.0, 1.0], "scale": "linear"}
    for name in ("eta", "psi", "theta1", "theta2", "theta3")
]
EXPERTS = [{"expert_id": "avery"}, {"expert_id": "blake"}]


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=tmp_path / "data", facilitator_token=TOKEN)
    with TestClient(app) as c:
        yield c


def judgment_body(median, width=0.2, **extra):
    body = {"minimum": median - width, "q25": median - 0.35 * width,
            "median": median, "q75": median + 0.35 * width,
            "maximum": median + width}
    body.update(extra)
    return body


def make_session(client, sid="s1"):
    r = client.post("/sessions", json={"session_id": sid,
                                       "quantities": QUANTITIES,
                                       "experts": EXPERTS})
    assert r.status_code == 201, r.text
    return r.json()


def to_stage(client, sid, stage):
    r = client.put(f"/sessions/{sid}/stage", json={"stage": stage})
    assert r.status_code == 200, r.text
    return r.json()


# ------------------------------------------------------------ sessions

def test_create_session(client):
    doc = make_session(client)
    assert doc["version"] == 1
    assert doc["session"]["stage"] == "setup"
    events = [e["event"] for e in doc["session"]["audit_log"]]
    assert events == ["session_created"]


def test_create_duplicate_session_conflicts(client):
    make_session(client)
    r = client.post("/sessions", json={"session_id": "s1"})
    assert r.status_code == 409
    assert r.json()["code"] == "version_conflict"


def test_get_session_roundtrip(client):
    created = make_session(client)
    r = client.get("/sessions/s1")
    assert r.status_code == 200
    assert r.json() == created


def test_get_unknown_session_404(client):
    r = client.get("/sessions/nope")
    assert r.status_code == 404
    assert r.json()["code"] == "not_found"


def test_stage_advance_and_stale_version(client):
    make_session(client)
    r = client.put("/sessions/s1/stage",
                   json={"stage": "training", "base_version": 1})
    assert r.status_code == 200
    assert r.json()["version"] == 2
    stale = client.put("/sessions/s1/stage",
                       json={"stage": "background", "base_version": 1})
    assert stale.status_code == 409
    assert stale.json()["details"] == {"expected": 2, "actual": 1}


def test_stage_backwards_rejected(client):
    make_session(client)
    to_stage(client, "s1", "individual")
    r = client.put("/sessions/s1/stage", json={"stage": "training"})
    assert r.status_code == 400
    assert r.json()["code"] == "stage_transition"


# ----------------------------------------------------------- judgments

def test_put_judgment_returns_fit_preview(client):
    make_session(client)
    r = client.put("/sessions/s1/judgments/avery/eta",
                   json=judgment_body(0.5))
    assert r.status_code == 200
    doc = r.json()
    assert doc["version"] == 2
    assert doc["fit"]["distribution"]["family"] in ("normal", "beta")
    assert doc["fit"]["sse"] >= 0.0
    session = client.get("/sessions/s1").json()["session"]
    assert len(session["judgments"]) == 1
    events = [e["event"] for e in session["audit_log"]]
    assert "judgment_recorded" in events


def test_put_judgment_quantile_order_400(client):
    make_session(client)
    body = judgment_body(0.5)
    body["median"] = body["q25"] - 0.05
    r = client.put("/sessions/s1/judgments/avery/eta", json=body)
    assert r.status_code == 400
    assert r.json()["code"] == "quantile_order"


def test_put_judgment_outside_support_400(client):
    make_session(client)
    r = client.put("/sessions/s1/judgments/avery/eta",
                   json=judgment_body(0.9, width=0.3))
    assert r.status_code == 400
    assert r.json()["code"] == "support"


def test_put_judgment_unknown_ids_404(client):
    make_session(client)
    r = client.put("/sessions/s1/judgments/zed/eta",
                   json=judgment_body(0.5))
    assert r.status_code == 404
    r = client.put("/sessions/s1/judgments/avery/zeta",
                   json=judgment_body(0.5))
    assert r.status_code == 404


def test_put_judgment_family_override(client):
    make_session(client)
    r = client.put("/sessions/s1/judgments/avery/eta",
                   json=judgment_body(0.5, family="normal"))
    assert r.status_code == 200
    assert r.json()["fit"]["distribution"]["family"] == "normal"


# ------------------------------------------------------------- overlay

def test_overlay_shared_grid(client):
    make_session(client)
    client.put("/sessions/s1/judgments/avery/eta", json=judgment_body(0.4))
    client.put("/sessions/s1/judgments/blake/eta", json=judgment_body(0.6))
    r = client.get("/sessions/s1/overlay/eta")
    assert r.status_code == 200
    doc = r.json()
    assert len(doc["x"]) == 512
    assert doc["x"][0] == 0.0 and doc["x"][-1] == 1.0
    assert set(doc["densities"]) == {"avery", "blake"}
    assert doc["consensus"] is None


def test_overlay_without_fits_400(client):
    make_session(client)
    r = client.get("/sessions/s1/overlay/eta")
    assert r.status_code == 400
    assert r.json()["code"] == "no_fits"


def test_overlay_unknown_quantity_404(client):
    make_session(client)
    assert client.get("/sessions/s1/overlay/zeta").status_code == 404


# ----------------------------------------------------------- consensus

def test_consensus_requires_discussion_stage(client):
    make_session(client)
    r = client.put("/sessions/s1/consensus/eta", json=judgment_body(0.5))
    assert r.status_code == 400
    assert r.json()["code"] == "stage"


def test_consensus_advances_to_feedback(client):
    make_session(client)
    to_stage(client, "s1", "group_discussion")
    r = client.put("/sessions/s1/consensus/eta", json=judgment_body(0.5))
    assert r.status_code == 200
    assert r.json()["stage"] == "feedback"
    session = client.get("/sessions/s1").json()["session"]
    assert session["stage"] == "feedback"
    overlay = client.get("/sessions/s1/overlay/eta").json()
    assert overlay["consensus"] is not None
    assert len(overlay["consensus"]) == 512


# ---------------------------------------------------------- the checks

def consensus_session(client):
    make_session(client)
    to_stage(client, "s1", "group_discussion")
    client.put("/sessions/s1/consensus/eta", json=judgment_body(0.5))
    client.put("/sessions/s1/consensus/psi", json=judgment_body(0.5))


def test_delayed_positive_from_consensus_fits(client):
    consensus_session(client)
    r = client.get("/sessions/s1/checks/delayed-positive?seed=5")
    assert r.status_code == 200
    doc = r.json()
    assert doc["source"] == "consensus"
    res = doc["result"]
    assert res["n_draws"] == 10000 and res["level"] == 0.9
    assert res["interval"][0] < res["estimate"] < res["interval"][1]
    again = client.get("/sessions/s1/checks/delayed-positive?seed=5")
    assert again.content == r.content


def test_delayed_positive_point_overrides(client):
    make_session(client)
    r = client.get(
        "/sessions/s1/checks/delayed-positive?eta=0.5&psi=0.5")
    assert r.status_code == 200
    res = r.json()["result"]
    assert res["estimate"] == 0.25
    assert res["interval"] == [0.25, 0.25]


def test_delayed_positive_missing_parameter_400(client):
    make_session(client)
    to_stage(client, "s1", "group_discussion")
    client.put("/sessions/s1/consensus/eta", json=judgment_body(0.5))
    r = client.get("/sessions/s1/checks/delayed-positive")
    assert r.status_code == 400
    doc = r.json()
    assert doc["code"] == "missing_parameters"
    assert doc["details"] == [{"quantity": "psi"}]


def test_patient_sample_session_medians(client):
    consensus_session(client)
    r = client.get("/sessions/s1/checks/patient-sample"
                   "?total=100&theta1=0.8&theta2=0.6&theta3=0.1")
    assert r.status_code == 200
    doc = r.json()
    groups = doc["sample"]["group_counts"]
    assert (groups["rt_pos_start"], groups["rt_pos_6mo"],
            groups["rt_never"]) == (50, 25, 25)
    assert sum(doc["sample"]["counts"].values()) == 100
    assert len(doc["sample"]["patients"]) == 100
    assert doc["parameters"]["eta"] == 0.5


def test_patient_sample_expert_source(client):
    make_session(client)
    medians = {"eta": 0.5, "psi": 0.5, "theta1": 0.8, "theta2": 0.6,
               "theta3": 0.12}
    for qid, m in medians.items():
        r = client.put(f"/sessions/s1/judgments/avery/{qid}",
                       json=judgment_body(m, width=0.1))
        assert r.status_code == 200, r.text
    r = client.get("/sessions/s1/checks/patient-sample"
                   "?source=expert:avery&total=60")
    assert r.status_code == 200
    doc = r.json()
    assert sum(doc["sample"]["counts"].values()) == 60
    groups = doc["sample"]["group_counts"]
    assert (groups["rt_pos_start"], groups["rt_pos_6mo"],
            groups["rt_never"]) == (30, 15, 15)


def test_patient_sample_bad_source_400(client):
    make_session(client)
    r = client.get("/sessions/s1/checks/patient-sample?source=oracle")
    assert r.status_code == 400


# ------------------------------------------------------------- pooling

def test_pool_endpoint_matches_cli_bytes(client, tmp_path):
    body = {
        "distributions": [
            {"family": "normal", "params": {"mu": 0.0, "sigma": 1.0}},
            {"family": "normal", "params": {"mu": 4.0, "sigma": 1.0}},
        ],
        "method": "loglinear",
    }
    r = client.post("/pool", json=body)
    assert r.status_code == 200
    infile = tmp_path / "pool_input.json"
    outfile = tmp_path / "pool_output.json"
    infile.write_text(json.dumps(body), encoding="utf-8")
    assert main(["pool", "--input", str(infile), "--out",
                 str(outfile)]) == 0
    assert outfile.read_bytes() == r.content


def test_pool_bad_method_400(client):
    r = client.post("/pool", json={"distributions": [], "method": "magic"})
    assert r.status_code == 400
    assert r.json()["code"] == "pool_method"


def test_pool_missing_distributions_400(client):
    r = client.post("/pool", json={})
    assert r.status_code == 400


# --------------------------------------------- seed data + facilitator

def upload_fixture(client, dataset_id="fixture"):
    csv_text = (DATA / "seeds.csv").read_text(encoding="utf-8")
    r = client.post("/seed-datasets",
                    json={"dataset_id": dataset_id, "csv": csv_text},
                    headers=AUTH)
    assert r.status_code == 201, r.text
    assert r.json() == {"dataset_id": dataset_id, "question_count": 10}


def test_seed_dataset_upload_and_expert_view(client):
    upload_fixture(client)
    r = client.get("/seed-datasets/fixture/questions")
    assert r.status_code == 200
    assert "truth" not in r.text
    doc = r.json()
    assert len(doc["questions"]) == 10
    assert len(doc["questions"][0]["judgments"]) == 3


def test_seed_dataset_full_view_needs_token(client):
    upload_fixture(client)
    assert client.get("/seed-datasets/fixture").status_code == 403
    r = client.get("/seed-datasets/fixture", headers=AUTH)
    assert r.status_code == 200
    assert "truth" in r.text


def test_facilitator_gate_on_upload(client):
    r = client.post("/seed-datasets", json={"dataset_id": "x", "csv": ""})
    assert r.status_code == 403
    assert r.json()["code"] == "forbidden"
    r = client.post("/seed-datasets", json={"dataset_id": "x", "csv": ""},
                    headers={"X-Facilitator-Token": "wrong"})
    assert r.status_code == 403


def test_no_configured_token_refuses(tmp_path, monkeypatch):
    monkeypatch.delenv("FACILITATOR_TOKEN", raising=False)
    app = create_app(data_dir=tmp_path / "d2")
    with TestClient(app) as c:
        r = c.post("/seed-datasets", json={"dataset_id": "x", "csv": ""},
                   headers=AUTH)
        assert r.status_code == 403


def test_unknown_dataset_404(client):
    r = client.post("/cm/weights", json={"dataset_id": "ghost"},
                    headers=AUTH)
    assert r.status_code == 404


# ------------------------------------- engine parity with CLI goldens

def test_cm_crossval_matches_cli_golden(client):
    upload_fixture(client)
    r = client.post("/cm/crossval",
                    json={"dataset_id": "fixture", "alpha": 0.05},
                    headers=AUTH)
    assert r.status_code == 200
    assert r.content == (DATA / "folds.json").read_bytes()


def test_cm_weights_matches_cli_golden(client):
    upload_fixture(client)
    r = client.post("/cm/weights",
                    json={"dataset_id": "fixture", "alpha": 0.05},
                    headers=AUTH)
    assert r.status_code == 200
    assert r.content == (DATA / "weights.json").read_bytes()


def test_scores_from_folds_matches_cli_golden(client):
    upload_fixture(client)
    folds = json.loads((DATA / "folds.json").read_text(encoding="utf-8"))
    r = client.post("/scores", json={"dataset_id": "fixture",
                                     "folds": folds}, headers=AUTH)
    assert r.status_code == 200
    assert r.content == (DATA / "table.json").read_bytes()


def test_correlations_matches_cli_golden(client):
    upload_fixture(client)
    r = client.post("/scores/correlations", json={"dataset_id": "fixture"},
                    headers=AUTH)
    assert r.status_code == 200
    assert r.content == (DATA / "corr.json").read_bytes()


def test_cm_endpoints_require_token(client):
    upload_fixture(client)
    for path in ("/cm/weights", "/cm/crossval"):
        r = client.post(path, json={"dataset_id": "fixture"})
        assert r.status_code == 403
    r = client.post("/scores", json={"dataset_id": "fixture", "folds": {}})
    assert r.status_code == 403
    r = client.post("/scores/correlations", json={"dataset_id": "fixture"})
    assert r.status_code == 403


# ------------------------------------------------------ raw score mode

def test_scores_with_inline_evaluands(client):
    normal = {"family": "normal", "params": {"mu": 0.0, "sigma": 1.0}}
    r = client.post("/scores", json={
        "evaluands": {"a": [normal, normal, normal]},
        "truths": [0.0, 0.5, -0.5],
    })
    assert r.status_code == 200
    doc = r.json()
    assert doc["question_count"] == 3
    assert doc["rows"][0]["id"] == "a"


def test_correlations_with_inline_medians(client):
    r = client.post("/scores/correlations", json={
        "evaluands": {"a": [1.0, 2.5, 2.0], "b": [2.0, 1.5, 3.0]},
        "truths": [1.5, 2.0, 2.5],
    })
    assert r.status_code == 200
    doc = r.json()
    assert doc["ids"] == ["a", "b"]
    assert doc["matrix"][0][0] == 1.0


def test_bad_json_body_400(client):
    r = client.post("/pool", content=b"{nope",
                    headers={"Content-Type": "application/json"})
    assert r.status_code == 400
    assert r.json()["code"] == "json"
