from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from pollsim.backends import BackendConfig
from pollsim.engine import PromptConfig, run_state_wise, write_run
from pollsim.questionnaire import save_questionnaire
from pollsim.service import create_app
from tests.conftest import make_voter


@pytest.fixture(scope="module")
def seeded_run(tmp_path_factory, ):
    from pollsim.backends import make_backend
    from pollsim import synth

    tmp_path = tmp_path_factory.mktemp("runs")
    instrument = synth.desk_instrument()
    qpath = tmp_path / "instrument.json"
    save_questionnaire(instrument, qpath)
    samples = {
        "Alderton": [make_voter(f"a{i:02d}", "Alderton", "Democrat") for i in range(6)]
        + [make_voter(f"am{i:02d}", "Alderton", "Independent") for i in range(2)],
        "Brookfield": [make_voter(f"b{i:02d}", "Brookfield", "Republican") for i in range(5)],
    }
    backend = make_backend(BackendConfig(backend_id="mock-a", mock=True, mock_seed=1))
    cfg = PromptConfig(
        baseline=3, temporal_cutoff="2020-11-01T00:00:00Z", candidate_context="Two tickets."
    )
    records, results, manifest = run_state_wise(samples, instrument, cfg, backend, seed=3)
    flat = [r for state in sorted(records) for r in records[state]]
    run_dir = write_run(
        tmp_path / "runs",
        manifest,
        flat,
        state_results=results,
        questionnaire_path=qpath,
        samples=samples,
    )
    return tmp_path / "runs", manifest.run_id, run_dir


@pytest.fixture(scope="module")
def client(seeded_run):
    runs_dir, run_id, _ = seeded_run
    app = create_app(runs_dir)
    with TestClient(app) as c:
        yield c, run_id


class TestRunListing:
    def test_empty_dir(self, tmp_path):
        app = create_app(tmp_path)
        with TestClient(app) as c:
            assert c.get("/runs").json() == []

    def test_lists_seeded_run(self, client):
        c, run_id = client
        runs = c.get("/runs").json()
        assert [r["run_id"] for r in runs] == [run_id]
        assert runs[0]["mode"] == "state"

    def test_unknown_run_404(self, client):
        c, _ = client
        assert c.get("/runs/nope/summary").status_code == 404

    def test_corrupt_manifest_rejected(self, tmp_path):
        bad = tmp_path / "badrun"
        bad.mkdir()
        (bad / "manifest.json").write_text("{broken")
        app = create_app(tmp_path)
        with TestClient(app) as c:
            assert c.get("/runs").json() == []  # skipped in listing
            assert c.get("/runs/badrun/summary").status_code == 422

    def test_summary_counts(self, client):
        c, run_id = client
        body = c.get(f"/runs/{run_id}/summary").json()
        assert body["individuals"] == 13
        assert body["states"] == ["Alderton", "Brookfield"]
        assert body["questionnaire"]["questions"] == 5
        assert len(body["questions"]) == 5


class TestFilter:
    def test_empty_spec_is_whole_population(self, client):
        c, run_id = client
        body = c.post(f"/runs/{run_id}/filter", json={}).json()
        assert body["size"] == 13
        assert body["per_state"] == {"Alderton": 8, "Brookfield": 5}

    def test_state_filter(self, client):
        c, run_id = client
        body = c.post(f"/runs/{run_id}/filter", json={"state": "Alderton"}).json()
        assert body["size"] == 8

    def test_vote_condition_gives_unit_support(self, client):
        c, run_id = client
        spec = {"conditions": [{"question_id": "VOTE01", "letter": "A"}]}
        body = c.post(f"/runs/{run_id}/filter", json=spec).json()
        assert body["size"] > 0
        assert body["support"]["dem"] == 1.0

    def test_contradictory_conditions_empty(self, client):
        c, run_id = client
        spec = {
            "conditions": [
                {"question_id": "VOTE01", "letter": "A"},
                {"question_id": "VOTE01", "letter": "B"},
            ]
        }
        body = c.post(f"/runs/{run_id}/filter", json=spec).json()
        assert body["size"] == 0

    def test_monotone_in_conditions(self, client):
        c, run_id = client
        base = c.post(f"/runs/{run_id}/filter", json={}).json()["size"]
        one = c.post(
            f"/runs/{run_id}/filter",
            json={"conditions": [{"question_id": "ECON02", "letter": "A"}]},
        ).json()["size"]
        two = c.post(
            f"/runs/{run_id}/filter",
            json={
                "conditions": [
                    {"question_id": "ECON02", "letter": "A"},
                    {"question_id": "ENV03", "letter": "B"},
                ]
            },
        ).json()["size"]
        assert base >= one >= two

    def test_invalid_condition_422_with_path(self, client):
        c, run_id = client
        spec = {"conditions": [{"question_id": "NOPE", "letter": "A"}]}
        resp = c.post(f"/runs/{run_id}/filter", json=spec)
        assert resp.status_code == 422
        assert "conditions[0]" in resp.json()["detail"]


class TestDistribution:
    def test_relative_sums_to_one(self, client):
        c, run_id = client
        body = c.get(f"/runs/{run_id}/questions/VOTE01/distribution?mode=relative").json()
        for state, payload in body["states"].items():
            assert sum(payload["values"].values()) == pytest.approx(1.0)
            assert payload["modal"] in payload["values"]

    def test_absolute_counts(self, client):
        c, run_id = client
        body = c.get(f"/runs/{run_id}/questions/VOTE01/distribution?mode=absolute").json()
        total = sum(sum(p["values"].values()) for p in body["states"].values())
        assert total == 13

    def test_unknown_question_404(self, client):
        c, run_id = client
        assert c.get(f"/runs/{run_id}/questions/NOPE/distribution").status_code == 404

    def test_empty_filter_result_is_not_error(self, client):
        c, run_id = client
        body = c.get(
            f"/runs/{run_id}/questions/VOTE01/distribution",
            params={"state": "Nowhere"},
        ).json()
        assert body["states"] == {}

    def test_bad_mode_422(self, client):
        c, run_id = client
        resp = c.get(f"/runs/{run_id}/questions/VOTE01/distribution?mode=weird")
        assert resp.status_code == 422


class TestIndividuals:
    def test_clamped_sample(self, client):
        c, run_id = client
        body = c.post(f"/runs/{run_id}/individuals/sample", json={"n": 100}).json()
        assert body["population"] == 13
        assert len(body["cards"]) == 13

    def test_same_seed_same_cards(self, client):
        c, run_id = client
        a = c.post(f"/runs/{run_id}/individuals/sample", json={"n": 3, "seed": 9}).json()
        b = c.post(f"/runs/{run_id}/individuals/sample", json={"n": 3, "seed": 9}).json()
        assert a == b

    def test_card_contents(self, client):
        c, run_id = client
        body = c.post(f"/runs/{run_id}/individuals/sample", json={"n": 2}).json()
        card = body["cards"][0]
        assert {"id", "state", "tags", "posts", "answers"} <= set(card)
        assert card["tags"]["gender"]
        assert card["posts"]


class TestCrosstab:
    def test_two_dims(self, client):
        c, run_id = client
        body = c.get(f"/runs/{run_id}/crosstab?dims=VOTE01,ECON02").json()
        assert body["dims"] == ["VOTE01", "ECON02"]
        assert sum(body["cells"].values()) == 13
        for key in body["cells"]:
            assert len(key.split("|")) == 2

    def test_dims_capped_at_four(self, client):
        c, run_id = client
        resp = c.get(f"/runs/{run_id}/crosstab?dims=VOTE01,ECON02,ENV03,IMM04,HC05")
        assert resp.status_code == 422


class TestCrossStateDuplicates:
    def test_shared_pool_user_stays_distinct_per_state(self, tmp_path):
        """A pool user drawn into two states is two personas to the service."""
        from pollsim.backends import make_backend
        from pollsim import synth

        instrument = synth.desk_instrument()
        qpath = tmp_path / "instrument.json"
        save_questionnaire(instrument, qpath)
        samples = {
            "Alderton": [make_voter("dup01", "Alderton", "Democrat")],
            "Brookfield": [make_voter("dup01", "Brookfield", "Republican")],
        }
        backend = make_backend(BackendConfig(backend_id="mock-a", mock=True, mock_seed=1))
        cfg = PromptConfig(baseline=2)
        records, results, manifest = run_state_wise(samples, instrument, cfg, backend)
        flat = [r for state in sorted(records) for r in records[state]]
        write_run(
            tmp_path / "runs",
            manifest,
            flat,
            state_results=results,
            questionnaire_path=qpath,
            samples=samples,
        )
        app = create_app(tmp_path / "runs")
        with TestClient(app) as c:
            body = c.post(f"/runs/{manifest.run_id}/filter", json={}).json()
            assert body["size"] == 2
            assert body["per_state"] == {"Alderton": 1, "Brookfield": 1}
            # answers do not leak across the two personas
            dem = c.post(
                f"/runs/{manifest.run_id}/filter",
                json={"state": "Alderton", "conditions": [{"question_id": "VOTE01", "letter": "A"}]},
            ).json()
            rep = c.post(
                f"/runs/{manifest.run_id}/filter",
                json={"state": "Brookfield", "conditions": [{"question_id": "VOTE01", "letter": "B"}]},
            ).json()
            assert dem["size"] == 1
            assert rep["size"] == 1


class TestChat:
    def test_round_trip_appends_two_turns(self, client):
        c, run_id = client
        session = c.post("/chat/sessions", json={"run_id": run_id, "voter_id": "Alderton:a00"}).json()
        sid = session["session_id"]
        assert session["voter"]["id"] == "Alderton:a00"
        body = c.post(f"/chat/sessions/{sid}/messages", json={"text": "Who did you vote for?"})
        assert body.status_code == 200
        payload = body.json()
        assert len(payload["history"]) == 2
        assert payload["history"][0]["role"] == "user"
        assert payload["history"][1]["role"] == "assistant"
        # persona tags surface in the mock's reply
        assert "Democratic" in payload["reply"]

    def test_multi_round_history_grows_by_two(self, client):
        c, run_id = client
        sid = c.post("/chat/sessions", json={"run_id": run_id, "voter_id": "Alderton:a01"}).json()[
            "session_id"
        ]
        first = c.post(f"/chat/sessions/{sid}/messages", json={"text": "Who did you vote for?"})
        second = c.post(f"/chat/sessions/{sid}/messages", json={"text": "Why?"})
        assert len(first.json()["history"]) == 2
        assert len(second.json()["history"]) == 4

    def test_sessions_isolated(self, client):
        c, run_id = client
        s1 = c.post("/chat/sessions", json={"run_id": run_id, "voter_id": "Alderton:a02"}).json()
        s2 = c.post("/chat/sessions", json={"run_id": run_id, "voter_id": "Brookfield:b00"}).json()
        c.post(f"/chat/sessions/{s1['session_id']}/messages", json={"text": "Hello?"})
        body = c.post(
            f"/chat/sessions/{s2['session_id']}/messages", json={"text": "Who did you vote for?"}
        ).json()
        assert len(body["history"]) == 2
        assert "Republican" in body["reply"]

    def test_unknown_voter_404(self, client):
        c, run_id = client
        resp = c.post("/chat/sessions", json={"run_id": run_id, "voter_id": "ghost"})
        assert resp.status_code == 404

    def test_backend_failure_leaves_history_unchanged(self, seeded_run):
        runs_dir, run_id, _ = seeded_run
        from pollsim.backends import TransportError

        class FlakyBackend:
            backend_id = "flaky"
            config = BackendConfig(backend_id="flaky", mock=True)

            def __init__(self):
                self.calls = 0

            def complete(self, messages, temperature=None, max_tokens=None):
                self.calls += 1
                if self.calls == 1:
                    raise TransportError("first call drops")
                return "recovered"

        app = create_app(runs_dir, backend=FlakyBackend())
        with TestClient(app) as c:
            sid = c.post("/chat/sessions", json={"run_id": run_id, "voter_id": "Alderton:a03"}).json()[
                "session_id"
            ]
            resp = c.post(f"/chat/sessions/{sid}/messages", json={"text": "Hi"})
            assert resp.status_code == 502
            ok = c.post(f"/chat/sessions/{sid}/messages", json={"text": "Hi again"})
            assert ok.status_code == 200
            # the failed round left no residue
            assert len(ok.json()["history"]) == 2
            assert ok.json()["history"][0]["text"] == "Hi again"
