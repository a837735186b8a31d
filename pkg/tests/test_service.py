from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from rankopt import (
    OptimizerConfig,
    ScriptedOracle,
    SessionStart,
    SphereObjective,
    init_refinement_session,
    read_transcript,
    replay_transcript,
    toy_embed,
)
from rankopt.optimizer import CandidateSet, FeedbackKind, RankFeedback, Stage
from rankopt.service import ServiceSettings, create_app

D = 6
E = 16


@pytest.fixture()
def client(tmp_path):
    settings = ServiceSettings(data_dir=tmp_path, latent_dim=D, embedding_dim=E, decoder_seed=3)
    app = create_app(settings)
    with TestClient(app) as c:
        yield c


def make_store(client, store_id="demo", entries=None):
    body = {"id": store_id, "latent_dim": D, "embedding_dim": E}
    if entries is not None:
        body["entries"] = entries
    r = client.post("/stores", json=body)
    assert r.status_code == 201, r.text
    return r.json()["id"]


def entry_wire(entry_id, text, z=None, sigma=0.2):
    return {
        "id": entry_id,
        "text": text,
        "embedding": toy_embed(text, dim=E).tolist(),
        "z_star_star": z,
        "sigma": sigma,
    }


def drive_with_oracle(client, session_id, objective, max_rounds=50):
    """Scripted client: rank each served round until the session finishes."""
    oracle = ScriptedOracle(objective, seed=9)
    logged = []
    for n in range(max_rounds):
        r = client.get(f"/sessions/{session_id}/round", params={"latents": True})
        if r.status_code == 409:
            return logged, r.json()
        payload = r.json()
        latents = np.asarray(payload["latents"])
        logged.append(latents)
        cands = CandidateSet(latents, payload["round"], Stage(payload["stage"]))
        if "full_ranking" in payload["allowed_feedback"] and n < 4:
            fb = oracle.rank(cands, k=len(latents))
        elif payload["stage"] == "stage1":
            fb = oracle.rank(cands, k=1)
        elif n < 8:
            fb = oracle.rank(cands, k=1)
        else:
            best = oracle.rank(cands, k=1)
            fb = RankFeedback(FeedbackKind.ACCEPT_AND_EXIT, best.ranking)
        r = client.post(
            f"/sessions/{session_id}/feedback",
            json={"round": payload["round"], "kind": fb.kind.value, "ranking": list(fb.ranking)},
        )
        assert r.status_code == 200, r.text
        if r.json()["status"] == "finished":
            return logged, r.json()
    raise AssertionError("session did not finish")


# --- sessions ----------------------------------------------------------------


def test_fresh_session_serves_m_trajectories(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "a slow forward walk", "seed": 5},
    )
    assert r.status_code == 201
    body = r.json()
    round0 = body["round"]
    assert round0["m"] == 4
    assert len(round0["candidates"]) == 4
    assert all(len(c["points"]) == 120 for c in round0["candidates"])
    assert round0["allowed_feedback"] == ["full_ranking", "best_only"]
    assert round0["prompt_kind"] == "rank_best_to_worst"


def test_fresh_session_round0_spread_matches_mu1(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "a slow forward walk", "seed": 5},
    )
    sid = r.json()["id"]
    payload = client.get(f"/sessions/{sid}/round", params={"latents": True}).json()
    mu1 = client.get(f"/sessions/{sid}").json()["config"]["mu1"]
    latents = np.asarray(payload["latents"])
    assert np.abs(latents).max() <= 6 * mu1  # drawn around zero with std mu1


def test_stage_transition_changes_allowed_feedback(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "jumping jacks", "seed": 5},
    )
    sid = r.json()["id"]
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "best_only", "ranking": [2]}
    )
    assert r.status_code == 200
    nxt = r.json()["round"]
    assert nxt["stage"] == "stage2"
    assert nxt["allowed_feedback"] == ["best_only", "accept_and_exit"]
    assert nxt["prompt_kind"] == "pick_best"


def test_full_ranking_advances_tau(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "spin in place", "seed": 1},
    )
    sid = r.json()["id"]
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "full_ranking", "ranking": [0, 1, 2, 3]}
    )
    assert r.status_code == 200
    assert r.json()["round"]["round"] == 1
    meta = client.get(f"/sessions/{sid}").json()
    assert meta["rounds_completed"] == 1


def test_illegal_feedback_kind_is_422(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "cartwheel", "seed": 2},
    )
    sid = r.json()["id"]
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "accept_and_exit", "ranking": [0]}
    )
    assert r.status_code == 422
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "full_ranking", "ranking": [0, 0, 1, 2]}
    )
    assert r.status_code == 422
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "sideways", "ranking": [0]}
    )
    assert r.status_code == 422


def test_duplicate_round_idempotency(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "wave both arms", "seed": 3},
    )
    sid = r.json()["id"]
    fb = {"round": 0, "kind": "full_ranking", "ranking": [3, 2, 1, 0]}
    first = client.post(f"/sessions/{sid}/feedback", json=fb)
    assert first.status_code == 200
    retry = client.post(f"/sessions/{sid}/feedback", json=fb)
    assert retry.status_code == 200
    assert retry.json() == first.json()
    meta = client.get(f"/sessions/{sid}").json()
    assert meta["rounds_completed"] == 1  # state did not advance
    conflicting = client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "full_ranking", "ranking": [0, 1, 2, 3]}
    )
    assert conflicting.status_code == 409
    stale = client.post(
        f"/sessions/{sid}/feedback", json={"round": 5, "kind": "full_ranking", "ranking": [0, 1, 2, 3]}
    )
    assert stale.status_code == 409


def test_concurrent_identical_submissions_advance_once(client):
    from concurrent.futures import ThreadPoolExecutor

    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "shuffle left", "seed": 9},
    )
    sid = r.json()["id"]
    fb = {"round": 0, "kind": "full_ranking", "ranking": [2, 0, 3, 1]}

    def submit(_):
        return client.post(f"/sessions/{sid}/feedback", json=fb)

    with ThreadPoolExecutor(max_workers=2) as pool:
        responses = list(pool.map(submit, range(2)))
    assert all(r.status_code == 200 for r in responses)
    assert responses[0].json() == responses[1].json()
    assert client.get(f"/sessions/{sid}").json()["rounds_completed"] == 1


def test_negative_round_on_fresh_session_is_conflict(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "slow spin", "seed": 3},
    )
    sid = r.json()["id"]
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": -1, "kind": "full_ranking", "ranking": [0, 1, 2, 3]}
    )
    assert r.status_code == 409


def test_unknown_session_404(client):
    assert client.get("/sessions/nope/round").status_code == 404
    assert client.get("/sessions/nope").status_code == 404


def test_finished_session_round_is_409_with_final(client):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "a small hop", "seed": 8},
    )
    sid = r.json()["id"]
    client.post(f"/sessions/{sid}/feedback", json={"round": 0, "kind": "best_only", "ranking": [0]})
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": 1, "kind": "accept_and_exit", "ranking": [1]}
    )
    assert r.json()["status"] == "finished"
    r = client.get(f"/sessions/{sid}/round")
    assert r.status_code == 409
    body = r.json()
    assert body["code"] == "SessionFinished"
    assert len(body["final"]["latent"]) == D
    assert "points" in body["final"]["trajectory"]


def test_scripted_http_session_improves_objective_and_replays(client, tmp_path):
    store_id = make_store(client)
    f = SphereObjective(center=np.zeros(D))
    r = client.post(
        "/sessions",
        json={
            "purpose": "representative",
            "condition_text": "walk forward slowly",
            "mode": "scripted",
            "seed": 11,
            "store_id": store_id,
        },
    )
    sid = r.json()["id"]
    logged, final_body = drive_with_oracle(client, sid, f)
    final = np.asarray(final_body["final"]["latent"])
    round0_best = min(f(z) for z in logged[0])
    assert f(final) < round0_best

    # Offline replay of the persisted transcript reproduces the stored final.
    meta = client.get(f"/sessions/{sid}").json()
    records = read_transcript(tmp_path / "sessions" / f"{sid}.transcript.jsonl")
    state = replay_transcript(
        OptimizerConfig.from_wire(meta["config"]),
        records,
        start=SessionStart.from_wire(meta["start"]),
    )
    assert np.array_equal(np.asarray(state.z_star_star), final)
    assert np.array_equal(np.asarray(meta["final_latent"]), final)

    # The finished session saved its result into the bound store.
    entry_id = final_body["final"]["saved_entry_id"]
    assert entry_id is not None
    store = client.get(f"/stores/{store_id}").json()
    saved = next(e for e in store["entries"] if e["id"] == entry_id)
    assert np.array_equal(np.asarray(saved["z_star_star"]), final)


def test_personalize_requires_resolvable_warm_start(client):
    store_id = make_store(client, entries=[entry_wire("stub", "a stub", z=None)])
    r = client.post(
        "/sessions",
        json={
            "purpose": "personalize",
            "condition_text": "a stub",
            "store_id": store_id,
            "seed": 1,
        },
    )
    assert r.status_code == 404  # matched entry has no latent yet
    r = client.post(
        "/sessions",
        json={"purpose": "personalize", "condition_text": "anything", "seed": 1},
    )
    assert r.status_code == 404  # no store at all
    r = client.post(
        "/sessions",
        json={
            "purpose": "personalize",
            "condition_text": "x",
            "store_id": store_id,
            "warm_start_id": "missing",
            "seed": 1,
        },
    )
    assert r.status_code == 404


def test_personalize_round0_is_local_to_warm_start(client):
    z_warm = [1.0, -1.0, 0.5, 0.0, 2.0, -0.5]
    store_id = make_store(client, entries=[entry_wire("e1", "march in place", z=z_warm)])
    r = client.post(
        "/sessions",
        json={
            "purpose": "personalize",
            "condition_text": "march in place but faster",
            "store_id": store_id,
            "warm_start_id": "e1",
            "seed": 4,
        },
    )
    assert r.status_code == 201
    sid = r.json()["id"]
    payload = client.get(f"/sessions/{sid}/round", params={"latents": True}).json()
    assert payload["stage"] == "stage2"
    mu3 = client.get(f"/sessions/{sid}").json()["config"]["mu3"]
    deviations = np.abs(np.asarray(payload["latents"]) - np.asarray(z_warm))
    assert deviations.max() <= 6 * mu3  # -6 sigma events are out of scope here


def test_personalize_full_two_stage_starts_in_stage1(client):
    z_warm = [0.0] * D
    store_id = make_store(client, entries=[entry_wire("e1", "squat", z=z_warm)])
    r = client.post(
        "/sessions",
        json={
            "purpose": "personalize",
            "condition_text": "squat lower",
            "store_id": store_id,
            "warm_start_id": "e1",
            "full_two_stage": True,
            "seed": 4,
        },
    )
    payload = r.json()["round"]
    assert payload["stage"] == "stage1"
    assert payload["allowed_feedback"] == ["full_ranking", "best_only"]


def test_personalize_overwrites_warm_entry(client):
    z_warm = [0.5] * D
    store_id = make_store(client, entries=[entry_wire("e1", "turn left", z=z_warm)])
    r = client.post(
        "/sessions",
        json={
            "purpose": "personalize",
            "condition_text": "turn left sharply",
            "store_id": store_id,
            "warm_start_id": "e1",
            "seed": 6,
        },
    )
    sid = r.json()["id"]
    r = client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "accept_and_exit", "ranking": [1]}
    )
    body = r.json()
    assert body["status"] == "finished"
    assert body["final"]["saved_entry_id"] == "e1"
    store = client.get(f"/stores/{store_id}").json()
    entry = next(e for e in store["entries"] if e["id"] == "e1")
    assert not np.array_equal(np.asarray(entry["z_star_star"]), np.asarray(z_warm))


def test_style_aware_rejects_warm_start(client):
    store_id = make_store(client)
    r = client.post(
        "/sessions",
        json={
            "purpose": "style_aware",
            "condition_text": "happily",
            "store_id": store_id,
            "warm_start_id": "whatever",
        },
    )
    assert r.status_code == 400


def test_session_resumes_from_disk(client, tmp_path):
    r = client.post(
        "/sessions",
        json={"purpose": "representative", "condition_text": "side steps", "seed": 13},
    )
    sid = r.json()["id"]
    client.post(
        f"/sessions/{sid}/feedback", json={"round": 0, "kind": "full_ranking", "ranking": [1, 0, 3, 2]}
    )
    before = client.get(f"/sessions/{sid}/round", params={"latents": True}).json()
    # Fresh app over the same data dir: state rebuilt by replay.
    settings = ServiceSettings(data_dir=tmp_path, latent_dim=D, embedding_dim=E, decoder_seed=3)
    with TestClient(create_app(settings)) as fresh:
        after = fresh.get(f"/sessions/{sid}/round", params={"latents": True}).json()
    assert after == before


# --- stores ------------------------------------------------------------------


def test_empty_data_dir_lists_no_stores(client):
    r = client.get("/stores")
    assert r.status_code == 200
    assert r.json() == {"stores": []}


def test_store_crud_and_select(client):
    entries = [
        entry_wire("w", "a person walks forward", z=[0.1] * D),
        entry_wire("k", "someone kicks with the right leg", z=[0.9] * D),
    ]
    store_id = make_store(client, entries=entries)
    assert client.get("/stores").json()["stores"] == [store_id]
    listing = client.get(f"/stores/{store_id}").json()
    assert [e["id"] for e in listing["entries"]] == ["w", "k"]
    r = client.post(
        f"/stores/{store_id}/select",
        json={"embedding": toy_embed("a person walks forward", dim=E).tolist()},
    )
    assert r.json()["id"] == "w"
    assert r.json()["similarity"] == pytest.approx(1.0)
    r = client.post(f"/stores/{store_id}/select", json={"text": "someone kicks with the right leg"})
    assert r.json()["id"] == "k"
    assert client.post("/stores", json={"id": store_id}).status_code == 409
    assert client.get("/stores/missing").status_code == 404
    assert client.post("/stores/missing/select", json={"text": "x"}).status_code == 404


def test_generate_degenerate_sigma_matches_decode(client):
    z = [0.3, -0.2, 0.8, 0.0, 0.5, -1.0]
    text = "a person walks forward"
    store_id = make_store(client, entries=[entry_wire("w", text, z=z, sigma=1e-12)])
    r = client.post(f"/stores/{store_id}/generate", json={"text": text, "count": 1})
    assert r.status_code == 200
    item = r.json()["items"][0]
    from rankopt import decode

    expected = decode(np.asarray(z), toy_embed(text, dim=E), seed=3)
    got = np.asarray(item["trajectory"]["points"])
    assert np.abs(got - expected.points).max() < 1e-6
    assert np.allclose(item["latent"], z, atol=1e-9)


def test_generate_sampling_statistics(client):
    z = [0.0] * D
    store_id = make_store(client, entries=[entry_wire("w", "stretch tall", z=z, sigma=0.2)])
    r = client.post(
        f"/stores/{store_id}/generate", json={"entry_id": "w", "count": 1000, "seed": 7}
    )
    latents = np.asarray([item["latent"] for item in r.json()["items"]])
    std = latents.std(axis=0)
    assert np.all(std > 0.17) and np.all(std < 0.23)


def test_generate_is_deterministic_given_seed(client):
    z = [0.1] * D
    store_id = make_store(client, entries=[entry_wire("w", "bow politely", z=z)])
    r1 = client.post(f"/stores/{store_id}/generate", json={"entry_id": "w", "count": 3, "seed": 5})
    r2 = client.post(f"/stores/{store_id}/generate", json={"entry_id": "w", "count": 3, "seed": 5})
    assert r1.json() == r2.json()


def test_generate_unknown_store_404(client):
    assert client.post("/stores/ghost/generate", json={"text": "x", "count": 1}).status_code == 404


def test_warm_start_locality_statistics():
    # >= 99% of polish-fan coordinates stay within 3*mu3 of the warm start.
    cfg = OptimizerConfig(d=8, m=4, mu3=0.1, elitism=False, seed=0)
    z = np.linspace(-1, 1, 8)
    within = total = 0
    for seed in range(2000):
        import dataclasses

        state = init_refinement_session(dataclasses.replace(cfg, seed=seed), z)
        dev = np.abs(state.candidates.points - z)
        within += int((dev <= 3 * cfg.mu3).sum())
        total += dev.size
    assert within / total >= 0.99
