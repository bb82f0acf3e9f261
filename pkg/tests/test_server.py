import json
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from echoeval.scales import Scale
from echoeval.screening import SchemaInvalid, submission_to_dict
from echoeval.server import (
    CampaignStore,
    LeaseExpired,
    NoTasksAvailable,
    NotFound,
    WorkerBanned,
    create_app,
)
from conftest import build_small_campaign, write_campaign_dir


class Clock:
    def __init__(self, now=1000.0):
        self.now = now

    def __call__(self):
        return self.now

    def advance(self, dt):
        self.now += dt


def make_store(tmp_path, clock=None, n_clips=24, votes_target=2, task_size=8, **kw):
    _, _, _, _, manifests = build_small_campaign(
        n_clips=n_clips, votes_target=votes_target, task_size=task_size
    )
    campaign_dir, condition_of = write_campaign_dir(tmp_path, manifests)
    store = CampaignStore(campaign_dir, clock=clock or Clock(), **kw)
    return store, manifests, condition_of


def answer_docs(manifest, trapping_score=None, gold_score=None, default=3):
    answers = []
    for clip in manifest.clips:
        for scale in manifest.scales:
            if clip == manifest.trapping.clip_id and scale == manifest.trapping.scale:
                score = manifest.trapping.expected_answer if trapping_score is None else trapping_score
            elif any(clip == g.clip_id and scale == g.scale for g in manifest.gold):
                gold = next(g for g in manifest.gold if g.clip_id == clip)
                score = gold.expected_score if gold_score is None else gold_score
            else:
                score = default
            answers.append({"clip_id": clip, "scale": scale.value, "score": score})
    return answers


def submission_doc(manifest, worker, **kw):
    doc = {"worker_id": worker, "task_id": manifest.task_id, "answers": answer_docs(manifest)}
    doc.update(kw)
    return doc


# --- leasing -----------------------------------------------------------------

def test_next_task_leases_in_build_order(tmp_path):
    store, manifests, _ = make_store(tmp_path)
    manifest, flags, lease = store.next_task("w1")
    assert manifest.task_id == manifests[0].task_id
    assert flags.qualification and flags.setup and flags.training
    assert lease.worker_id == "w1"
    assert lease.expires_at == lease.leased_at + store.lease_timeout_s
    store.close()


def test_repeat_next_task_returns_same_lease(tmp_path):
    store, _, _ = make_store(tmp_path)
    m1, _, lease1 = store.next_task("w1")
    m2, _, lease2 = store.next_task("w1")
    assert m1.task_id == m2.task_id
    assert lease1 == lease2
    events = (store.dir / "events.jsonl").read_text().splitlines()
    assert len(events) == 1  # no second lease event
    store.close()


def test_workers_get_disjoint_tasks(tmp_path):
    store, _, _ = make_store(tmp_path)
    a, _, _ = store.next_task("w1")
    b, _, _ = store.next_task("w2")
    assert a.task_id != b.task_id
    store.close()


def test_expired_lease_frees_the_task(tmp_path):
    clock = Clock()
    store, _, _ = make_store(tmp_path, clock=clock, lease_timeout_s=60.0)
    a, _, _ = store.next_task("w1")
    clock.advance(59.0)
    b, _, _ = store.next_task("w2")
    assert b.task_id != a.task_id
    clock.advance(2.0)  # w1's lease is now dead
    c, _, _ = store.next_task("w3")
    assert c.task_id == a.task_id
    store.close()


def test_exhausted_campaign_raises(tmp_path):
    store, manifests, _ = make_store(tmp_path)
    for i, m in enumerate(manifests):
        worker = f"w{i}"
        got, _, _ = store.next_task(worker)
        store.submit(submission_doc(got, worker))
    with pytest.raises(NoTasksAvailable):
        store.next_task("late")
    store.close()


def test_concurrent_leases_never_collide(tmp_path):
    store, _, _ = make_store(tmp_path, n_clips=40, votes_target=20, task_size=8)
    workers = [f"w{i:03d}" for i in range(100)]
    with ThreadPoolExecutor(max_workers=32) as pool:
        got = list(pool.map(lambda w: store.next_task(w)[0].task_id, workers))
    assert len(set(got)) == 100
    store.close()


# --- submissions -----------------------------------------------------------------

def test_submit_happy_path_and_idempotency(tmp_path):
    store, _, _ = make_store(tmp_path)
    manifest, _, _ = store.next_task("w1")
    ack = store.submit(submission_doc(manifest, "w1"))
    assert ack == {
        "accepted_for_processing": True,
        "submission_id": f"w1:{manifest.task_id}",
        "duplicate": False,
    }
    again = store.submit(submission_doc(manifest, "w1"))
    assert again["duplicate"] is True
    events = [json.loads(l) for l in (store.dir / "events.jsonl").read_text().splitlines()]
    assert [e["type"] for e in events] == ["lease", "submission"]
    store.close()


def test_completed_task_is_never_reserved(tmp_path):
    store, _, _ = make_store(tmp_path)
    manifest, _, _ = store.next_task("w1")
    store.submit(submission_doc(manifest, "w1"))
    nxt, _, _ = store.next_task("w1")
    assert nxt.task_id != manifest.task_id
    store.close()


def test_submit_without_lease_is_rejected(tmp_path):
    store, manifests, _ = make_store(tmp_path)
    with pytest.raises(LeaseExpired):
        store.submit(submission_doc(manifests[0], "w1"))
    store.close()


def test_submit_after_expiry_is_rejected(tmp_path):
    clock = Clock()
    store, _, _ = make_store(tmp_path, clock=clock, lease_timeout_s=60.0)
    manifest, _, _ = store.next_task("w1")
    clock.advance(61.0)
    with pytest.raises(LeaseExpired):
        store.submit(submission_doc(manifest, "w1"))
    store.close()


def test_submit_on_someone_elses_lease_is_rejected(tmp_path):
    store, _, _ = make_store(tmp_path)
    manifest, _, _ = store.next_task("w1")
    with pytest.raises(LeaseExpired):
        store.submit(submission_doc(manifest, "w2"))
    store.close()


def test_submit_validates_schema(tmp_path):
    store, _, _ = make_store(tmp_path)
    manifest, _, _ = store.next_task("w1")
    bad = submission_doc(manifest, "w1")
    bad["answers"][0]["score"] = 9
    with pytest.raises(SchemaInvalid):
        store.submit(bad)
    stray = submission_doc(manifest, "w1")
    stray["task_id"] = "ghost"
    with pytest.raises(SchemaInvalid):
        store.submit(stray)
    store.close()


def test_repeated_trapping_failures_ban_worker(tmp_path):
    store, _, _ = make_store(tmp_path)
    m1, _, _ = store.next_task("w1")
    store.submit(submission_doc(m1, "w1") | {"answers": answer_docs(m1, trapping_score_wrong(m1))})
    m2, _, _ = store.next_task("w1")
    store.submit(submission_doc(m2, "w1") | {"answers": answer_docs(m2, trapping_score_wrong(m2))})
    with pytest.raises(WorkerBanned):
        store.next_task("w1")
    store.close()


def trapping_score_wrong(manifest):
    expected = manifest.trapping.expected_answer
    return 1 if expected != 1 else 2


def test_one_trapping_failure_does_not_ban(tmp_path):
    store, _, _ = make_store(tmp_path)
    m1, _, _ = store.next_task("w1")
    store.submit(submission_doc(m1, "w1") | {"answers": answer_docs(m1, trapping_score_wrong(m1))})
    m2, _, _ = store.next_task("w1")
    assert m2.task_id != m1.task_id
    store.close()


# --- section bookkeeping --------------------------------------------------------

def write_knobs(campaign_dir, **knobs):
    with open(campaign_dir / "campaign.json", "w") as fh:
        json.dump(knobs, fh)


def test_sections_clear_after_passing_answers(tmp_path):
    _, _, _, _, manifests = build_small_campaign()
    campaign_dir, _ = write_campaign_dir(tmp_path, manifests)
    write_knobs(
        campaign_dir,
        qualification_truth=["111", "222", "333"],
        environment_truth=[0, 1, 0],
        setup_period_s=100.0,
        training_period_s=200.0,
    )
    clock = Clock()
    store = CampaignStore(campaign_dir, clock=clock)

    manifest, flags, _ = store.next_task("w1")
    assert flags == type(flags)(True, True, True)
    store.submit(submission_doc(
        manifest, "w1",
        qualification_results=["111", "222", "333"],
        setup_results=[0, 1, 0],
    ))

    _, flags, _ = store.next_task("w1")
    assert (flags.qualification, flags.setup, flags.training) == (False, False, False)

    clock.advance(100.0)
    _, flags, _ = store.next_task("w1")
    assert (flags.qualification, flags.setup, flags.training) == (False, True, False)

    clock.advance(100.0)
    _, flags, _ = store.next_task("w1")
    assert (flags.qualification, flags.setup, flags.training) == (False, True, True)
    store.close()


def test_failed_sections_stay_due(tmp_path):
    _, _, _, _, manifests = build_small_campaign()
    campaign_dir, _ = write_campaign_dir(tmp_path, manifests)
    write_knobs(
        campaign_dir,
        qualification_truth=["111", "222", "333"],
        environment_truth=[0, 1, 0],
    )
    store = CampaignStore(campaign_dir, clock=Clock())
    manifest, _, _ = store.next_task("w1")
    store.submit(submission_doc(
        manifest, "w1",
        qualification_results=["000", "000", "000"],
        setup_results=[1, 0, 1],
    ))
    _, flags, _ = store.next_task("w1")
    assert flags.qualification and flags.setup
    assert not flags.training  # submitting a task counts as trained
    store.close()


def test_lease_timeout_knob_from_campaign_json(tmp_path):
    _, _, _, _, manifests = build_small_campaign()
    campaign_dir, _ = write_campaign_dir(tmp_path, manifests)
    write_knobs(campaign_dir, lease_timeout_s=120.0)
    store = CampaignStore(campaign_dir, clock=Clock())
    _, _, lease = store.next_task("w1")
    assert lease.expires_at - lease.leased_at == 120.0
    store.close()


# --- durability ------------------------------------------------------------------

def test_replay_restores_identical_state(tmp_path):
    clock = Clock()
    store, _, _ = make_store(tmp_path, clock=clock)
    m1, _, _ = store.next_task("w1")
    store.submit(submission_doc(m1, "w1"))
    m2, _, lease2 = store.next_task("w2")
    m3, _, _ = store.next_task("w1")
    store.submit(submission_doc(m3, "w1") | {"answers": answer_docs(m3, trapping_score_wrong(m3))})
    before = store.results()
    store.close()

    restored = CampaignStore(store.dir, clock=clock)
    assert restored.completed == store.completed
    assert set(restored.submissions) == set(store.submissions)
    assert restored.leases[m2.task_id] == lease2
    assert restored.trapping_failures == store.trapping_failures
    assert restored.sessions.keys() == store.sessions.keys()
    assert restored.results() == before
    restored.close()


def test_snapshot_written_and_informational(tmp_path):
    store, _, _ = make_store(tmp_path, snapshot_every=2)
    m1, _, _ = store.next_task("w1")
    store.submit(submission_doc(m1, "w1"))
    snap_path = store.dir / "snapshot.json"
    assert snap_path.exists()
    snap = json.loads(snap_path.read_text())
    assert snap["completed_tasks"] == [m1.task_id]
    snap_path.unlink()  # restore must not need it
    restored = CampaignStore(store.dir, clock=Clock())
    assert restored.completed == {m1.task_id}
    restored.close()
    store.close()


# --- results ----------------------------------------------------------------------

def test_results_aggregate_accepted_votes(tmp_path):
    store, _, _ = make_store(tmp_path)
    manifest, _, _ = store.next_task("w1")
    store.submit(submission_doc(manifest, "w1"))
    results = store.results()
    assert results["screening"]["accepted"] == 1
    assert results["screening"]["rejected"] == 0
    n_rating = len(manifest.rating_clip_ids) * len(manifest.scales)
    assert results["n_votes"] == n_rating
    assert results["condition_scores"]
    for cs in results["condition_scores"]:
        assert cs["mean"] == 3.0
        assert cs["scale"] in {s.value for s in Scale}
    store.close()


def test_results_reject_trapping_failures(tmp_path):
    store, _, _ = make_store(tmp_path)
    manifest, _, _ = store.next_task("w1")
    store.submit(submission_doc(manifest, "w1") | {
        "answers": answer_docs(manifest, trapping_score_wrong(manifest)),
    })
    results = store.results()
    assert results["screening"]["accepted"] == 0
    assert results["screening"]["totals"]["TrappingFailed"] == 1
    assert results["n_votes"] == 0
    assert results["condition_scores"] == []
    store.close()


# --- clips ---------------------------------------------------------------------------

def test_clip_paths_resolve(tmp_path):
    store, manifests, _ = make_store(tmp_path)
    clip = manifests[0].clips[0]
    path = store.get_clip_path(clip)
    assert path.exists()
    with pytest.raises(NotFound):
        store.get_clip_path("ghost")
    store.close()


# --- HTTP endpoints ---------------------------------------------------------------

@pytest.fixture
def client(tmp_path):
    store, manifests, _ = make_store(tmp_path)
    app = create_app(store)
    with TestClient(app) as tc:
        yield tc, store, manifests
    store.close()


def test_http_task_next(client):
    tc, store, manifests = client
    resp = tc.get("/api/task/next", params={"worker": "w1"})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["task_id"] == manifests[0].task_id
    assert set(doc) == {
        "task_id", "clips", "scales", "scenario", "pay_usd", "section_flags", "lease_expires_at",
    }
    body = resp.text
    assert "expected" not in body and "trapping" not in body and "seed" not in body


def test_http_task_next_requires_worker(client):
    tc, _, _ = client
    assert tc.get("/api/task/next").status_code == 422


def test_http_submission_flow(client):
    tc, store, _ = client
    doc = tc.get("/api/task/next", params={"worker": "w1"}).json()
    manifest = store.manifests[doc["task_id"]]
    body = submission_doc(manifest, "w1")
    resp = tc.post("/api/submission", json=body)
    assert resp.status_code == 200
    assert resp.json()["accepted_for_processing"] is True
    assert resp.json()["duplicate"] is False
    again = tc.post("/api/submission", json=body)
    assert again.status_code == 200
    assert again.json()["duplicate"] is True


def test_http_submission_errors(client):
    tc, _, manifests = client
    no_lease = submission_doc(manifests[0], "w1")
    assert tc.post("/api/submission", json=no_lease).status_code == 409

    tc.get("/api/task/next", params={"worker": "w1"})
    bad = submission_doc(manifests[0], "w1")
    bad["answers"][0]["score"] = "five"
    resp = tc.post("/api/submission", json=bad)
    assert resp.status_code == 422
    assert resp.json()["error"] == "SchemaInvalid"

    resp = tc.post("/api/submission", content=b"{not json", headers={"content-type": "application/json"})
    assert resp.status_code == 422


def test_http_clip_serving(client):
    tc, store, manifests = client
    clip = manifests[0].clips[0]
    resp = tc.get(f"/api/clip/{clip}")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "audio/wav"
    assert resp.content == store.get_clip_path(clip).read_bytes()
    assert tc.get("/api/clip/ghost").status_code == 404


def test_http_admin_results(client):
    tc, store, _ = client
    doc = tc.get("/api/task/next", params={"worker": "w1"}).json()
    manifest = store.manifests[doc["task_id"]]
    tc.post("/api/submission", json=submission_doc(manifest, "w1"))
    resp = tc.get("/api/admin/results")
    assert resp.status_code == 200
    results = resp.json()
    assert results["screening"]["accepted"] == 1
    assert results["n_votes"] > 0


def test_http_banned_worker_gets_403(client):
    tc, store, _ = client
    for _ in range(2):
        doc = tc.get("/api/task/next", params={"worker": "w1"}).json()
        manifest = store.manifests[doc["task_id"]]
        body = submission_doc(manifest, "w1")
        body["answers"] = answer_docs(manifest, trapping_score_wrong(manifest))
        assert tc.post("/api/submission", json=body).status_code == 200
    resp = tc.get("/api/task/next", params={"worker": "w1"})
    assert resp.status_code == 403
    assert resp.json()["error"] == "WorkerBanned"


def test_http_campaign_exhaustion_gives_404(client):
    tc, store, manifests = client
    for i in range(len(manifests)):
        worker = f"w{i}"
        doc = tc.get("/api/task/next", params={"worker": worker}).json()
        manifest = store.manifests[doc["task_id"]]
        tc.post("/api/submission", json=submission_doc(manifest, worker))
    assert tc.get("/api/task/next", params={"worker": "late"}).status_code == 404
