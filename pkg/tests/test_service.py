import numpy as np
import pytest
from fastapi.testclient import TestClient

from mmms.masks import Click, JointMask, mask_from_json
from mmms.predictors import ClassicalPredictor
from mmms.predictors.base import PredictRequest
from mmms.protocol import EvalConfig
from mmms.service import create_app
from mmms.dataset import load_sample
from mmms.masks import joint_extract, iou, BinaryMask, joint_insert_revisit


@pytest.fixture()
def client(tiny_adjacent_dataset):
    app = create_app(tiny_adjacent_dataset, predictor_spec="classical",
                     default_cfg=EvalConfig(theta_iou=80, theta_avg=70))
    with TestClient(app) as client:
        yield client


def open_session(client, image_id=None):
    if image_id is None:
        image_id = client.get("/api/datasets").json()["images"][0]
    response = client.post("/api/sessions", json={"image_id": image_id})
    assert response.status_code == 200
    return response.json()


def surface_center(dataset, image_id, surface):
    sample = load_sample(dataset, image_id)
    pixels = np.argwhere(joint_extract(sample.gt_joint, surface).data)
    r, c = pixels.mean(axis=0).astype(int)
    # snap to an actual surface pixel (centroid of concave shapes can fall outside)
    best = pixels[np.abs(pixels - (r, c)).sum(axis=1).argmin()]
    return int(best[0]), int(best[1])


def test_dataset_listing(client, tiny_adjacent_dataset):
    payload = client.get("/api/datasets").json()
    assert payload["images"] == list(tiny_adjacent_dataset.images)
    assert payload["modalities"] == [{"name": "depth", "channels": 1}]


def test_image_endpoints(client, tiny_adjacent_dataset):
    image_id = tiny_adjacent_dataset.images[0]
    rgb = client.get(f"/api/images/{image_id}/rgb.png")
    assert rgb.status_code == 200
    assert rgb.headers["content-type"] == "image/png"
    depth = client.get(f"/api/images/{image_id}/modality/depth.png")
    assert depth.status_code == 200
    missing = client.get(f"/api/images/{image_id}/modality/thermal.png")
    assert missing.status_code == 404


def test_click_returns_mask_and_counters(client, tiny_adjacent_dataset):
    created = open_session(client)
    image_id = client.get(f"/api/sessions/{created['session_id']}/state").json()["image_id"]
    y, x = surface_center(tiny_adjacent_dataset, image_id, 1)
    payload = client.post(
        f"/api/sessions/{created['session_id']}/clicks",
        json={"surface": 1, "y": y, "x": x, "positive": True},
    ).json()
    assert payload["clicks_used"] == 1
    mask = mask_from_json(payload["mask"])
    assert mask.area() > 0
    assert 0.0 <= payload["iou"] <= 100.0
    assert 0.0 <= payload["avg_iou"] <= 100.0


def test_undo_restores_previous_state(client, tiny_adjacent_dataset):
    created = open_session(client)
    sid = created["session_id"]
    state0 = client.get(f"/api/sessions/{sid}/state").json()
    image_id = state0["image_id"]
    y1, x1 = surface_center(tiny_adjacent_dataset, image_id, 1)
    client.post(f"/api/sessions/{sid}/clicks",
                json={"surface": 1, "y": y1, "x": x1, "positive": True})
    state1 = client.get(f"/api/sessions/{sid}/state").json()
    y2, x2 = surface_center(tiny_adjacent_dataset, image_id, 2)
    client.post(f"/api/sessions/{sid}/clicks",
                json={"surface": 2, "y": y2, "x": x2, "positive": True})
    undone = client.post(f"/api/sessions/{sid}/undo").json()
    assert undone["surfaces"] == state1["surfaces"]
    again = client.post(f"/api/sessions/{sid}/undo").json()
    assert again["surfaces"] == state0["surfaces"]
    empty = client.post(f"/api/sessions/{sid}/undo")
    assert empty.status_code == 409


def test_select_worst_is_argmin(client, tiny_adjacent_dataset):
    created = open_session(client)
    sid = created["session_id"]
    image_id = client.get(f"/api/sessions/{sid}/state").json()["image_id"]
    y, x = surface_center(tiny_adjacent_dataset, image_id, 1)
    client.post(f"/api/sessions/{sid}/clicks",
                json={"surface": 1, "y": y, "x": x, "positive": True})
    state = client.get(f"/api/sessions/{sid}/state").json()
    ious = {s["id"]: s["iou"] for s in state["surfaces"]}
    expected = min(ious, key=lambda k: (ious[k], k))
    worst = client.post(f"/api/sessions/{sid}/select-worst").json()
    assert worst["surface"] == expected


def test_session_replay_matches_protocol_primitives(client, tiny_adjacent_dataset):
    created = open_session(client)
    sid = created["session_id"]
    state = client.get(f"/api/sessions/{sid}/state").json()
    image_id = state["image_id"]
    clicks = []
    for surface in (1, 2, 1):
        y, x = surface_center(tiny_adjacent_dataset, image_id, surface)
        client.post(f"/api/sessions/{sid}/clicks",
                    json={"surface": surface, "y": y, "x": x, "positive": True})
        clicks.append((surface, Click(y, x, True)))
    final = client.get(f"/api/sessions/{sid}/state").json()

    # independent replay through the protocol primitives
    sample = load_sample(tiny_adjacent_dataset, image_id)
    predictor = ClassicalPredictor()
    predictor.prepare(sample)
    joint = JointMask.zeros(sample.height, sample.width, sample.gt_joint.surface_count)
    accumulated = {k: [] for k in range(1, sample.gt_joint.surface_count + 1)}
    for surface, click in clicks:
        accumulated[surface].append(click)
        prev = joint_extract(joint, surface)
        response = predictor.predict(
            PredictRequest(tuple(accumulated[surface]), prev, surface, image_id)
        )
        mask = BinaryMask(response.probabilities >= 0.5)
        joint = joint_insert_revisit(joint, surface, mask)

    for entry in final["surfaces"]:
        assert mask_from_json(entry["mask"]) == joint_extract(joint, entry["id"])


def test_validation_errors(client):
    created = open_session(client)
    sid = created["session_id"]
    assert client.post(f"/api/sessions/{sid}/clicks",
                       json={"surface": 99, "y": 0, "x": 0, "positive": True}).status_code == 422
    assert client.post(f"/api/sessions/{sid}/clicks",
                       json={"surface": 1, "y": 999, "x": 0, "positive": True}).status_code == 422
    assert client.get("/api/sessions/nope/state").status_code == 404


def test_budget_locks_surface(tiny_adjacent_dataset):
    app = create_app(tiny_adjacent_dataset, predictor_spec="classical",
                     default_cfg=EvalConfig(theta_iou=80, theta_avg=70, n_max=1))
    with TestClient(app) as client:
        created = open_session(client)
        sid = created["session_id"]
        image_id = client.get(f"/api/sessions/{sid}/state").json()["image_id"]
        y, x = surface_center(tiny_adjacent_dataset, image_id, 1)
        first = client.post(f"/api/sessions/{sid}/clicks",
                            json={"surface": 1, "y": y, "x": x, "positive": True})
        assert first.status_code == 200
        second = client.post(f"/api/sessions/{sid}/clicks",
                             json={"surface": 1, "y": y, "x": x, "positive": True})
        assert second.status_code == 409


def test_static_ui_mount(tiny_adjacent_dataset, tmp_path):
    (tmp_path / "index.html").write_text("<html><body>annotation ui</body></html>")
    app = create_app(tiny_adjacent_dataset, static_dir=tmp_path)
    with TestClient(app) as client:
        page = client.get("/")
        assert page.status_code == 200
        assert "annotation ui" in page.text
        assert client.get("/api/datasets").status_code == 200  # api still wins


def test_gt_overlay_endpoint(client, tiny_adjacent_dataset):
    image_id = tiny_adjacent_dataset.images[0]
    gt = client.get(f"/api/images/{image_id}/gt.png")
    assert gt.status_code == 200
    assert gt.headers["content-type"] == "image/png"


def test_sessions_are_isolated(client, tiny_adjacent_dataset):
    a = open_session(client, tiny_adjacent_dataset.images[0])
    b = open_session(client, tiny_adjacent_dataset.images[1])
    image_id = tiny_adjacent_dataset.images[0]
    y, x = surface_center(tiny_adjacent_dataset, image_id, 1)
    client.post(f"/api/sessions/{a['session_id']}/clicks",
                json={"surface": 1, "y": y, "x": x, "positive": True})
    state_b = client.get(f"/api/sessions/{b['session_id']}/state").json()
    assert all(s["clicks_used"] == 0 for s in state_b["surfaces"])
