"""HTTP surface: auth, error mapping, lifecycle parity, idempotent
reads, restart transparency, and the node-status event stream."""

import json

import pytest
from fastapi.testclient import TestClient

from sdrlab.gateway.app import Role, create_app
from sdrlab.inventory import default_inventory
from sdrlab.service import Orchestrator

USER = {"Authorization": "Bearer user-token"}
ADMIN = {"Authorization": "Bearer admin-token"}

SCENARIO = """\
carrier_hz: 2.45e9
noise_floor_dbm_hz: -174.0
radios:
  - {id: alpha, kind: Physical, position_m: [0.0, 0.0, 1.5]}
  - {id: beta, kind: Physical, position_m: [100.0, 0.0, 1.5]}
model: {kind: FreeSpace}
"""


class FakeClock:
    def __init__(self, t=1000.0):
        self.t = t

    def __call__(self):
        return self.t


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def orch(tmp_path, clock):
    return Orchestrator(default_inventory(), tmp_path / "state", clock=clock)


@pytest.fixture
def client(orch):
    app = create_app(
        orch,
        {
            "user-token": ("alice", Role.USER),
            "admin-token": ("boss", Role.ADMIN),
        },
    )
    return TestClient(app)


def reservation_body(start=1000.0, hours=1.0, n_usrps=2, path="Emulator", **kw):
    spec = {
        "compute": {"cpu_cores": kw.get("cores", 2), "ram_gb": kw.get("ram", 8.0)},
        "radio": {
            "n_usrps": n_usrps,
            "path": path,
            "channels": kw.get(
                "channels", [{"center_hz": 2.45e9, "bw_hz": 20e6}]
            ),
        },
        "network": {"requested_bps": kw.get("bps", 1e9)},
    }
    return {"start_utc": start, "end_utc": start + hours * 3600.0, "spec": spec}


def make_confirmed(client, body=None):
    res = client.post("/v1/reservations", headers=USER, json=body or reservation_body())
    assert res.status_code == 201, res.text
    rid = res.json()["id"]
    out = client.post(f"/v1/reservations/{rid}/evaluate", headers=USER).json()
    assert out["state"] == "Confirmed", out
    return rid


# ---------------------------------------------------------------------- auth


def test_missing_token_is_401(client):
    r = client.get("/v1/inventory")
    assert r.status_code == 401
    assert r.json()["error"] == "AuthError"


def test_unknown_token_is_401(client):
    r = client.get("/v1/inventory", headers={"Authorization": "Bearer nope"})
    assert r.status_code == 401


def test_review_requires_admin_role(client):
    r = client.post("/v1/reservations/res-0001/review", headers=USER,
                    json={"approve": True})
    assert r.status_code == 403
    assert r.json()["error"] == "AuthError"


def test_admin_token_passes_user_endpoints(client):
    assert client.get("/v1/capacity", headers=ADMIN).status_code == 200


def test_inventory_reload_requires_admin(client):
    r = client.post("/v1/inventory/reload", headers=USER, json={"yaml": ""})
    assert r.status_code == 403


# -------------------------------------------------------------- error mapping


def test_ota_5ghz_reservation_maps_to_400_license_error(client):
    body = reservation_body(
        path="OverTheAir", channels=[{"center_hz": 5.0e9, "bw_hz": 20e6}]
    )
    r = client.post("/v1/reservations", headers=USER, json=body)
    assert r.status_code == 400
    doc = r.json()
    assert doc["error"] == "LicenseError"
    assert "detail" in doc


def test_unknown_reservation_maps_to_404(client):
    r = client.get("/v1/reservations/res-9999", headers=USER)
    assert r.status_code == 404
    assert r.json()["error"] == "NotFoundError"


def test_wrong_state_maps_to_409(client):
    rid = client.post(
        "/v1/reservations", headers=USER, json=reservation_body()
    ).json()["id"]
    r = client.post(f"/v1/reservations/{rid}/activate", headers=USER)
    assert r.status_code == 409
    assert r.json()["error"] == "StateError"


def test_over_capacity_maps_to_422(client):
    body = reservation_body(n_usrps=9)
    r = client.post("/v1/reservations", headers=USER, json=body)
    assert r.status_code == 422
    assert r.json()["error"] == "CapacityError"


def test_malformed_json_body_maps_to_400(client):
    r = client.post(
        "/v1/reservations", headers={**USER, "Content-Type": "application/json"},
        content=b"{not json",
    )
    assert r.status_code == 400
    assert r.json()["error"] == "ParseError"


def test_bad_utilization_range_maps_to_400(client):
    r = client.get(
        "/v1/utilization", headers=USER,
        params={"from": 2000.0, "to": 1000.0, "bucket": 100.0},
    )
    assert r.status_code == 400
    assert r.json()["error"] == "SpecError"


def test_missing_query_params_are_a_400_validation_error(client):
    r = client.get("/v1/utilization", headers=USER)
    assert r.status_code == 400
    assert r.json()["error"] == "ValidationError"


# ------------------------------------------------------------------ lifecycle


def test_full_lifecycle_over_http(client, clock):
    rid = make_confirmed(client)
    out = client.post(f"/v1/reservations/{rid}/activate", headers=USER).json()
    assert out["state"] == "Active"

    put = client.put("/v1/scenario", headers=USER, json={"yaml": SCENARIO})
    assert put.status_code == 200

    exp = client.post("/v1/experiments", headers=USER,
                      json={"reservation_id": rid}).json()
    run = client.post(
        "/v1/emulation/run", headers=USER,
        json={"reservation_id": rid, "experiment_id": exp["experiment_id"],
              "duration_s": 0.3, "step_s": 0.1, "samples_per_step": 1024},
    ).json()
    assert run["steps"] == 3
    assert run["records"] == 3 * 2 * 2  # steps x radios x slots

    rows = client.get(
        f"/v1/experiments/{exp['experiment_id']}/records",
        headers=USER, params={"node_id": "alpha"},
    ).json()["records"]
    assert len(rows) == 6
    assert all(r["node_id"] == "alpha" for r in rows)

    seal = client.post(
        f"/v1/experiments/{exp['experiment_id']}/seal", headers=USER
    ).json()
    assert len(seal["digest"]) == 64

    clock.t = 2800.0
    out = client.post(f"/v1/reservations/{rid}/complete", headers=USER).json()
    assert out["state"] == "Completed"

    survey = client.post(
        f"/v1/reservations/{rid}/survey", headers=USER,
        json={"responses": ["smooth", "none", "yes"]},
    )
    assert survey.status_code == 200

    util = client.get(
        "/v1/utilization", headers=USER,
        params={"from": 1000.0, "to": 4600.0, "bucket": 3600.0},
    ).json()
    assert util["occupancy"]["sdr_emulator"][0] > 0


def test_pending_review_approved_by_admin(client):
    body = reservation_body(hours=30.0)  # beyond the auto-approve duration
    rid = client.post("/v1/reservations", headers=USER, json=body).json()["id"]
    out = client.post(f"/v1/reservations/{rid}/evaluate", headers=USER).json()
    assert out["state"] == "PendingReview"
    out = client.post(
        f"/v1/reservations/{rid}/review", headers=ADMIN, json={"approve": True}
    ).json()
    assert out["state"] == "Confirmed"


def test_denied_review(client):
    body = reservation_body(hours=30.0)
    rid = client.post("/v1/reservations", headers=USER, json=body).json()["id"]
    client.post(f"/v1/reservations/{rid}/evaluate", headers=USER)
    out = client.post(
        f"/v1/reservations/{rid}/review", headers=ADMIN, json={"approve": False}
    ).json()
    assert out["state"] == "Denied"


def test_schedule_window_filter(client):
    make_confirmed(client)
    rows = client.get("/v1/schedule", headers=USER).json()
    assert len(rows) == 1
    rows = client.get(
        "/v1/schedule", headers=USER, params={"from": 10000.0, "to": 20000.0}
    ).json()
    assert rows == []


def test_scenario_roundtrips_byte_identical(client):
    client.put("/v1/scenario", headers=USER, json={"yaml": SCENARIO})
    out = client.get("/v1/scenario", headers=USER).json()
    assert out["yaml"] == SCENARIO


def test_records_can_be_appended_via_api(client):
    rid = make_confirmed(client)
    client.post(f"/v1/reservations/{rid}/activate", headers=USER)
    exp = client.post("/v1/experiments", headers=USER,
                      json={"reservation_id": rid}).json()["experiment_id"]
    r = client.post(
        f"/v1/experiments/{exp}/records", headers=USER,
        json={"records": [
            {"t_utc": 1.0, "node_id": "n1", "location": [0, 0, 0],
             "freq_hz": 2.4e9, "azimuth_deg": 10.0, "value_dbm": -50.0},
            {"t_utc": 2.0, "node_id": "n1", "location": "bench",
             "freq_hz": 2.4e9, "azimuth_deg": 10.0, "value_dbm": -51.0},
        ]},
    )
    assert r.status_code == 200
    assert r.json()["appended"] == 2
    rows = client.get(f"/v1/experiments/{exp}/records", headers=USER).json()["records"]
    assert [row["t_utc"] for row in rows] == [1.0, 2.0]
    assert rows[1]["location"] == "bench"


def test_out_of_order_record_maps_to_409(client):
    rid = make_confirmed(client)
    client.post(f"/v1/reservations/{rid}/activate", headers=USER)
    exp = client.post("/v1/experiments", headers=USER,
                      json={"reservation_id": rid}).json()["experiment_id"]
    ok = {"t_utc": 5.0, "node_id": "n1", "location": [0, 0, 0],
          "freq_hz": 2.4e9, "azimuth_deg": 0.0, "value_dbm": -50.0}
    client.post(f"/v1/experiments/{exp}/records", headers=USER,
                json={"records": [ok]})
    r = client.post(
        f"/v1/experiments/{exp}/records", headers=USER,
        json={"records": [dict(ok, t_utc=4.0)]},
    )
    assert r.status_code == 409
    assert r.json()["error"] == "OrderError"


def test_inventory_reload_blocked_while_reservations_in_flight(client):
    make_confirmed(client)
    r = client.post(
        "/v1/inventory/reload", headers=ADMIN,
        json={"yaml": "compute_nodes:\n  - {id: node-01}\n"},
    )
    assert r.status_code == 409


# ------------------------------------------------------------ read idempotence


def test_repeated_gets_are_byte_identical(client):
    make_confirmed(client)
    for path, params in [
        ("/v1/inventory", None),
        ("/v1/capacity", None),
        ("/v1/schedule", None),
        ("/v1/utilization", {"from": 1000.0, "to": 4600.0, "bucket": 900.0}),
    ]:
        a = client.get(path, headers=USER, params=params)
        b = client.get(path, headers=USER, params=params)
        assert a.content == b.content, path


# --------------------------------------------------------- restart transparency


def test_restart_replays_identical_schedule(tmp_path, clock):
    inv = default_inventory()
    orch1 = Orchestrator(inv, tmp_path / "state", clock=clock)
    app1 = create_app(orch1, {"user-token": ("alice", Role.USER)})
    c1 = TestClient(app1)
    rid = make_confirmed(c1)
    c1.post(f"/v1/reservations/{rid}/activate", headers=USER)
    before = c1.get("/v1/schedule", headers=USER)

    orch2 = Orchestrator(inv, tmp_path / "state", clock=clock)
    app2 = create_app(orch2, {"user-token": ("alice", Role.USER)})
    c2 = TestClient(app2)
    after = c2.get("/v1/schedule", headers=USER)
    assert after.content == before.content

    # the replayed side keeps working: complete and survey as usual
    clock.t = 2000.0
    out = c2.post(f"/v1/reservations/{rid}/complete", headers=USER)
    assert out.status_code == 200


def test_restart_preserves_experiment_archives(tmp_path, clock):
    inv = default_inventory()
    orch1 = Orchestrator(inv, tmp_path / "state", clock=clock)
    app1 = create_app(orch1, {"user-token": ("alice", Role.USER)})
    c1 = TestClient(app1)
    rid = make_confirmed(c1)
    c1.post(f"/v1/reservations/{rid}/activate", headers=USER)
    exp = c1.post("/v1/experiments", headers=USER,
                  json={"reservation_id": rid}).json()["experiment_id"]
    c1.post(f"/v1/experiments/{exp}/records", headers=USER, json={"records": [
        {"t_utc": 1.0, "node_id": "n1", "location": [0, 0, 0],
         "freq_hz": 2.4e9, "azimuth_deg": 0.0, "value_dbm": -42.0}]})

    orch2 = Orchestrator(inv, tmp_path / "state", clock=clock)
    c2 = TestClient(create_app(orch2, {"user-token": ("alice", Role.USER)}))
    rows = c2.get(f"/v1/experiments/{exp}/records", headers=USER).json()["records"]
    assert len(rows) == 1 and rows[0]["value_dbm"] == -42.0


# -------------------------------------------------------------- event stream


def parse_sse(text):
    events = []
    for block in text.strip().split("\n\n"):
        ev_id, data = None, None
        for line in block.splitlines():
            if line.startswith("id: "):
                ev_id = int(line[4:])
            elif line.startswith("data: "):
                data = json.loads(line[6:])
        if data is not None:
            events.append((ev_id, data))
    return events


def test_activation_emits_node_events_on_stream(client):
    rid = make_confirmed(client)
    client.post(f"/v1/reservations/{rid}/activate", headers=USER)
    r = client.get(
        "/v1/events", headers=USER, params={"timeout_s": 0.05}
    )
    assert r.status_code == 200
    events = parse_sse(r.text)
    assert len(events) == 2  # radio host node and vm host node
    states = {e["node_id"]: e["state"] for _, e in events}
    assert set(states.values()) == {"Active"}
    assert all(e["owner"] == rid for _, e in events)


def test_event_stream_resumes_after_last_id(client, clock):
    rid = make_confirmed(client)
    client.post(f"/v1/reservations/{rid}/activate", headers=USER)
    first = parse_sse(
        client.get("/v1/events", headers=USER, params={"timeout_s": 0.05}).text
    )
    last_id = first[-1][0]
    clock.t = 2000.0
    client.post(f"/v1/reservations/{rid}/complete", headers=USER)
    resumed = parse_sse(
        client.get(
            "/v1/events", headers={**USER, "Last-Event-ID": str(last_id)},
            params={"timeout_s": 0.05},
        ).text
    )
    assert [e_id for e_id, _ in resumed] == [last_id + 1, last_id + 2]
    assert {e["state"] for _, e in resumed} == {"Idle"}


def test_event_stream_accepts_query_token(client):
    # EventSource clients cannot set the Authorization header.
    rid = make_confirmed(client)
    client.post(f"/v1/reservations/{rid}/activate", headers=USER)
    r = client.get(
        "/v1/events",
        params={"timeout_s": 0.05, "access_token": "user-token"},
    )
    assert r.status_code == 200
    assert len(parse_sse(r.text)) == 2
    bad = client.get(
        "/v1/events", params={"timeout_s": 0.05, "access_token": "nope"}
    )
    assert bad.status_code == 401


def test_cors_headers_for_browser_origin(client):
    r = client.get(
        "/v1/capacity", headers={**USER, "Origin": "http://portal.example"}
    )
    assert r.headers.get("access-control-allow-origin") == "*"


def test_per_node_event_times_strictly_increase(client, clock):
    rid = make_confirmed(client)
    client.post(f"/v1/reservations/{rid}/activate", headers=USER)
    clock.t = 2000.0
    client.post(f"/v1/reservations/{rid}/cancel", headers=USER)
    events = parse_sse(
        client.get("/v1/events", headers=USER, params={"timeout_s": 0.05}).text
    )
    by_node = {}
    for _, e in events:
        by_node.setdefault(e["node_id"], []).append(e["t_utc"])
    for node, times in by_node.items():
        assert times == sorted(times)
        assert len(set(times)) == len(times), f"duplicate event time on {node}"
