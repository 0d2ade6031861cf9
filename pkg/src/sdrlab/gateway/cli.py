"""Operator command line.

Every subcommand except ``serve`` and ``specvirt roundtrip`` is a thin
wrapper over one HTTP endpoint, so outcomes match the API exactly.
Server address and token come from --server/--token or the
SDRLAB_SERVER / SDRLAB_TOKEN environment variables.

Exit codes: 0 success, 1 failure (the domain error name is printed),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path
from typing import Optional

import requests

from ..errors import BindError, DomainError
from ..spectrum import roundtrip_demo

DEFAULT_SERVER = "http://127.0.0.1:8000"


class ApiFailure(Exception):
    def __init__(self, name: str, detail: str, status: int):
        super().__init__(f"{name}: {detail}")
        self.name = name
        self.detail = detail
        self.status = status


class Client:
    def __init__(self, server: str, token: Optional[str]):
        self.server = server.rstrip("/")
        self.headers = {"Authorization": f"Bearer {token}"} if token else {}

    def call(self, method: str, path: str, *, params=None, body=None) -> dict:
        try:
            resp = requests.request(
                method,
                self.server + path,
                params=params,
                json=body,
                headers=self.headers,
                timeout=300,
            )
        except requests.ConnectionError as exc:
            raise ApiFailure("ConnectionError", f"cannot reach {self.server}: {exc}", 0)
        if resp.status_code >= 400:
            try:
                doc = resp.json()
                raise ApiFailure(
                    doc.get("error", "HTTPError"),
                    f"{doc.get('detail', resp.text)} (HTTP {resp.status_code})",
                    resp.status_code,
                )
            except ValueError:
                raise ApiFailure("HTTPError", f"HTTP {resp.status_code}", resp.status_code)
        return resp.json()

    def get(self, path: str, **params) -> dict:
        return self.call("GET", path, params={k: v for k, v in params.items() if v is not None})

    def post(self, path: str, body: Optional[dict] = None) -> dict:
        return self.call("POST", path, body=body or {})

    def put(self, path: str, body: dict) -> dict:
        return self.call("PUT", path, body=body)


def client_of(args) -> Client:
    server = args.server or os.environ.get("SDRLAB_SERVER", DEFAULT_SERVER)
    token = args.token or os.environ.get("SDRLAB_TOKEN")
    return Client(server, token)


# ---------------------------------------------------------------- subcommands


def cmd_serve(args) -> int:
    import uvicorn

    from ..inventory import default_inventory, load_inventory
    from ..service import Orchestrator
    from .app import Role, create_app

    if args.inventory:
        text = Path(args.inventory).read_text()
        inv = load_inventory(text)
    else:
        text = None
        inv = default_inventory()

    # Fail loudly before uvicorn swallows the bind problem.
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        raise BindError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    finally:
        probe.close()

    orch = Orchestrator(
        inv, args.state_dir, inventory_text=text, repair=args.repair
    )
    tokens = {
        args.user_token: ("user", Role.USER),
        args.admin_token: ("admin", Role.ADMIN),
    }
    app = create_app(orch, tokens)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_reserve(args) -> int:
    c = client_of(args)
    spec: dict = {
        "compute": {
            "cpu_cores": args.cores,
            "cpu_threads": args.threads,
            "ram_gb": args.ram,
            "storage_gb": args.storage,
            "vm_lifetime_s": args.lifetime,
            "software": args.software or [],
        },
        "radio": {
            "n_usrps": args.usrps,
            "path": args.path,
            "channels": [],
        },
        "network": {"requested_bps": args.bps},
    }
    if args.center is not None:
        if args.bw is None:
            print("--center requires --bw", file=sys.stderr)
            return 2
        spec["radio"]["channels"].append({"center_hz": args.center, "bw_hz": args.bw})
    end = args.end if args.end is not None else args.start + args.hours * 3600.0
    res = c.post(
        "/v1/reservations",
        {"start_utc": args.start, "end_utc": end, "spec": spec},
    )
    if not args.no_evaluate:
        res = c.post(f"/v1/reservations/{res['id']}/evaluate")
    print(res["id"])
    print(f"state: {res['state']}")
    for entry in res.get("audit", []):
        if entry.get("note"):
            print(f"  {entry['note']}")
    return 0


def cmd_list(args) -> int:
    c = client_of(args)
    rows = c.get("/v1/schedule", **{"from": args.from_utc, "to": args.to_utc})
    for r in rows:
        w = r["window"]
        print(
            f"{r['id']}  {r['state']:<13} {r['user']:<12} "
            f"[{w['start_utc']:.0f}, {w['end_utc']:.0f})"
        )
    if not rows:
        print("(no reservations)")
    return 0


def cmd_approve(args) -> int:
    c = client_of(args)
    res = c.post(
        f"/v1/reservations/{args.id}/review", {"approve": not args.deny}
    )
    print(f"{res['id']}: {res['state']}")
    return 0


def cmd_status(args) -> int:
    c = client_of(args)
    res = c.get(f"/v1/reservations/{args.id}")
    print(json.dumps(res, indent=2, sort_keys=True))
    return 0


def cmd_activate(args) -> int:
    c = client_of(args)
    res = c.post(f"/v1/reservations/{args.id}/activate")
    print(f"{res['id']}: {res['state']}")
    return 0


def cmd_complete(args) -> int:
    c = client_of(args)
    res = c.post(f"/v1/reservations/{args.id}/complete")
    print(f"{res['id']}: {res['state']}")
    return 0


def cmd_cancel(args) -> int:
    c = client_of(args)
    res = c.post(f"/v1/reservations/{args.id}/cancel")
    print(f"{res['id']}: {res['state']}")
    return 0


def cmd_survey(args) -> int:
    c = client_of(args)
    out = c.post(f"/v1/reservations/{args.id}/survey", {"responses": args.answer})
    for q, a in zip(out["questions"], out["responses"]):
        print(f"{q}\n  -> {a}")
    return 0


def cmd_scenario_set(args) -> int:
    c = client_of(args)
    text = Path(args.file).read_text()
    out = c.put("/v1/scenario", {"yaml": text})
    print(f"scenario loaded: radios={','.join(out['radios'])} carrier={out['carrier_hz']:.0f} Hz")
    return 0


def cmd_scenario_get(args) -> int:
    c = client_of(args)
    out = c.get("/v1/scenario")
    sys.stdout.write(out["yaml"])
    return 0


def cmd_experiment_open(args) -> int:
    c = client_of(args)
    out = c.post("/v1/experiments", {"reservation_id": args.reservation})
    print(out["experiment_id"])
    return 0


def cmd_experiment_seal(args) -> int:
    c = client_of(args)
    out = c.post(f"/v1/experiments/{args.id}/seal")
    print(f"{out['experiment_id']} sealed, digest {out['digest']}")
    return 0


def cmd_emulate_run(args) -> int:
    c = client_of(args)
    body = {
        "duration_s": args.duration,
        "step_s": args.step,
        "seed": args.seed,
        "samples_per_step": args.samples,
    }
    if args.reservation:
        body["reservation_id"] = args.reservation
    if args.experiment:
        body["experiment_id"] = args.experiment
    if args.t0 is not None:
        body["t0_utc"] = args.t0
    out = c.post("/v1/emulation/run", body)
    print(f"steps: {out['steps']}  records: {out['records']}")
    for rid, by_freq in sorted(out["mean_power_dbm"].items()):
        for freq, p in sorted(by_freq.items()):
            print(f"  {rid} @ {freq} Hz: {p:.2f} dBm")
    return 0


def cmd_specvirt_roundtrip(args) -> int:
    results = roundtrip_demo(
        n_slots=args.slots,
        samples_per_slot=args.samples,
        block_bw_hz=args.block_bw,
        seed=args.seed,
    )
    for r in results:
        leak = "" if r.leakage_db is None else f", leakage {r.leakage_db:.1f} dBc"
        print(f"slot @ {r.slot.offset_hz:+.0f} Hz: EVM {r.evm_db:.1f} dBc{leak}")
    return 0


def cmd_data_query(args) -> int:
    c = client_of(args)
    out = c.get(
        f"/v1/experiments/{args.experiment}/records",
        t_min=args.t_min,
        t_max=args.t_max,
        node_id=args.node,
        freq_min=args.freq_min,
        freq_max=args.freq_max,
        az_min=args.az_min,
        az_max=args.az_max,
    )
    rows = out["records"]
    if args.limit is not None:
        rows = rows[: args.limit]
    for r in rows:
        loc = r["location"]
        loc_s = ",".join(str(v) for v in loc) if isinstance(loc, list) else loc
        print(
            f"{r['t_utc']!r}\t{r['node_id']}\t{loc_s}\t"
            f"{r['freq_hz']!r}\t{r['azimuth_deg']!r}\t{r['value_dbm']!r}"
        )
    print(f"({len(out['records'])} records)", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    c = client_of(args)
    out = c.get(
        "/v1/utilization",
        **{"from": args.from_utc, "to": args.to_utc, "bucket": args.bucket},
    )
    edges = [out["start_utc"] + i * out["bucket_s"] for i in range(len(next(iter(out["occupancy"].values()), [])))]
    print(f"utilization [{out['start_utc']:.0f}, {out['end_utc']:.0f}) bucket {out['bucket_s']:.0f} s")
    for klass, series in sorted(out["occupancy"].items()):
        cells = " ".join(f"{v:6.3f}" for v in series)
        print(f"  {klass:<13} {cells}")
    if edges and args.verbose:
        print("  buckets start:", " ".join(f"{e:.0f}" for e in edges))
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdrlab", description=__doc__)
    p.add_argument("--server", default=None, help="gateway base URL (env SDRLAB_SERVER)")
    p.add_argument("--token", default=None, help="bearer token (env SDRLAB_TOKEN)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run the gateway service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--state-dir", default="./sdrlab-state")
    s.add_argument("--inventory", default=None, help="inventory YAML path (default: built-in)")
    s.add_argument("--user-token", default="user-token")
    s.add_argument("--admin-token", default="admin-token")
    s.add_argument("--repair", action="store_true", help="truncate a corrupt event-log tail")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("reserve", help="request a reservation and evaluate admission")
    s.add_argument("--usrps", type=int, default=0)
    s.add_argument("--path", default="OverTheAir", choices=["OverTheAir", "Emulator"])
    s.add_argument("--center", type=float, default=None, help="channel center Hz")
    s.add_argument("--bw", type=float, default=None, help="channel bandwidth Hz")
    s.add_argument("--cores", type=int, default=1)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--ram", type=float, default=4.0)
    s.add_argument("--storage", type=float, default=20.0)
    s.add_argument("--lifetime", type=float, default=3600.0)
    s.add_argument("--software", action="append", default=None)
    s.add_argument("--bps", type=float, default=0.0)
    s.add_argument("--start", type=float, required=True, help="start UTC seconds")
    s.add_argument("--end", type=float, default=None, help="end UTC seconds")
    s.add_argument("--hours", type=float, default=1.0, help="duration if --end omitted")
    s.add_argument("--no-evaluate", action="store_true", help="leave the request Tentative")
    s.set_defaults(func=cmd_reserve)

    s = sub.add_parser("list", help="list the schedule")
    s.add_argument("--from", dest="from_utc", type=float, default=None)
    s.add_argument("--to", dest="to_utc", type=float, default=None)
    s.set_defaults(func=cmd_list)

    s = sub.add_parser("approve", help="review a pending reservation (admin)")
    s.add_argument("id")
    s.add_argument("--deny", action="store_true")
    s.set_defaults(func=cmd_approve)

    s = sub.add_parser("status", help="show one reservation")
    s.add_argument("id")
    s.set_defaults(func=cmd_status)

    s = sub.add_parser("activate", help="start a confirmed reservation")
    s.add_argument("id")
    s.set_defaults(func=cmd_activate)

    s = sub.add_parser("complete", help="finish an active reservation")
    s.add_argument("id")
    s.set_defaults(func=cmd_complete)

    s = sub.add_parser("cancel", help="cancel a reservation")
    s.add_argument("id")
    s.set_defaults(func=cmd_cancel)

    s = sub.add_parser("survey", help="submit the post-session survey")
    s.add_argument("id")
    s.add_argument("--answer", action="append", required=True,
                   help="one response per question, in order")
    s.set_defaults(func=cmd_survey)

    s = sub.add_parser("scenario", help="get or set the channel scenario")
    ssub = s.add_subparsers(dest="scenario_command", required=True)
    t = ssub.add_parser("set")
    t.add_argument("file")
    t.set_defaults(func=cmd_scenario_set)
    t = ssub.add_parser("get")
    t.set_defaults(func=cmd_scenario_get)

    s = sub.add_parser("experiment", help="open or seal a measurement archive")
    esub = s.add_subparsers(dest="experiment_command", required=True)
    t = esub.add_parser("open")
    t.add_argument("reservation")
    t.set_defaults(func=cmd_experiment_open)
    t = esub.add_parser("seal")
    t.add_argument("id")
    t.set_defaults(func=cmd_experiment_seal)

    s = sub.add_parser("emulate", help="channel emulation")
    msub = s.add_subparsers(dest="emulate_command", required=True)
    t = msub.add_parser("run")
    t.add_argument("--duration", type=float, default=1.0, help="seconds")
    t.add_argument("--step", type=float, default=0.1, help="seconds per step")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--samples", type=int, default=4096, help="samples per step")
    t.add_argument("--reservation", default=None)
    t.add_argument("--experiment", default=None, help="archive records here")
    t.add_argument("--t0", type=float, default=None, help="record timestamp origin")
    t.set_defaults(func=cmd_emulate_run)

    s = sub.add_parser("specvirt", help="spectrum virtualization checks")
    vsub = s.add_subparsers(dest="specvirt_command", required=True)
    t = vsub.add_parser("roundtrip")
    t.add_argument("--slots", type=int, default=2)
    t.add_argument("--samples", type=int, default=2**14)
    t.add_argument("--block-bw", type=float, default=320e6)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_specvirt_roundtrip)

    s = sub.add_parser("data", help="measurement archive access")
    dsub = s.add_subparsers(dest="data_command", required=True)
    t = dsub.add_parser("query")
    t.add_argument("experiment")
    t.add_argument("--t-min", type=float, default=None)
    t.add_argument("--t-max", type=float, default=None)
    t.add_argument("--node", default=None)
    t.add_argument("--freq-min", type=float, default=None)
    t.add_argument("--freq-max", type=float, default=None)
    t.add_argument("--az-min", type=float, default=None)
    t.add_argument("--az-max", type=float, default=None)
    t.add_argument("--limit", type=int, default=None)
    t.set_defaults(func=cmd_data_query)

    s = sub.add_parser("report", help="utilization report")
    s.add_argument("--from", dest="from_utc", type=float, required=True)
    s.add_argument("--to", dest="to_utc", type=float, required=True)
    s.add_argument("--bucket", type=float, required=True)
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ApiFailure as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"OSError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
