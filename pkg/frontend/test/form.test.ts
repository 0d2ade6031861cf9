import { describe, expect, it } from "vitest";

import { Gateway } from "../src/api.js";
import {
  ReservationForm,
  defaultForm,
  toRequestBody,
  validateForm,
} from "../src/form.js";
import { STUB_INVENTORY, StubGateway } from "./stub.js";

const RULES = {
  bands: STUB_INVENTORY.licensed_bands,
  catalog: STUB_INVENTORY.software_catalog,
};

function formOver(stub: StubGateway, opts: { autoEvaluate?: boolean } = {}) {
  const gw = new Gateway({ base: "http://stub", token: "user-token", fetchFn: stub.fetchFn });
  return new ReservationForm(gw, RULES, { nowUtc: 1000, ...opts });
}

describe("request body", () => {
  it("carries the full selection list on every submit", async () => {
    const stub = new StubGateway();
    const form = formOver(stub);
    form.values.software = ["GNUradio"];
    await form.submit();
    const post = stub.calls.find((c) => c.method === "POST")!;
    expect(post.path).toBe("/v1/reservations");
    expect(post.body).toEqual({
      start_utc: 1000,
      end_utc: 4600,
      spec: {
        compute: {
          cpu_cores: 2,
          cpu_threads: 4,
          ram_gb: 8,
          storage_gb: 40,
          vm_lifetime_s: 7200,
          software: ["GNUradio"],
        },
        radio: {
          n_usrps: 1,
          channels: [{ center_hz: 2.45e9, bw_hz: 20e6 }],
          path: "Emulator",
        },
        network: { requested_bps: 1e9 },
      },
    });
  });
});

describe("outcome badges", () => {
  it("renders Tentative after the bare request", async () => {
    const stub = new StubGateway();
    const form = formOver(stub, { autoEvaluate: false });
    await form.submit();
    expect(form.outcome.phase).toBe("requested");
    expect(form.render()).toContain(">Tentative</span>");
  });

  it("renders the evaluated Confirmed state", async () => {
    const form = formOver(new StubGateway());
    await form.submit();
    expect(form.render()).toContain(">Confirmed</span>");
  });

  it("renders PendingReview when the scheduler defers", async () => {
    const form = formOver(new StubGateway({ evaluateTo: "PendingReview" }));
    await form.submit();
    expect(form.render()).toContain(">PendingReview</span>");
    expect(form.render()).toContain("state-pendingreview");
  });

  it("renders Denied", async () => {
    const form = formOver(new StubGateway({ evaluateTo: "Denied" }));
    await form.submit();
    expect(form.render()).toContain(">Denied</span>");
  });
});

describe("client-side validation", () => {
  it("rejects an OTA channel outside every licensed band without a network call", async () => {
    const stub = new StubGateway();
    const form = formOver(stub);
    form.values.path = "OverTheAir";
    form.values.channels = [{ center_hz: 5e9, bw_hz: 20e6 }];
    const outcome = await form.submit();
    expect(outcome.phase).toBe("invalid");
    if (outcome.phase === "invalid") {
      expect(outcome.fieldErrors.channels).toContain("5000.0 MHz");
    }
    expect(stub.calls).toHaveLength(0);
    expect(form.render()).toContain('data-field="channels"');
  });

  it("flags inverted windows, zero radios, and unknown software", () => {
    const v = defaultForm(1000);
    v.end_utc = v.start_utc;
    v.n_usrps = 0;
    v.software = ["notarealpackage"];
    const errs = validateForm(v, RULES);
    expect(errs.window).toBeTruthy();
    expect(errs.n_usrps).toBeTruthy();
    expect(errs.software).toContain("notarealpackage");
  });

  it("accepts only what the server accepts (400-class subset)", async () => {
    // seeded generator so failures reproduce; each field is usually
    // drawn from a valid pool so enough samples survive validation
    let seed = 0x5eed;
    const rnd = () => {
      seed = (seed * 1103515245 + 12345) & 0x7fffffff;
      return seed / 0x7fffffff;
    };
    const pick = <T>(xs: T[]) => xs[Math.floor(rnd() * xs.length)];
    const mostly = <T>(valid: T[], invalid: T[]) =>
      rnd() < 0.15 ? pick(invalid) : pick(valid);
    const stub = new StubGateway();
    const gw = new Gateway({
      base: "http://stub",
      token: "user-token",
      fetchFn: stub.fetchFn,
    });
    let accepted = 0;
    for (let i = 0; i < 300; i++) {
      const v = defaultForm(1000 + i);
      v.end_utc = v.start_utc + mostly([1800, 3600, 7200], [-3600, 0]);
      v.cpu_cores = mostly([1, 2, 8], [0, -2]);
      v.cpu_threads = mostly([1, 4], [0]);
      v.ram_gb = mostly([0.5, 8, 128], [-1, 0]);
      v.storage_gb = mostly([10, 500], [0]);
      v.vm_lifetime_s = mostly([600, 86400], [0]);
      v.software = mostly([[], ["CRTS"], ["GNUradio", "SAS"]], [["bogus"]]);
      v.path = pick(["OverTheAir", "Emulator"]);
      v.n_usrps = mostly([1, 2, 4, 8], [0]);
      v.channels = mostly(
        [
          [{ center_hz: 150e6, bw_hz: 10e6 }],
          [{ center_hz: 2.45e9, bw_hz: 20e6 }],
          [
            { center_hz: 400e6, bw_hz: 5e6 },
            { center_hz: 3.5e9, bw_hz: 100e6 },
          ],
        ],
        [[], [{ center_hz: 5.8e9, bw_hz: 20e6 }], [{ center_hz: -1, bw_hz: 1e6 }]],
      );
      v.requested_bps = mostly([0, 1e9], [-5]);
      if (Object.keys(validateForm(v, RULES)).length > 0) continue;
      accepted += 1;
      try {
        await gw.submitReservation(toRequestBody(v));
      } catch (err: any) {
        // capacity (422) may still refuse; the validation layer must not
        expect(err.status, `${err.kind}: ${err.detail}`).not.toBe(400);
      }
    }
    expect(accepted).toBeGreaterThan(50);
  });
});

describe("server rejections", () => {
  it("surfaces a LicenseError the client missed on the channel field", async () => {
    const stub = new StubGateway({
      submitError: {
        error: "LicenseError",
        detail: "2450000000.0 Hz is not licensed for OTA",
        status: 400,
      },
    });
    const form = formOver(stub);
    const outcome = await form.submit();
    expect(outcome.phase).toBe("rejected");
    if (outcome.phase === "rejected") {
      expect(outcome.fieldErrors.channels).toContain("not licensed");
    }
  });

  it("shows a banner for overlap conflicts", async () => {
    const stub = new StubGateway({
      submitError: {
        error: "ConflictError",
        detail: "window overlaps res-0007",
        status: 409,
      },
    });
    const form = formOver(stub);
    await form.submit();
    expect(form.render()).toContain("ConflictError");
    expect(form.render()).toContain("res-0007");
  });
});
