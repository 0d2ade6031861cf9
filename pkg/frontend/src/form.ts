/** Reservation request form: the full resource selection list.
 *
 * Client-side checks mirror the gateway's 400-class rules but stay
 * strictly narrower; the server remains the authority.  Anything the
 * client lets through and the server rejects is surfaced on the form
 * from the error payload.
 */

import { Gateway, GatewayError } from "./api.js";
import type { Channel, LicensedBand, Reservation, ResourcePath } from "./types.js";

export interface FormValues {
  start_utc: number;
  end_utc: number;
  cpu_cores: number;
  cpu_threads: number;
  ram_gb: number;
  storage_gb: number;
  vm_lifetime_s: number;
  software: string[];
  n_usrps: number;
  channels: Channel[];
  path: ResourcePath;
  requested_bps: number;
}

export interface FormRules {
  bands: LicensedBand[];
  catalog: string[];
}

export function defaultForm(nowUtc: number): FormValues {
  return {
    start_utc: nowUtc,
    end_utc: nowUtc + 3600,
    cpu_cores: 2,
    cpu_threads: 4,
    ram_gb: 8,
    storage_gb: 40,
    vm_lifetime_s: 7200,
    software: [],
    n_usrps: 1,
    channels: [{ center_hz: 2.45e9, bw_hz: 20e6 }],
    path: "Emulator",
    requested_bps: 1e9,
  };
}

function inSomeBand(ch: Channel, bands: LicensedBand[]): boolean {
  const lo = ch.center_hz - ch.bw_hz / 2;
  const hi = ch.center_hz + ch.bw_hz / 2;
  return bands.some((b) => b.low_hz <= lo && hi <= b.high_hz);
}

/** Field name -> message; empty object when the form may be submitted. */
export function validateForm(
  v: FormValues,
  rules: FormRules,
): Record<string, string> {
  const errs: Record<string, string> = {};
  if (!(v.end_utc > v.start_utc)) {
    errs.window = "end must be after start";
  }
  if (!Number.isInteger(v.cpu_cores) || v.cpu_cores < 1) {
    errs.cpu_cores = "at least one core";
  }
  if (!Number.isInteger(v.cpu_threads) || v.cpu_threads < 1) {
    errs.cpu_threads = "at least one thread";
  }
  if (!(v.ram_gb > 0)) errs.ram_gb = "must be positive";
  if (!(v.storage_gb > 0)) errs.storage_gb = "must be positive";
  if (!(v.vm_lifetime_s > 0)) errs.vm_lifetime_s = "must be positive";
  for (const label of v.software) {
    if (!rules.catalog.includes(label)) {
      errs.software = `unknown package ${label}`;
    }
  }
  if (!Number.isInteger(v.n_usrps) || v.n_usrps < 1) {
    errs.n_usrps = "at least one radio";
  }
  if (v.channels.length === 0) {
    errs.channels = "at least one channel";
  }
  for (const ch of v.channels) {
    if (!(ch.center_hz > 0) || !(ch.bw_hz > 0)) {
      errs.channels = "center and bandwidth must be positive";
    } else if (v.path === "OverTheAir" && !inSomeBand(ch, rules.bands)) {
      const mhz = (ch.center_hz / 1e6).toFixed(1);
      errs.channels = `${mhz} MHz is outside every licensed band`;
    }
  }
  if (!(v.requested_bps >= 0)) errs.requested_bps = "cannot be negative";
  return errs;
}

/** The POST body always carries every field, defaults included. */
export function toRequestBody(v: FormValues) {
  return {
    start_utc: v.start_utc,
    end_utc: v.end_utc,
    spec: {
      compute: {
        cpu_cores: v.cpu_cores,
        cpu_threads: v.cpu_threads,
        ram_gb: v.ram_gb,
        storage_gb: v.storage_gb,
        vm_lifetime_s: v.vm_lifetime_s,
        software: v.software,
      },
      radio: {
        n_usrps: v.n_usrps,
        channels: v.channels,
        path: v.path,
      },
      network: { requested_bps: v.requested_bps },
    },
  };
}

export type Outcome =
  | { phase: "idle" }
  | { phase: "invalid"; fieldErrors: Record<string, string> }
  | { phase: "requested"; reservation: Reservation }
  | { phase: "evaluated"; reservation: Reservation }
  | {
      phase: "rejected";
      error: GatewayError;
      fieldErrors: Record<string, string>;
      banner: string | null;
    };

// Which form field a server error name points at.
const ERROR_FIELD: Record<string, string> = {
  LicenseError: "channels",
  SpecError: "window",
  CapacityError: "n_usrps",
  NoFitError: "cpu_cores",
};

export class ReservationForm {
  values: FormValues;
  outcome: Outcome = { phase: "idle" };
  private readonly autoEvaluate: boolean;

  constructor(
    private readonly gw: Gateway,
    private readonly rules: FormRules,
    opts: { nowUtc?: number; autoEvaluate?: boolean } = {},
  ) {
    this.values = defaultForm(opts.nowUtc ?? Date.now() / 1000);
    this.autoEvaluate = opts.autoEvaluate ?? true;
  }

  /** POST the request, then ask the scheduler for its verdict. */
  async submit(): Promise<Outcome> {
    const fieldErrors = validateForm(this.values, this.rules);
    if (Object.keys(fieldErrors).length > 0) {
      this.outcome = { phase: "invalid", fieldErrors };
      return this.outcome;
    }
    let requested: Reservation;
    try {
      requested = await this.gw.submitReservation(toRequestBody(this.values));
    } catch (err) {
      this.outcome = this.rejectedFrom(err);
      return this.outcome;
    }
    this.outcome = { phase: "requested", reservation: requested };
    if (!this.autoEvaluate) return this.outcome;
    try {
      const evaluated = await this.gw.evaluate(requested.id);
      this.outcome = { phase: "evaluated", reservation: evaluated };
    } catch (err) {
      this.outcome = this.rejectedFrom(err);
    }
    return this.outcome;
  }

  private rejectedFrom(err: unknown): Outcome {
    if (!(err instanceof GatewayError)) throw err;
    const field = ERROR_FIELD[err.kind];
    return {
      phase: "rejected",
      error: err,
      fieldErrors: field ? { [field]: err.detail } : {},
      banner: field ? null : `${err.kind}: ${err.detail}`,
    };
  }

  render(): string {
    const v = this.values;
    const errs =
      this.outcome.phase === "invalid" || this.outcome.phase === "rejected"
        ? this.outcome.fieldErrors
        : {};
    const note = (f: string) =>
      errs[f] ? `<span class="field-error" data-field="${f}">${errs[f]}</span>` : "";
    const num = (f: keyof FormValues, label: string, step = "1") => `
      <label>${label}
        <input type="number" step="${step}" name="${f}" value="${v[f]}">
        ${note(f as string)}
      </label>`;
    const software = this.rules.catalog
      .map(
        (s) =>
          `<label class="pick"><input type="checkbox" name="software" value="${s}"` +
          `${v.software.includes(s) ? " checked" : ""}> ${s}</label>`,
      )
      .join("\n");
    const channels = v.channels
      .map(
        (c, i) => `
      <div class="channel-row" data-index="${i}">
        <input type="number" name="center_hz" value="${c.center_hz}"> Hz center
        <input type="number" name="bw_hz" value="${c.bw_hz}"> Hz wide
      </div>`,
      )
      .join("\n");
    return `
<form id="reserve-form">
  <fieldset>
    <legend>Time window</legend>
    ${num("start_utc", "Start (UTC epoch)")}
    ${num("end_utc", "End (UTC epoch)")}
    ${note("window")}
  </fieldset>
  <fieldset>
    <legend>Compute</legend>
    ${num("cpu_cores", "CPU cores")}
    ${num("cpu_threads", "CPU threads")}
    ${num("ram_gb", "RAM (GB)", "0.5")}
    ${num("storage_gb", "Storage (GB)", "10")}
    ${num("vm_lifetime_s", "VM lifetime (s)", "60")}
    <div class="software">${software}${note("software")}</div>
  </fieldset>
  <fieldset>
    <legend>Radio</legend>
    ${num("n_usrps", "USRP count")}
    <label class="pick"><input type="radio" name="path" value="OverTheAir"${
      v.path === "OverTheAir" ? " checked" : ""
    }> Over the air</label>
    <label class="pick"><input type="radio" name="path" value="Emulator"${
      v.path === "Emulator" ? " checked" : ""
    }> Emulator</label>
    ${channels}
    <button type="button" id="add-channel">Add channel</button>
    ${note("channels")}
  </fieldset>
  <fieldset>
    <legend>Network</legend>
    ${num("requested_bps", "Requested throughput (bit/s)", "1000000")}
  </fieldset>
  <button type="submit">Request reservation</button>
  ${this.renderOutcome()}
</form>`;
  }

  renderOutcome(): string {
    const o = this.outcome;
    if (o.phase === "idle") return "";
    if (o.phase === "invalid") {
      return `<div class="banner banner-invalid">fix the highlighted fields</div>`;
    }
    if (o.phase === "rejected") {
      return o.banner
        ? `<div class="banner banner-error">${o.banner}</div>`
        : `<div class="banner banner-error">request rejected</div>`;
    }
    const state = o.reservation.state;
    return (
      `<span class="badge state-${state.toLowerCase()}">${state}</span>` +
      ` <span class="res-id">${o.reservation.id}</span>`
    );
  }
}
