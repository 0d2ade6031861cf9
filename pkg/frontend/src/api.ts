/** Thin fetch client for the gateway.
 *
 * Every mutation the portal performs goes through one of the methods
 * below, so a test can intercept fetchFn and enumerate exactly which
 * endpoints were touched.
 */

import type { Inventory, Reservation } from "./types.js";

export class GatewayError extends Error {
  constructor(
    readonly kind: string,
    readonly detail: string,
    readonly status: number,
  ) {
    super(`${kind}: ${detail}`);
  }
}

export interface GatewayConfig {
  base: string;
  token: string;
  fetchFn?: typeof fetch;
}

export class Gateway {
  private readonly base: string;
  private readonly token: string;
  private readonly fetchFn: typeof fetch;

  constructor(cfg: GatewayConfig) {
    this.base = cfg.base.replace(/\/+$/, "");
    this.token = cfg.token;
    // bind lazily: calling a bare window.fetch reference throws in browsers
    this.fetchFn = cfg.fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async call(method: string, path: string, body?: unknown): Promise<any> {
    const init: RequestInit = {
      method,
      headers: { Authorization: `Bearer ${this.token}` },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.base + path, init);
    const text = await res.text();
    let doc: any = null;
    if (text) {
      try {
        doc = JSON.parse(text);
      } catch {
        doc = null;
      }
    }
    if (!res.ok) {
      throw new GatewayError(
        doc?.error ?? "HTTPError",
        doc?.detail ?? `${res.status} ${res.statusText}`.trim(),
        res.status,
      );
    }
    return doc;
  }

  inventory(): Promise<Inventory> {
    return this.call("GET", "/v1/inventory");
  }

  submitReservation(body: unknown): Promise<Reservation> {
    return this.call("POST", "/v1/reservations", body);
  }

  reservation(id: string): Promise<Reservation> {
    return this.call("GET", `/v1/reservations/${id}`);
  }

  evaluate(id: string): Promise<Reservation> {
    return this.call("POST", `/v1/reservations/${id}/evaluate`, {});
  }

  review(id: string, approve: boolean): Promise<Reservation> {
    return this.call("POST", `/v1/reservations/${id}/review`, { approve });
  }

  schedule(fromUtc: number, toUtc: number): Promise<Reservation[]> {
    const q = `from=${encodeURIComponent(fromUtc)}&to=${encodeURIComponent(toUtc)}`;
    return this.call("GET", `/v1/schedule?${q}`);
  }

  survey(id: string, responses: string[]): Promise<Reservation> {
    return this.call("POST", `/v1/reservations/${id}/survey`, { responses });
  }

  /** Stream URL for EventSource, which cannot set an auth header. */
  eventsUrl(lastId = 0): string {
    const token = encodeURIComponent(this.token);
    return `${this.base}/v1/events?access_token=${token}&last_id=${lastId}`;
  }
}
