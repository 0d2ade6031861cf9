/** Admin review queue: reservations waiting on a human decision. */

import { Gateway, GatewayError } from "./api.js";
import type { Reservation } from "./types.js";

const LOOKBACK_S = 7 * 86400;
const LOOKAHEAD_S = 30 * 86400;

export class ReviewQueue {
  items: Reservation[] = [];
  accessNotice: string | null = null;

  constructor(private readonly gw: Gateway) {}

  async refresh(nowUtc = Date.now() / 1000): Promise<void> {
    let all: Reservation[];
    try {
      all = await this.gw.schedule(nowUtc - LOOKBACK_S, nowUtc + LOOKAHEAD_S);
    } catch (err) {
      if (err instanceof GatewayError && err.status === 403) {
        this.accessNotice = "Admin role required to review reservations.";
        this.items = [];
        return;
      }
      throw err;
    }
    this.accessNotice = null;
    this.items = all.filter((r) => r.state === "PendingReview");
  }

  async approve(id: string, nowUtc?: number): Promise<void> {
    await this.decide(id, true, nowUtc);
  }

  async deny(id: string, nowUtc?: number): Promise<void> {
    await this.decide(id, false, nowUtc);
  }

  private async decide(id: string, approve: boolean, nowUtc?: number) {
    try {
      await this.gw.review(id, approve);
    } catch (err) {
      if (err instanceof GatewayError && err.status === 403) {
        this.accessNotice = "Admin role required to review reservations.";
        return;
      }
      throw err;
    }
    await this.refresh(nowUtc);
  }

  render(): string {
    if (this.accessNotice) {
      return `<div class="banner banner-access">${this.accessNotice}</div>`;
    }
    if (this.items.length === 0) {
      return `<p class="queue-empty">No reservations waiting for review.</p>`;
    }
    const rows = this.items
      .map((r) => {
        const start = new Date(r.window.start_utc * 1000).toISOString();
        const radio = `${r.spec.radio.n_usrps}x ${r.spec.radio.path}`;
        return `
  <tr data-id="${r.id}">
    <td>${r.id}</td><td>${r.user}</td><td>${start}</td><td>${radio}</td>
    <td>
      <button class="approve" data-id="${r.id}">Approve</button>
      <button class="deny" data-id="${r.id}">Deny</button>
    </td>
  </tr>`;
      })
      .join("");
    return `
<table class="review-queue">
  <thead><tr><th>id</th><th>user</th><th>start</th><th>radio</th><th></th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
  }
}
