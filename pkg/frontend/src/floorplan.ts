/** Floorplan status view.
 *
 * A static vector drawing of the lab with one marker per host node.
 * Coordinates are plain data, so any building works; the default
 * layout spreads the four radio heads around the floor and parks the
 * emulator and compute racks in the machine room.  Markers mirror the
 * latest status event per node and carry a tooltip with the radio
 * statistics known for the owner.
 */

import type { NodeState, NodeStatusEvent } from "./types.js";

export interface Spot {
  id: string;
  x: number;
  y: number;
  label?: string;
}

export interface RadioStats {
  freq_hz?: number;
  bw_hz?: number;
}

export interface Marker {
  id: string;
  state: NodeState;
  owner: string | null;
  t_utc: number;
  lastEventId: number;
  stats: RadioStats;
}

export const STATE_FILL: Record<NodeState, string> = {
  Idle: "#8b949e",
  Reserved: "#d29922",
  Active: "#3fb950",
  Fault: "#f85149",
};

export function defaultSpots(): Spot[] {
  const spots: Spot[] = [
    { id: "rrh-1", x: 80, y: 70, label: "radio head 1" },
    { id: "rrh-2", x: 560, y: 70, label: "radio head 2" },
    { id: "rrh-3", x: 80, y: 330, label: "radio head 3" },
    { id: "rrh-4", x: 560, y: 330, label: "radio head 4" },
  ];
  for (let i = 0; i < 4; i++) {
    spots.push({ id: `emu-${i + 1}`, x: 250 + i * 40, y: 120, label: `emulator ${i + 1}` });
  }
  for (let i = 0; i < 10; i++) {
    spots.push({
      id: `node-${String(i + 1).padStart(2, "0")}`,
      x: 210 + (i % 5) * 45,
      y: 250 + Math.floor(i / 5) * 45,
      label: `compute ${i + 1}`,
    });
  }
  return spots;
}

export class Floorplan {
  private readonly markers = new Map<string, Marker>();

  constructor(readonly spots: Spot[]) {
    for (const s of spots) {
      this.markers.set(s.id, {
        id: s.id,
        state: "Idle",
        owner: null,
        t_utc: 0,
        lastEventId: 0,
        stats: {},
      });
    }
  }

  /** Returns false for unknown nodes and stale replays. */
  apply(ev: NodeStatusEvent): boolean {
    const m = this.markers.get(ev.node_id);
    if (!m) return false;
    if (ev.event_id <= m.lastEventId) return false;
    m.state = ev.state;
    m.owner = ev.owner;
    m.t_utc = ev.t_utc;
    m.lastEventId = ev.event_id;
    if (ev.owner === null) m.stats = {};
    return true;
  }

  /** Attach current frequency/bandwidth looked up from the owner's reservation. */
  setStats(nodeId: string, stats: RadioStats): void {
    const m = this.markers.get(nodeId);
    if (m) m.stats = { ...m.stats, ...stats };
  }

  marker(id: string): Marker | undefined {
    return this.markers.get(id);
  }

  allMarkers(): Marker[] {
    return this.spots.map((s) => this.markers.get(s.id)!);
  }

  private tooltip(spot: Spot, m: Marker): string {
    const parts = [`${spot.label ?? spot.id}: ${m.state}`];
    if (m.owner) parts.push(`owner ${m.owner}`);
    if (m.stats.freq_hz !== undefined) {
      parts.push(`${(m.stats.freq_hz / 1e6).toFixed(1)} MHz`);
    }
    if (m.stats.bw_hz !== undefined) {
      parts.push(`${(m.stats.bw_hz / 1e6).toFixed(1)} MHz wide`);
    }
    return parts.join(", ");
  }

  toSvg(width = 640, height = 400): string {
    const rooms = `
  <rect x="10" y="10" width="620" height="380" class="wall"/>
  <line x1="190" y1="10" x2="190" y2="390" class="wall"/>
  <line x2="630" x1="190" y1="200" y2="200" class="wall"/>
  <text x="20" y="30" class="room-label">lab floor</text>
  <text x="200" y="30" class="room-label">emulator rack</text>
  <text x="200" y="220" class="room-label">compute racks</text>`;
    const dots = this.spots
      .map((s) => {
        const m = this.markers.get(s.id)!;
        return (
          `  <g class="node-marker" data-node="${s.id}" data-state="${m.state}">\n` +
          `    <circle cx="${s.x}" cy="${s.y}" r="9" fill="${STATE_FILL[m.state]}"/>\n` +
          `    <title>${this.tooltip(s, m)}</title>\n` +
          `    <text x="${s.x}" y="${s.y + 22}" class="node-label">${s.id}</text>\n` +
          `  </g>`
        );
      })
      .join("\n");
    return (
      `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="testbed floorplan">\n` +
      rooms +
      "\n" +
      dots +
      "\n</svg>"
    );
  }
}
