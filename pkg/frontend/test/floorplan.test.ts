import { describe, expect, it } from "vitest";

import { Floorplan, STATE_FILL, defaultSpots } from "../src/floorplan.js";
import type { NodeStatusEvent } from "../src/types.js";

function ev(
  id: number,
  node: string,
  state: NodeStatusEvent["state"],
  owner: string | null = null,
): NodeStatusEvent {
  return { event_id: id, node_id: node, state, t_utc: 100 + id, owner };
}

describe("floorplan markers", () => {
  it("starts with every node Idle", () => {
    const plan = new Floorplan(defaultSpots());
    expect(plan.allMarkers()).toHaveLength(18);
    expect(plan.allMarkers().every((m) => m.state === "Idle")).toBe(true);
    const svg = plan.toSvg();
    const idleFills = svg.split(STATE_FILL.Idle).length - 1;
    expect(idleFills).toBe(18);
  });

  it("mirrors an injected event within that one event", () => {
    const plan = new Floorplan(defaultSpots());
    expect(plan.apply(ev(1, "rrh-1", "Active", "res-0001"))).toBe(true);
    const m = plan.marker("rrh-1")!;
    expect(m.state).toBe("Active");
    expect(m.owner).toBe("res-0001");
    const svg = plan.toSvg();
    expect(svg).toContain(`data-node="rrh-1" data-state="Active"`);
    expect(svg).toContain(STATE_FILL.Active);
  });

  it("ignores stale replays and unknown nodes", () => {
    const plan = new Floorplan(defaultSpots());
    plan.apply(ev(5, "emu-2", "Active", "res-0002"));
    expect(plan.apply(ev(5, "emu-2", "Idle"))).toBe(false);
    expect(plan.apply(ev(4, "emu-2", "Idle"))).toBe(false);
    expect(plan.marker("emu-2")!.state).toBe("Active");
    expect(plan.apply(ev(6, "mystery-9", "Fault"))).toBe(false);
  });

  it("tooltips carry owner, frequency, and bandwidth", () => {
    const plan = new Floorplan(defaultSpots());
    plan.apply(ev(1, "rrh-3", "Active", "res-0042"));
    plan.setStats("rrh-3", { freq_hz: 2.45e9, bw_hz: 20e6 });
    const svg = plan.toSvg();
    expect(svg).toContain("owner res-0042");
    expect(svg).toContain("2450.0 MHz");
    expect(svg).toContain("20.0 MHz wide");
  });

  it("drops stale stats once the node goes Idle", () => {
    const plan = new Floorplan(defaultSpots());
    plan.apply(ev(1, "rrh-1", "Active", "res-0001"));
    plan.setStats("rrh-1", { freq_hz: 2.45e9 });
    plan.apply(ev(2, "rrh-1", "Idle", null));
    expect(plan.marker("rrh-1")!.stats).toEqual({});
    expect(plan.toSvg()).not.toContain("2450.0 MHz");
  });

  it("takes arbitrary coordinate sets", () => {
    const plan = new Floorplan([{ id: "roof-antenna", x: 5, y: 7 }]);
    plan.apply(ev(1, "roof-antenna", "Fault"));
    const svg = plan.toSvg();
    expect(svg).toContain('cx="5" cy="7"');
    expect(svg).toContain(STATE_FILL.Fault);
  });
});
