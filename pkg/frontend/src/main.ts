/** Browser shell: wires the form, floorplan, and review queue to the DOM. */

import { Gateway } from "./api.js";
import { ReviewQueue } from "./admin.js";
import { LiveFeed } from "./events.js";
import { Floorplan, defaultSpots } from "./floorplan.js";
import { ReservationForm } from "./form.js";
import type { NodeStatusEvent } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function readNumber(root: HTMLElement, name: string, fallback: number): number {
  const input = root.querySelector<HTMLInputElement>(`input[name="${name}"]`);
  const n = input ? Number(input.value) : NaN;
  return Number.isFinite(n) ? n : fallback;
}

async function connect(base: string, token: string): Promise<void> {
  const gw = new Gateway({ base, token });
  const inv = await gw.inventory();
  const form = new ReservationForm(gw, {
    bands: inv.licensed_bands,
    catalog: inv.software_catalog,
  });
  const plan = new Floorplan(defaultSpots());
  const queue = new ReviewQueue(gw);

  const formHost = el<HTMLDivElement>("form-host");
  const planHost = el<HTMLDivElement>("plan-host");
  const queueHost = el<HTMLDivElement>("queue-host");
  const feedBadge = el<HTMLSpanElement>("feed-state");

  const drawForm = () => {
    formHost.innerHTML = form.render();
  };
  const drawPlan = () => {
    planHost.innerHTML = plan.toSvg();
  };
  const drawQueue = () => {
    queueHost.innerHTML = queue.render();
  };

  // Uncontrolled inputs: read the DOM back into the model on submit.
  const harvest = () => {
    const v = form.values;
    v.start_utc = readNumber(formHost, "start_utc", v.start_utc);
    v.end_utc = readNumber(formHost, "end_utc", v.end_utc);
    v.cpu_cores = readNumber(formHost, "cpu_cores", v.cpu_cores);
    v.cpu_threads = readNumber(formHost, "cpu_threads", v.cpu_threads);
    v.ram_gb = readNumber(formHost, "ram_gb", v.ram_gb);
    v.storage_gb = readNumber(formHost, "storage_gb", v.storage_gb);
    v.vm_lifetime_s = readNumber(formHost, "vm_lifetime_s", v.vm_lifetime_s);
    v.n_usrps = readNumber(formHost, "n_usrps", v.n_usrps);
    v.requested_bps = readNumber(formHost, "requested_bps", v.requested_bps);
    v.software = Array.from(
      formHost.querySelectorAll<HTMLInputElement>('input[name="software"]:checked'),
    ).map((c) => c.value);
    const picked = formHost.querySelector<HTMLInputElement>(
      'input[name="path"]:checked',
    );
    if (picked) v.path = picked.value as typeof v.path;
    v.channels = Array.from(formHost.querySelectorAll(".channel-row")).map((row) => ({
      center_hz: readNumber(row as HTMLElement, "center_hz", 2.45e9),
      bw_hz: readNumber(row as HTMLElement, "bw_hz", 20e6),
    }));
  };

  formHost.addEventListener("submit", (ev) => {
    ev.preventDefault();
    harvest();
    form.submit().then(drawForm);
  });
  formHost.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.id === "add-channel") {
      harvest();
      form.values.channels.push({ center_hz: 2.45e9, bw_hz: 20e6 });
      drawForm();
    }
  });

  queueHost.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const id = target.dataset.id;
    if (!id) return;
    const act = target.classList.contains("approve")
      ? queue.approve(id)
      : target.classList.contains("deny")
        ? queue.deny(id)
        : null;
    act?.then(drawQueue);
  });

  const onEvent = (ev: NodeStatusEvent) => {
    if (!plan.apply(ev)) return;
    if (ev.state === "Active" && ev.owner) {
      gw.reservation(ev.owner)
        .then((res) => {
          const ch = res.spec.radio.channels[0];
          if (ch) plan.setStats(ev.node_id, { freq_hz: ch.center_hz, bw_hz: ch.bw_hz });
          drawPlan();
        })
        .catch(() => {});
    }
    drawPlan();
  };
  const feed = new LiveFeed((lastId) => gw.eventsUrl(lastId), onEvent, {
    onState: (s) => {
      feedBadge.textContent = s;
      feedBadge.className = `feed-${s}`;
    },
  });

  drawForm();
  drawPlan();
  drawQueue();
  feed.start();
  queue.refresh().then(drawQueue).catch(() => {});
  el<HTMLDivElement>("portal").hidden = false;
}

window.addEventListener("DOMContentLoaded", () => {
  const baseInput = el<HTMLInputElement>("gw-base");
  const tokenInput = el<HTMLInputElement>("gw-token");
  baseInput.value = localStorage.getItem("sdrlab.base") ?? "http://127.0.0.1:8000";
  tokenInput.value = localStorage.getItem("sdrlab.token") ?? "";
  el<HTMLButtonElement>("gw-connect").addEventListener("click", () => {
    const base = baseInput.value.trim();
    const token = tokenInput.value.trim();
    localStorage.setItem("sdrlab.base", base);
    localStorage.setItem("sdrlab.token", token);
    connect(base, token).catch((err) => {
      el<HTMLDivElement>("connect-error").textContent = String(err);
    });
  });
});
