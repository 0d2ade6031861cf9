/** Node status feed with reconnect-and-resume.
 *
 * The browser EventSource reconnects on its own, but only with the
 * Last-Event-ID header, which the stream also accepts as ?last_id.
 * Driving the reconnect ourselves keeps the resume point explicit and
 * lets tests inject a fake source.
 */

import type { NodeStatusEvent } from "./types.js";

export interface SourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  close(): void;
}

export type SourceFactory = (url: string) => SourceLike;

export type FeedState = "connecting" | "open" | "dropped" | "closed";

export interface LiveFeedOptions {
  makeSource?: SourceFactory;
  retryMs?: number;
  onState?: (state: FeedState) => void;
}

export class LiveFeed {
  lastId = 0;
  state: FeedState = "closed";
  private source: SourceLike | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private readonly makeSource: SourceFactory;
  private readonly retryMs: number;

  constructor(
    private readonly urlFor: (lastId: number) => string,
    private readonly onEvent: (ev: NodeStatusEvent) => void,
    opts: LiveFeedOptions = {},
  ) {
    this.makeSource =
      opts.makeSource ?? ((url) => new EventSource(url) as unknown as SourceLike);
    this.retryMs = opts.retryMs ?? 2000;
    this.onState = opts.onState ?? (() => {});
  }

  private readonly onState: (state: FeedState) => void;

  start(): void {
    this.stopped = false;
    this.open();
  }

  private setState(s: FeedState): void {
    this.state = s;
    this.onState(s);
  }

  private open(): void {
    this.setState("connecting");
    const src = this.makeSource(this.urlFor(this.lastId));
    this.source = src;
    src.onopen = () => this.setState("open");
    src.onmessage = (msg) => {
      let ev: NodeStatusEvent;
      try {
        ev = JSON.parse(msg.data);
      } catch {
        return;
      }
      if (ev.event_id <= this.lastId) return; // replayed duplicate
      this.lastId = ev.event_id;
      this.onEvent(ev);
    };
    src.onerror = () => {
      src.close();
      if (this.stopped) return;
      this.setState("dropped");
      this.retryTimer = setTimeout(() => this.open(), this.retryMs);
    };
  }

  close(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.source?.close();
    this.setState("closed");
  }
}
