/**
 * Event feed subscription. The transport is a long-lived chunked HTTP
 * response carrying newline-delimited events; we reassemble lines from
 * arbitrary chunk boundaries and enforce the id contract client-side:
 * frames arrive in id order, starting at 1, with no gaps.
 */

import {
  decodeFeedLine,
  isFeedEnd,
  FeedEnd,
  FeedFrame,
  FeedProtocolError,
} from "./protocol.js";

export interface FeedHandlers {
  onFrame(frame: FeedFrame): void;
  onEnd(end: FeedEnd): void;
  onError(err: Error): void;
}

/**
 * Incremental parser, separate from any transport so it can be fed
 * synthetic chunks in tests. Feed it text as it arrives; it emits
 * complete frames and validates ordering.
 */
export class FeedParser {
  private buffer = "";
  private nextId = 1;
  private ended = false;

  constructor(private readonly handlers: FeedHandlers) {}

  get expectedNextId(): number {
    return this.nextId;
  }

  push(chunk: string): void {
    if (this.ended) return;
    this.buffer += chunk;
    let newline = this.buffer.indexOf("\n");
    while (newline !== -1) {
      const line = this.buffer.slice(0, newline).trim();
      this.buffer = this.buffer.slice(newline + 1);
      if (line.length > 0) {
        this.handleLine(line);
        if (this.ended) return;
      }
      newline = this.buffer.indexOf("\n");
    }
  }

  /** Call when the transport closes; flushes a trailing unterminated line. */
  close(): void {
    if (this.ended) return;
    const rest = this.buffer.trim();
    this.buffer = "";
    if (rest.length > 0) this.handleLine(rest);
    if (!this.ended) {
      this.ended = true;
      this.handlers.onError(new FeedProtocolError("feed closed without an end banner"));
    }
  }

  private handleLine(line: string): void {
    let msg: FeedFrame | FeedEnd;
    try {
      msg = decodeFeedLine(line);
    } catch (err) {
      this.ended = true;
      this.handlers.onError(err as Error);
      return;
    }
    if (isFeedEnd(msg)) {
      this.ended = true;
      if (msg.events !== this.nextId - 1) {
        this.handlers.onError(
          new FeedProtocolError(
            `feed ended claiming ${msg.events} events but ${this.nextId - 1} were received`,
          ),
        );
        return;
      }
      this.handlers.onEnd(msg);
      return;
    }
    if (msg.event.id !== this.nextId) {
      this.ended = true;
      this.handlers.onError(
        new FeedProtocolError(`expected event id ${this.nextId}, got ${msg.event.id}`),
      );
      return;
    }
    this.nextId += 1;
    this.handlers.onFrame(msg);
  }
}

export interface FeedSubscription {
  cancel(): void;
  done: Promise<void>;
}

/**
 * Open the event feed for a session and stream frames into handlers.
 * The full history replays from id 1 before live events; callers never
 * need a resume cursor.
 */
export function subscribeFeed(
  baseUrl: string,
  sessionId: string,
  handlers: FeedHandlers,
): FeedSubscription {
  const controller = new AbortController();
  const parser = new FeedParser(handlers);

  const done = (async () => {
    let response: Response;
    try {
      response = await fetch(
        `${baseUrl}/sessions/${encodeURIComponent(sessionId)}/events`,
        { signal: controller.signal },
      );
    } catch (err) {
      if (!controller.signal.aborted) handlers.onError(err as Error);
      return;
    }
    if (!response.ok || response.body === null) {
      handlers.onError(
        new Error(`feed request failed: ${response.status} ${response.statusText}`),
      );
      return;
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    try {
      for (;;) {
        const { done: finished, value } = await reader.read();
        if (finished) break;
        parser.push(decoder.decode(value, { stream: true }));
      }
      parser.push(decoder.decode());
      parser.close();
    } catch (err) {
      if (!controller.signal.aborted) handlers.onError(err as Error);
    }
  })();

  return {
    cancel: () => controller.abort(),
    done,
  };
}
