/**
 * Wire types for the session API. One event encoding everywhere: the feed
 * carries the same line format as trajectory files, so a frame is just a
 * parsed line plus the pane it renders into.
 */

export type EventKind =
  | "shell_command"
  | "code_cell"
  | "browse"
  | "message"
  | "delegate"
  | "finish"
  | "shell_result"
  | "cell_result"
  | "browse_result"
  | "user_message"
  | "delegate_result"
  | "error";

export type Pane = "chat" | "terminal" | "code" | "browser" | "files";

export interface EventDoc {
  id: number;
  kind: EventKind;
  source: "agent" | "user" | "environment";
  payload: Record<string, unknown>;
  cause?: number;
  timestamp?: number;
}

export interface FeedFrame {
  event: EventDoc;
  pane: Pane;
  /** the canonical encoded line, unmodified */
  raw: string;
}

export interface FeedEnd {
  reason: string;
  summary: string;
  events: number;
}

export interface SessionInfo {
  session_id: string;
  agent: string;
  status: "starting" | "running" | "done";
  events: number;
  task: string;
  reason?: string;
  summary?: string;
}

// Deterministic kind -> pane table. The files pane has no kind of its own:
// it is a projection over editor output (see render.ts).
export const PANE_FOR_KIND: Record<EventKind, Pane> = {
  user_message: "chat",
  message: "chat",
  finish: "chat",
  delegate: "chat",
  delegate_result: "chat",
  shell_command: "terminal",
  shell_result: "terminal",
  error: "terminal",
  code_cell: "code",
  cell_result: "code",
  browse: "browser",
  browse_result: "browser",
};

export function paneForKind(kind: string): Pane {
  return PANE_FOR_KIND[kind as EventKind] ?? "chat";
}

export class FeedProtocolError extends Error {}

/** Parse one feed line into a frame or an end banner. */
export function decodeFeedLine(line: string): FeedFrame | FeedEnd {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    throw new FeedProtocolError(`feed line is not JSON: ${line.slice(0, 80)}`);
  }
  if (typeof doc !== "object" || doc === null) {
    throw new FeedProtocolError("feed line is not an object");
  }
  const record = doc as Record<string, unknown>;
  if ("feed_end" in record) {
    const end = record.feed_end as Record<string, unknown>;
    return {
      reason: String(end.reason ?? "unknown"),
      summary: String(end.summary ?? ""),
      events: Number(end.events ?? 0),
    };
  }
  if (typeof record.id !== "number" || typeof record.kind !== "string") {
    throw new FeedProtocolError("event frame needs numeric id and kind");
  }
  const event = record as unknown as EventDoc;
  return { event, pane: paneForKind(event.kind), raw: line };
}

export function isFeedEnd(msg: FeedFrame | FeedEnd): msg is FeedEnd {
  return !("event" in msg);
}
