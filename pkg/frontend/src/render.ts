/**
 * Pure view-model. Frames go in, pane contents come out; no DOM and no
 * network so the whole thing is testable with plain objects. The UI never
 * invents state: everything shown is a projection of the event feed.
 */

import { EventDoc, FeedEnd, FeedFrame, Pane } from "./protocol.js";

export interface PaneLine {
  eventId: number;
  text: string;
}

export interface FileView {
  path: string;
  lines: number;
  eventId: number;
}

export interface ViewState {
  panes: Record<Pane, PaneLine[]>;
  /** last-seen view per file path, from editor output in observations */
  files: Map<string, FileView>;
  lastEventId: number;
  end: FeedEnd | null;
  /** set when the session refuses input (closed, or awaiting none) */
  inputDisabledReason: string | null;
}

export function emptyState(): ViewState {
  return {
    panes: { chat: [], terminal: [], code: [], browser: [], files: [] },
    files: new Map(),
    lastEventId: 0,
    end: null,
    inputDisabledReason: null,
  };
}

function str(payload: Record<string, unknown>, key: string): string {
  const value = payload[key];
  return typeof value === "string" ? value : "";
}

function describe(event: EventDoc): string {
  const p = event.payload;
  switch (event.kind) {
    case "user_message":
      return `you: ${str(p, "content")}`;
    case "message":
      return `agent: ${str(p, "content")}`;
    case "finish":
      return `finished: ${str(p, "summary")}`;
    case "delegate":
      return `delegating to ${str(p, "agent")}: ${str(p, "subtask")}`;
    case "delegate_result":
      return `delegate returned: ${str(p, "summary")}`;
    case "shell_command":
      return `$ ${str(p, "command")}`;
    case "shell_result": {
      const code = p.exit_code;
      const out = str(p, "output");
      return out.length > 0 ? `${out}\n(exit ${code})` : `(exit ${code})`;
    }
    case "error":
      return `error [${str(p, "category")}]: ${str(p, "message")}`;
    case "code_cell":
      return str(p, "source");
    case "cell_result":
      return str(p, "output");
    case "browse":
      return str(p, "program");
    case "browse_result":
      return str(p, "page");
    default:
      return JSON.stringify(p);
  }
}

// Editor output starts with this header when a skill opens or edits a file.
const FILE_HEADER = /^\[File: (.+) \((\d+) lines total\)\]$/;

function harvestFiles(state: ViewState, event: EventDoc): void {
  if (event.kind !== "shell_result" && event.kind !== "cell_result") return;
  const output = str(event.payload, "output");
  for (const line of output.split("\n")) {
    const match = FILE_HEADER.exec(line.trim());
    if (match === null) continue;
    const view: FileView = {
      path: match[1],
      lines: Number(match[2]),
      eventId: event.id,
    };
    state.files.set(view.path, view);
    state.panes.files.push({
      eventId: event.id,
      text: `${view.path} (${view.lines} lines)`,
    });
  }
}

export class RenderOrderError extends Error {}

/**
 * Fold one frame into the state. Frames must arrive in id order; a
 * violation here means the transport or parser broke its contract, so we
 * fail loudly instead of rendering a lie.
 */
export function applyFrame(state: ViewState, frame: FeedFrame): ViewState {
  if (frame.event.id <= state.lastEventId) {
    throw new RenderOrderError(
      `frame ${frame.event.id} arrived after ${state.lastEventId}`,
    );
  }
  state.lastEventId = frame.event.id;
  state.panes[frame.pane].push({ eventId: frame.event.id, text: describe(frame.event) });
  harvestFiles(state, frame.event);
  if (frame.event.kind === "message" && frame.event.payload.wait_for_user === true) {
    // agent is blocked on us; make sure input is live
    state.inputDisabledReason = null;
  }
  return state;
}

export function applyEnd(state: ViewState, end: FeedEnd): ViewState {
  state.end = end;
  state.inputDisabledReason = `session ended (${end.reason})`;
  return state;
}
