/**
 * DOM wiring. Renders the five panes from the event feed and forwards user
 * input back through the message endpoint. All state lives in the
 * view-model; this file only reflects it into elements.
 */

import { createSession, listSessions, sendMessage, ApiError } from "./api.js";
import { subscribeFeed, FeedSubscription } from "./feedClient.js";
import { applyEnd, applyFrame, emptyState, ViewState } from "./render.js";
import { Pane, SessionInfo } from "./protocol.js";

const PANES: Pane[] = ["chat", "terminal", "code", "browser", "files"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  // ?api=http://host:port points the UI at a server on another origin
  private baseUrl =
    new URLSearchParams(window.location.search).get("api") ?? window.location.origin;
  private state: ViewState = emptyState();
  private subscription: FeedSubscription | null = null;
  private sessionId: string | null = null;
  private sending = false;

  private readonly sessionList = el<HTMLUListElement>("session-list");
  private readonly taskInput = el<HTMLInputElement>("task-input");
  private readonly messageInput = el<HTMLInputElement>("message-input");
  private readonly interruptBox = el<HTMLInputElement>("interrupt-box");
  private readonly sendButton = el<HTMLButtonElement>("send-button");
  private readonly statusLine = el<HTMLDivElement>("status-line");

  start(): void {
    el<HTMLButtonElement>("new-session").addEventListener("click", () => {
      void this.createSession();
    });
    el<HTMLButtonElement>("refresh-sessions").addEventListener("click", () => {
      void this.refreshSessions();
    });
    this.sendButton.addEventListener("click", () => {
      void this.send();
    });
    this.messageInput.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter") void this.send();
    });
    void this.refreshSessions();
    this.renderInputState();
  }

  private async refreshSessions(): Promise<void> {
    let sessions: SessionInfo[];
    try {
      sessions = await listSessions(this.baseUrl);
    } catch (err) {
      this.setStatus(`cannot reach server: ${(err as Error).message}`);
      return;
    }
    this.sessionList.replaceChildren(
      ...sessions.map((info) => {
        const item = document.createElement("li");
        const label = info.reason === undefined ? info.status : `done (${info.reason})`;
        item.textContent = `${info.session_id} [${label}] ${info.task.slice(0, 60)}`;
        item.addEventListener("click", () => this.attach(info.session_id));
        return item;
      }),
    );
  }

  private async createSession(): Promise<void> {
    const task = this.taskInput.value.trim();
    if (task.length === 0) {
      this.setStatus("enter a task first");
      return;
    }
    try {
      const info = await createSession(this.baseUrl, { task });
      this.attach(info.session_id);
      void this.refreshSessions();
    } catch (err) {
      this.setStatus(`create failed: ${(err as Error).message}`);
    }
  }

  private attach(sessionId: string): void {
    this.subscription?.cancel();
    this.sessionId = sessionId;
    this.state = emptyState();
    this.renderPanes();
    this.setStatus(`attached to ${sessionId}`);
    this.subscription = subscribeFeed(this.baseUrl, sessionId, {
      onFrame: (frame) => {
        applyFrame(this.state, frame);
        this.renderPanes();
        this.renderInputState();
      },
      onEnd: (end) => {
        applyEnd(this.state, end);
        this.setStatus(`session over: ${end.reason} after ${end.events} events`);
        this.renderInputState();
      },
      onError: (err) => {
        this.setStatus(`feed error: ${err.message}`);
      },
    });
  }

  private async send(): Promise<void> {
    const text = this.messageInput.value.trim();
    if (this.sessionId === null || text.length === 0 || this.sending) return;
    // lock the box until the server acknowledges delivery
    this.sending = true;
    this.renderInputState();
    try {
      await sendMessage(this.baseUrl, this.sessionId, text, this.interruptBox.checked);
      this.messageInput.value = "";
      this.interruptBox.checked = false;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.state.inputDisabledReason = `session closed: ${err.message}`;
      } else {
        this.setStatus(`send failed: ${(err as Error).message}`);
      }
    } finally {
      this.sending = false;
      this.renderInputState();
    }
  }

  private renderPanes(): void {
    for (const pane of PANES) {
      const body = el<HTMLPreElement>(`pane-${pane}`);
      body.textContent = this.state.panes[pane]
        .map((line) => `[${line.eventId}] ${line.text}`)
        .join("\n");
      body.scrollTop = body.scrollHeight;
    }
  }

  private renderInputState(): void {
    const reason = this.state.inputDisabledReason;
    const disabled = this.sending || this.sessionId === null || reason !== null;
    this.messageInput.disabled = disabled;
    this.sendButton.disabled = disabled;
    if (reason !== null) {
      this.messageInput.placeholder = reason;
    } else if (this.sessionId === null) {
      this.messageInput.placeholder = "attach to a session first";
    } else {
      this.messageInput.placeholder = "message the agent";
    }
  }

  private setStatus(text: string): void {
    this.statusLine.textContent = text;
  }
}

new App().start();
