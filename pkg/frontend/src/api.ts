/**
 * Thin client for the session endpoints. Everything the UI knows about a
 * session arrives through these three calls plus the event feed; there is
 * no side channel.
 */

import { SessionInfo } from "./protocol.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const text = await response.text();
  let doc: Record<string, unknown> = {};
  if (text.length > 0) {
    try {
      doc = JSON.parse(text) as Record<string, unknown>;
    } catch {
      throw new ApiError(response.status, `non-JSON response: ${text.slice(0, 120)}`);
    }
  }
  if (!response.ok) {
    const detail = typeof doc.error === "string" ? doc.error : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return doc as T;
}

export async function listSessions(baseUrl: string): Promise<SessionInfo[]> {
  const doc = await request<{ sessions: SessionInfo[] }>(`${baseUrl}/sessions`);
  return doc.sessions;
}

export interface CreateSessionRequest {
  task: string;
  agent?: string;
  scripted_responses?: string[];
  limits?: { max_iterations?: number; max_cost?: number };
}

export async function createSession(
  baseUrl: string,
  body: CreateSessionRequest,
): Promise<SessionInfo> {
  return request<SessionInfo>(`${baseUrl}/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export interface MessageAck {
  /** id the user message received in the session's event stream */
  event_id: number;
}

/**
 * Deliver user input to a running session. With interrupt=true the agent's
 * in-flight action is cancelled first; the feed shows the cancellation
 * error before the message itself.
 */
export async function sendMessage(
  baseUrl: string,
  sessionId: string,
  text: string,
  interrupt = false,
): Promise<MessageAck> {
  return request<MessageAck>(
    `${baseUrl}/sessions/${encodeURIComponent(sessionId)}/message`,
    {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text, interrupt }),
    },
  );
}
