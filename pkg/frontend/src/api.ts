import type { AttemptResponse, CreatedSession, Debrief, SessionState } from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = `request failed (${response.status})`;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

/** Thin typed client for the session service. */
export class SessionApi {
  constructor(private readonly baseUrl: string = "") {}

  createSession(condition?: string): Promise<CreatedSession> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify(condition ? { condition } : {}),
    });
  }

  getState(sessionId: string): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions/${sessionId}`);
  }

  postAttempt(sessionId: string, taskId: number, decisionMs: number): Promise<AttemptResponse> {
    return request(`${this.baseUrl}/sessions/${sessionId}/attempts`, {
      method: "POST",
      body: JSON.stringify({ task_id: taskId, decision_ms: decisionMs }),
    });
  }

  stopSession(sessionId: string): Promise<Debrief> {
    return request(`${this.baseUrl}/sessions/${sessionId}/stop`, { method: "POST" });
  }
}
