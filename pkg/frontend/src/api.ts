// Typed client for the session HTTP API. The UI talks to the documented
// endpoints and nothing else; every game outcome comes from the server.

export interface BoxInfo {
  id: string;
  color: string;
  shape: string;
  position: number;
  number?: number; // present only under full observability
}

export interface KeyInfo {
  id: string;
  color: string;
  number: number | null;
  shape: string | null;
}

export interface CreatedSession {
  session_id: string;
  phase: string;
  instruction: string;
  time_limit: number;
  boxes: BoxInfo[];
  keys: KeyInfo[];
}

export interface HistoryEntry {
  trial: number;
  type: "attempt" | "observe";
  box_id: string;
  key_id?: string;
  success?: boolean;
  revealed_number?: number;
}

export interface SessionState {
  session_id: string;
  phase: string;
  open: Record<string, boolean>;
  revealed: Record<string, number>;
  trial_index: number;
  remaining_seconds: number;
  history: HistoryEntry[];
  generalization_choices: Record<string, string>;
}

export interface ActionOutcome {
  type: "attempt" | "observe";
  success?: boolean;
  revealed_number?: number;
}

export interface ActionResponse {
  outcome: ActionOutcome;
  state: SessionState;
}

export interface GeneralizationTrialInfo {
  trial: number;
  box: { id: string; color: string; shape: string; number: number };
  candidates: KeyInfo[];
}

export type ActionRequest =
  | { type: "attempt"; box_id: string; key_id: string }
  | { type: "observe"; box_id: string };

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

/** 409: the action does not belong to the session's current phase. */
export class PhaseError extends ApiError {}

/** 410: the test-phase wall clock ran out. */
export class TimeExpiredError extends ApiError {}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function raiseFor(resp: Response): Promise<Response> {
  if (resp.ok) return resp;
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  if (resp.status === 409) throw new PhaseError(detail, 409);
  if (resp.status === 410) throw new TimeExpiredError(detail, 410);
  throw new ApiError(detail, resp.status);
}

export class SessionApi {
  private fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    });
    return (await raiseFor(resp)).json() as Promise<T>;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    return (await raiseFor(resp)).json() as Promise<T>;
  }

  createSession(seed?: number, subjectId?: string): Promise<CreatedSession> {
    return this.post<CreatedSession>("/sessions", {
      seed: seed ?? null,
      subject_id: subjectId ?? null,
    });
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.get<SessionState>(`/sessions/${sessionId}`);
  }

  beginTest(sessionId: string): Promise<SessionState> {
    return this.post<SessionState>(`/sessions/${sessionId}/begin-test`);
  }

  postAction(sessionId: string, action: ActionRequest): Promise<ActionResponse> {
    return this.post<ActionResponse>(`/sessions/${sessionId}/actions`, action);
  }

  getGeneralization(sessionId: string): Promise<{ trials: GeneralizationTrialInfo[] }> {
    return this.get(`/sessions/${sessionId}/generalization`);
  }

  postChoice(
    sessionId: string,
    trial: number,
    keyId: string,
  ): Promise<{ phase: string; choices: Record<string, string> }> {
    return this.post(`/sessions/${sessionId}/generalization`, {
      trial,
      key_id: keyId,
    });
  }

  async downloadTrajectory(sessionId: string): Promise<string> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/trajectory`);
    return (await raiseFor(resp)).text();
  }
}
