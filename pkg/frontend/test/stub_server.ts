// In-memory stand-in for the session service, honoring the documented API
// contract: phases, 409/410 semantics, deterministic outcomes, CSV download.
// Used by the contract tests; removing the (stub) server breaks the client.

import type { SessionState } from "../src/api.js";

const BOXES = [
  { id: "red", color: "red", shape: "moon", position: 1, number: 1 },
  { id: "pink", color: "pink", shape: "cloud", position: 2, number: 2 },
  { id: "white", color: "white", shape: "diamond", position: 3, number: 4 },
  { id: "purple", color: "purple", shape: "heart", position: 4, number: 3 },
  { id: "blue", color: "blue", shape: "triangle", position: 5, number: 5 },
];

const KEYS = [
  ["red1", "red", 1, null],
  ["pink6", "pink", 6, null],
  ["grey2", "grey", 2, null],
  ["greycloud", "grey", null, "cloud"],
  ["orange4", "orange", 4, null],
  ["green3", "green", 3, null],
  ["bluestar", "blue", null, "star"],
  ["yellow5", "yellow", 5, null],
  ["greenheart", "green", null, "heart"],
  ["white7", "white", 7, null],
  ["triangleyellow", "yellow", null, "triangle"],
  ["diamondorange", "orange", null, "diamond"],
  ["purplearrow", "purple", null, "arrow"],
] as const;

const TRUE_PAIRS: Record<string, string> = {
  red: "red1",
  pink: "grey2",
  white: "orange4",
  purple: "green3",
  blue: "yellow5",
};

const GENERALIZATION = [0, 1, 2, 3].map((i) => ({
  trial: i,
  box: { id: `nov${i}`, color: "orange", shape: "star", number: 4 },
  candidates: [
    { id: `nov${i}-color`, color: "orange", number: null, shape: "leaf" },
    { id: `nov${i}-shape`, color: "silver", number: null, shape: "star" },
    { id: `nov${i}-number`, color: "gold", number: 4, shape: null },
    { id: `nov${i}-foil`, color: "bronze", number: 7, shape: null },
  ],
}));

interface HistoryRow {
  trial: number;
  type: "attempt" | "observe";
  box_id: string;
  key_id?: string;
  success?: boolean;
  revealed_number?: number;
}

export class StubServer {
  now = 0;
  phase = "practice";
  startedAt: number | null = null;
  timeLimit = 300;
  open: Record<string, boolean> = Object.fromEntries(BOXES.map((b) => [b.id, false]));
  revealed: Record<string, number> = {};
  history: HistoryRow[] = [];
  choices: Record<string, string> = {};
  sessionId = "stub-session";
  subjectId = "browser";
  requests: { method: string; path: string; body: unknown }[] = [];

  fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    this.requests.push({ method, path, body });
    return this.route(method, path, body);
  };

  private json(payload: unknown, status = 200): Response {
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }

  private error(status: number, detail: string): Response {
    return this.json({ detail }, status);
  }

  private expired(): boolean {
    return this.startedAt !== null && this.now - this.startedAt > this.timeLimit;
  }

  private state(): SessionState {
    if (this.phase === "test" && this.expired()) this.phase = "generalization";
    return {
      session_id: this.sessionId,
      phase: this.phase,
      open: { ...this.open },
      revealed: { ...this.revealed },
      trial_index: this.history.length,
      remaining_seconds:
        this.startedAt === null
          ? this.timeLimit
          : Math.max(0, this.timeLimit - (this.now - this.startedAt)),
      history: [...this.history],
      generalization_choices: { ...this.choices },
    };
  }

  private route(method: string, path: string, body: any): Response {
    if (method === "POST" && path === "/sessions") {
      if (body?.subject_id) this.subjectId = body.subject_id;
      return this.json({
        session_id: this.sessionId,
        phase: this.phase,
        instruction: "use a key that matches the color of the box",
        time_limit: this.timeLimit,
        boxes: BOXES.map(({ number, ...visible }) => visible),
        keys: KEYS.map(([id, color, number, shape]) => ({ id, color, number, shape })),
      });
    }
    if (!path.startsWith(`/sessions/${this.sessionId}`)) {
      return this.error(404, "unknown session");
    }
    const tail = path.slice(`/sessions/${this.sessionId}`.length);
    if (method === "POST" && tail === "/begin-test") {
      if (this.phase !== "practice") return this.error(409, "cannot begin test");
      this.phase = "test";
      this.startedAt = this.now;
      return this.json(this.state());
    }
    if (method === "GET" && tail === "") {
      return this.json(this.state());
    }
    if (method === "POST" && tail === "/actions") {
      if (this.phase !== "test") return this.error(409, "no actions in this phase");
      if (this.expired()) {
        this.phase = "generalization";
        return this.error(410, "time limit reached");
      }
      const box = BOXES.find((b) => b.id === body.box_id);
      if (!box) return this.error(404, "unknown box");
      let outcome: Record<string, unknown>;
      if (body.type === "attempt") {
        if (this.open[box.id]) return this.error(409, "box is already open");
        const success = TRUE_PAIRS[box.id] === body.key_id;
        if (success) this.open[box.id] = true;
        this.history.push({
          trial: this.history.length + 1,
          type: "attempt",
          box_id: box.id,
          key_id: body.key_id,
          success,
        });
        outcome = { type: "attempt", success };
      } else {
        this.revealed[box.id] = box.number;
        this.history.push({
          trial: this.history.length + 1,
          type: "observe",
          box_id: box.id,
          revealed_number: box.number,
        });
        outcome = { type: "observe", revealed_number: box.number };
      }
      if (Object.values(this.open).every(Boolean)) this.phase = "generalization";
      return this.json({ outcome, state: this.state() });
    }
    if (method === "GET" && tail === "/generalization") {
      if (this.phase !== "generalization" && this.phase !== "done") {
        return this.error(409, "generalization has not started");
      }
      return this.json({ trials: GENERALIZATION });
    }
    if (method === "POST" && tail === "/generalization") {
      if (this.phase !== "generalization") return this.error(409, "wrong phase");
      if (body.trial in this.choices) return this.error(409, "choice already submitted");
      this.choices[body.trial] = body.key_id;
      if (Object.keys(this.choices).length === GENERALIZATION.length) this.phase = "done";
      return this.json({ phase: this.phase, choices: { ...this.choices } });
    }
    if (method === "GET" && tail === "/trajectory") {
      const rows = ["subject_id,trial,action_type,box_id,key_id,outcome"];
      for (const h of this.history) {
        if (h.type === "attempt") {
          rows.push(
            `${this.subjectId},${h.trial},attempt,${h.box_id},${h.key_id},${h.success ? 1 : 0}`,
          );
        } else {
          rows.push(`${this.subjectId},${h.trial},observe,${h.box_id},,${h.revealed_number}`);
        }
      }
      return new Response(rows.join("\n") + "\n", {
        status: 200,
        headers: { "Content-Type": "text/csv" },
      });
    }
    return this.error(404, `no route ${method} ${path}`);
  }
}

export { TRUE_PAIRS, BOXES, KEYS };
