// Session store: a verbatim mirror of the last server response. The client
// never simulates outcomes or advances phases on its own; it only displays
// what the service last said (the countdown ticker is cosmetic).

import type { CreatedSession, SessionState } from "./api.js";

export class SessionStore {
  created: CreatedSession | null = null;
  state: SessionState | null = null;
  selectedKey: string | null = null;
  lastBanner: string | null = null;
  /** wall-clock ms when `state.remaining_seconds` was received */
  private receivedAt = 0;

  applyCreated(created: CreatedSession): void {
    this.created = created;
  }

  applyState(state: SessionState, now: number = Date.now()): void {
    this.state = state;
    this.receivedAt = now;
  }

  get sessionId(): string {
    if (!this.created) throw new Error("no session yet");
    return this.created.session_id;
  }

  get phase(): string {
    return this.state?.phase ?? this.created?.phase ?? "practice";
  }

  isOpen(boxId: string): boolean {
    return this.state?.open[boxId] ?? false;
  }

  revealedCount(boxId: string): number | null {
    const fromServer = this.state?.revealed?.[boxId];
    if (fromServer !== undefined) return fromServer;
    // full-observability sessions carry counts in the created payload
    const box = this.created?.boxes.find((b) => b.id === boxId);
    return box?.number ?? null;
  }

  /** cosmetic countdown; the server clock is authoritative */
  displayRemaining(now: number = Date.now()): number {
    if (!this.state) return this.created?.time_limit ?? 0;
    const elapsed = (now - this.receivedAt) / 1000;
    return Math.max(0, this.state.remaining_seconds - elapsed);
  }
}
