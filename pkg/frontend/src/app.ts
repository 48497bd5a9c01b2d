// Controller wiring the API client, the mirror store, and the renderers into
// the four-phase session flow. All outcomes and phase changes come from the
// server; this file only sequences requests and re-renders.

import {
  ApiError,
  PhaseError,
  SessionApi,
  TimeExpiredError,
  type ActionOutcome,
  type GeneralizationTrialInfo,
} from "./api.js";
import {
  renderBanner,
  renderBoard,
  renderCountdown,
  renderGeneralizationTrial,
  renderHistory,
  renderInstruction,
} from "./board.js";
import { SessionStore } from "./state.js";

export interface AppElements {
  screen: HTMLElement;
  countdown: HTMLElement;
  history: HTMLElement;
  banner: HTMLElement;
}

export interface AppOptions {
  pollMs?: number;
  startTimers?: boolean;
}

export class PlayApp {
  readonly store = new SessionStore();
  private trials: GeneralizationTrialInfo[] = [];
  private currentTrial = 0;
  private chosen: Record<number, string> = {};
  private pollHandle: ReturnType<typeof setInterval> | null = null;
  private tickHandle: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: SessionApi,
    private els: AppElements,
    private opts: AppOptions = {},
  ) {}

  async start(seed?: number, subjectId?: string): Promise<void> {
    const created = await this.api.createSession(seed, subjectId);
    this.store.applyCreated(created);
    this.render();
  }

  async beginTest(): Promise<void> {
    const state = await this.api.beginTest(this.store.sessionId);
    this.store.applyState(state);
    if (this.opts.startTimers !== false) this.startTimers();
    this.render();
  }

  async attempt(boxId: string, keyId: string): Promise<void> {
    await this.performAction({ type: "attempt", box_id: boxId, key_id: keyId });
  }

  async pickUp(boxId: string): Promise<void> {
    await this.performAction({ type: "observe", box_id: boxId });
  }

  private async performAction(
    action: { type: "attempt"; box_id: string; key_id: string } | { type: "observe"; box_id: string },
  ): Promise<void> {
    try {
      const resp = await this.api.postAction(this.store.sessionId, action);
      this.store.applyState(resp.state);
      this.store.lastBanner = this.describeOutcome(action.box_id, resp.outcome);
    } catch (err) {
      if (err instanceof TimeExpiredError) {
        this.store.lastBanner = "Time is up!";
        await this.refresh();
      } else if (err instanceof PhaseError) {
        this.store.lastBanner = err.message;
        await this.refresh();
      } else if (err instanceof ApiError) {
        this.store.lastBanner = `The game refused that move (${err.message}).`;
      } else {
        throw err;
      }
    }
    await this.maybeEnterGeneralization();
    this.render();
  }

  private describeOutcome(boxId: string, outcome: ActionOutcome): string {
    if (outcome.type === "attempt") {
      return outcome.success
        ? `The ${boxId} box opened!`
        : `The ${boxId} box did not open.`;
    }
    return `The ${boxId} box shows ${outcome.revealed_number} shapes.`;
  }

  async refresh(): Promise<void> {
    if (!this.store.created) return;
    const state = await this.api.getState(this.store.sessionId);
    this.store.applyState(state);
    await this.maybeEnterGeneralization();
    this.render();
  }

  private async maybeEnterGeneralization(): Promise<void> {
    if (this.store.phase === "generalization" && this.trials.length === 0) {
      this.stopTimers();
      const payload = await this.api.getGeneralization(this.store.sessionId);
      this.trials = payload.trials;
      this.currentTrial = 0;
    }
  }

  async choose(trialIndex: number, keyId: string): Promise<void> {
    // stale or repeated clicks are ignored: a choice locks its trial
    if (trialIndex !== this.currentTrial) return;
    const trial = this.trials[trialIndex];
    if (!trial || this.chosen[trial.trial] !== undefined) return;
    this.chosen[trial.trial] = keyId;
    const resp = await this.api.postChoice(this.store.sessionId, trial.trial, keyId);
    this.currentTrial += 1;
    if (resp.phase === "done") {
      await this.showDone();
    }
    this.render();
  }

  async downloadTrajectory(): Promise<string> {
    return this.api.downloadTrajectory(this.store.sessionId);
  }

  private async showDone(): Promise<void> {
    const text = await this.downloadTrajectory();
    const doc = this.els.screen.ownerDocument;
    this.els.screen.textContent = "";
    const panel = doc.createElement("div");
    panel.className = "done";
    const heading = doc.createElement("h2");
    heading.textContent = "All done, thanks for playing!";
    panel.appendChild(heading);
    if (typeof URL !== "undefined" && typeof URL.createObjectURL === "function") {
      const link = doc.createElement("a");
      link.href = URL.createObjectURL(new Blob([text], { type: "text/csv" }));
      link.setAttribute("download", `${this.store.sessionId}.csv`);
      link.textContent = "Download your session";
      panel.appendChild(link);
    }
    const pre = doc.createElement("pre");
    pre.dataset.role = "trajectory";
    pre.textContent = text;
    panel.appendChild(pre);
    this.els.screen.appendChild(panel);
  }

  render(): void {
    renderBanner(this.els.banner, this.store);
    renderHistory(this.els.history, this.store);
    renderCountdown(this.els.countdown, this.store);
    const phase = this.store.phase;
    if (phase === "practice") {
      renderInstruction(this.els.screen, this.store.created?.instruction ?? "", () => {
        void this.beginTest();
      });
      return;
    }
    if (phase === "test") {
      renderBoard(this.els.screen, this.store, {
        onAttempt: (boxId, keyId) => void this.attempt(boxId, keyId),
        onPickUp: (boxId) => void this.pickUp(boxId),
        onSelectKey: (keyId) => {
          this.store.selectedKey = keyId;
          this.render();
        },
      });
      return;
    }
    if (phase === "generalization") {
      const index = this.currentTrial;
      const trial = this.trials[index];
      if (trial) {
        renderGeneralizationTrial(
          this.els.screen,
          trial,
          this.chosen[trial.trial] ?? null,
          (keyId) => void this.choose(index, keyId),
        );
      }
    }
    // "done" renders once from showDone()
  }

  startTimers(): void {
    const poll = this.opts.pollMs ?? 3000;
    this.pollHandle = setInterval(() => void this.refresh(), poll);
    this.tickHandle = setInterval(() => renderCountdown(this.els.countdown, this.store), 1000);
  }

  stopTimers(): void {
    if (this.pollHandle) clearInterval(this.pollHandle);
    if (this.tickHandle) clearInterval(this.tickHandle);
    this.pollHandle = this.tickHandle = null;
  }
}

export function mount(doc: Document, baseUrl = ""): PlayApp {
  const els: AppElements = {
    screen: doc.getElementById("screen")!,
    countdown: doc.getElementById("countdown")!,
    history: doc.getElementById("history")!,
    banner: doc.getElementById("banner")!,
  };
  return new PlayApp(new SessionApi(baseUrl), els);
}
