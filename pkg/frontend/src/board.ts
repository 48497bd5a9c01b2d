// DOM rendering for the play board: five boxes in line-up order, the key
// pile, revealed-count badges, history panel, countdown, phase banners.

import type { GeneralizationTrialInfo, HistoryEntry, KeyInfo } from "./api.js";
import type { SessionStore } from "./state.js";

export interface BoardHandlers {
  onAttempt(boxId: string, keyId: string): void;
  onPickUp(boxId: string): void;
  onSelectKey(keyId: string): void;
}

function el(
  doc: Document,
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function keyLabel(key: KeyInfo): string {
  return key.number !== null ? `${key.color} ${key.number}` : `${key.color} ${key.shape}`;
}

export function renderBoard(
  root: HTMLElement,
  store: SessionStore,
  handlers: BoardHandlers,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  if (!store.created) return;

  const board = el(doc, "div", "board");
  const boxes = [...store.created.boxes].sort((a, b) => a.position - b.position);
  for (const box of boxes) {
    const open = store.isOpen(box.id);
    const node = el(doc, "div", open ? "box open" : "box");
    node.dataset.boxId = box.id;
    node.appendChild(el(doc, "div", "box-color", `${box.color} box`));
    node.appendChild(el(doc, "div", "box-shape", box.shape));
    const count = store.revealedCount(box.id);
    if (count !== null) {
      node.appendChild(el(doc, "span", "count-badge", String(count)));
    }
    if (open) {
      node.appendChild(el(doc, "div", "box-open-marker", "open"));
    } else {
      node.addEventListener("click", () => {
        if (store.selectedKey) handlers.onAttempt(box.id, store.selectedKey);
      });
      const pickUp = el(doc, "button", "pick-up", "pick up");
      pickUp.addEventListener("click", (event) => {
        event.stopPropagation();
        handlers.onPickUp(box.id);
      });
      node.appendChild(pickUp);
    }
    board.appendChild(node);
  }
  root.appendChild(board);

  const pile = el(doc, "div", "key-pile");
  for (const key of store.created.keys) {
    const selected = store.selectedKey === key.id;
    const node = el(doc, "button", selected ? "key selected" : "key", keyLabel(key));
    node.dataset.keyId = key.id;
    node.addEventListener("click", () => handlers.onSelectKey(key.id));
    pile.appendChild(node);
  }
  root.appendChild(pile);
}

export function renderCountdown(node: HTMLElement, store: SessionStore): void {
  const remaining = Math.ceil(store.displayRemaining());
  const minutes = Math.floor(remaining / 60);
  const seconds = remaining % 60;
  node.textContent = `${minutes}:${String(seconds).padStart(2, "0")}`;
}

function describe(entry: HistoryEntry): string {
  if (entry.type === "attempt") {
    const result = entry.success ? "opened!" : "did not open";
    return `#${entry.trial} ${entry.key_id} on ${entry.box_id}: ${result}`;
  }
  return `#${entry.trial} picked up ${entry.box_id}: ${entry.revealed_number} shapes`;
}

export function renderHistory(node: HTMLElement, store: SessionStore): void {
  const doc = node.ownerDocument;
  node.textContent = "";
  for (const entry of store.state?.history ?? []) {
    node.appendChild(el(doc, "li", `history-${entry.type}`, describe(entry)));
  }
}

export function renderBanner(node: HTMLElement, store: SessionStore): void {
  node.textContent = store.lastBanner ?? "";
  node.className = store.lastBanner ? "banner visible" : "banner";
}

export function renderInstruction(
  root: HTMLElement,
  instruction: string,
  onBegin: () => void,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const panel = el(doc, "div", "instruction");
  panel.appendChild(el(doc, "h2", "", "A teacher shows you how the boxes open"));
  panel.appendChild(el(doc, "blockquote", "teacher-script", instruction));
  panel.appendChild(
    el(doc, "p", "demo", "(The teacher opens the red box with the red key.)"),
  );
  const button = el(doc, "button", "begin-test", "Start: open all five boxes!");
  button.addEventListener("click", onBegin);
  panel.appendChild(button);
  root.appendChild(panel);
}

export function renderGeneralizationTrial(
  root: HTMLElement,
  trial: GeneralizationTrialInfo,
  chosen: string | null,
  onChoose: (keyId: string) => void,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const panel = el(doc, "div", "generalization");
  panel.appendChild(
    el(
      doc,
      "h3",
      "",
      `New box: ${trial.box.color}, ${trial.box.number} ${trial.box.shape} shapes. Which key opens it?`,
    ),
  );
  const row = el(doc, "div", "candidates");
  for (const key of trial.candidates) {
    const isChosen = chosen === key.id;
    const node = el(doc, "button", isChosen ? "key chosen" : "key", keyLabel(key));
    node.dataset.keyId = key.id;
    if (chosen === null) {
      node.addEventListener("click", () => onChoose(key.id));
    } else {
      node.setAttribute("disabled", "disabled");
    }
    row.appendChild(node);
  }
  panel.appendChild(row);
  root.appendChild(panel);
}
