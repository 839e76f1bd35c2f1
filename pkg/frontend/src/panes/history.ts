/**
 * History pane: the click sequence so far; clicking an earlier step
 * backtracks the session to it.
 */

import type { HistoryResponse } from "../api.js";

export class HistoryPane {
  constructor(
    private root: HTMLElement,
    private onBacktrack: (step: number) => void,
    private describe: (gid: number) => string,
  ) {}

  render(history: HistoryResponse): void {
    this.root.textContent = "";
    if (history.steps.length === 0) {
      const empty = document.createElement("div");
      empty.className = "pane-empty";
      empty.textContent = "No selections yet.";
      this.root.appendChild(empty);
      return;
    }
    const list = document.createElement("ol");
    list.className = "history-list";
    for (const step of history.steps) {
      const item = document.createElement("li");
      item.dataset.step = String(step.index);
      const from = step.focus === "root" ? "start" : this.describe(step.focus as number);
      const to = step.chosen === null ? "…" : this.describe(step.chosen);
      item.textContent = `${from} → ${to}`;
      item.title = `diversity ${step.diversity.toFixed(3)}, coverage ${step.coverage.toFixed(3)}`;
      item.addEventListener("click", () => this.onBacktrack(step.index));
      list.appendChild(item);
    }
    this.root.appendChild(list);
  }
}
