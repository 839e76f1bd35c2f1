/**
 * Context pane: the session's learned feedback entries with scores, each with
 * a delete control that unlearns the entity on the server.
 */

import type { ContextResponse } from "../api.js";

export class ContextPane {
  constructor(
    private root: HTMLElement,
    private onUnlearn: (entity: string) => void,
  ) {}

  render(context: ContextResponse): void {
    this.root.textContent = "";
    if (context.entries.length === 0) {
      const empty = document.createElement("div");
      empty.className = "pane-empty";
      empty.textContent = "No feedback learned yet.";
      this.root.appendChild(empty);
      return;
    }
    const list = document.createElement("ul");
    list.className = "context-list";
    for (const entry of context.entries) {
      const item = document.createElement("li");
      item.dataset.entity = entry.entity;

      const label = document.createElement("span");
      label.className = "context-label";
      label.textContent = entry.label;
      item.appendChild(label);

      const score = document.createElement("span");
      score.className = "context-score";
      score.textContent = entry.score.toFixed(4);
      item.appendChild(score);

      const remove = document.createElement("button");
      remove.className = "unlearn";
      remove.textContent = "×";
      remove.title = `forget ${entry.label}`;
      remove.addEventListener("click", () => this.onUnlearn(entry.entity));
      item.appendChild(remove);

      list.appendChild(item);
    }
    this.root.appendChild(list);
  }
}
