/**
 * Memo pane: bookmarked groups and users (the analysis outcome), with remove
 * controls and a JSON export download.
 */

import type { MemoResponse } from "../api.js";
import { descriptorText } from "./groupviz.js";

export class MemoPane {
  constructor(
    private root: HTMLElement,
    private onRemove: (ref: string) => void,
  ) {}

  render(memo: MemoResponse): void {
    this.root.textContent = "";
    if (memo.groups.length === 0 && memo.users.length === 0) {
      const empty = document.createElement("div");
      empty.className = "pane-empty";
      empty.textContent = "Bookmark groups or users to collect them here.";
      this.root.appendChild(empty);
      return;
    }
    const list = document.createElement("ul");
    list.className = "memo-list";
    for (const group of memo.groups) {
      list.appendChild(this.entry(`g:${group.gid}`, `${descriptorText(group)} (${group.support})`));
    }
    for (const user of memo.users) {
      list.appendChild(this.entry(`u:${user}`, user));
    }
    this.root.appendChild(list);

    const download = document.createElement("button");
    download.className = "memo-export";
    download.textContent = "export memo";
    download.addEventListener("click", () => {
      const blob = new Blob([JSON.stringify(memo, null, 2)], { type: "application/json" });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = "memo.json";
      link.click();
      URL.revokeObjectURL(link.href);
    });
    this.root.appendChild(download);
  }

  private entry(ref: string, text: string): HTMLElement {
    const item = document.createElement("li");
    item.dataset.ref = ref;
    const label = document.createElement("span");
    label.textContent = text;
    item.appendChild(label);
    const remove = document.createElement("button");
    remove.className = "memo-remove";
    remove.textContent = "×";
    remove.addEventListener("click", () => this.onRemove(ref));
    item.appendChild(remove);
    return item;
  }
}
