/** Boot: find a served dataset, start a session, wire the five panes. */

import { ApiClient } from "./api.js";
import { AppController, type PaneRoots } from "./state.js";

function pane(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing pane element #${id}`);
  return el;
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const roots: PaneRoots = {
    groupviz: pane("groupviz"),
    context: pane("context"),
    stats: pane("stats"),
    history: pane("history"),
    memo: pane("memo"),
  };
  const controller = new AppController(api, roots);

  const datasets = await api.listDatasets();
  const ready = datasets.find((d) => d.indexed && (d.groups ?? 0) > 0);
  if (!ready) {
    roots.groupviz.textContent = "No mined+indexed dataset is being served.";
    return;
  }
  await controller.start(ready.id);
}

boot().catch((err) => {
  const el = document.getElementById("groupviz");
  if (el) el.textContent = `failed to start: ${err}`;
  console.error(err);
});
