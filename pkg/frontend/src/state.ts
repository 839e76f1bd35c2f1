/**
 * View-state orchestration. Every pane renders exactly what the server
 * returned; after any mutation the affected state is refetched (or taken
 * verbatim from the mutation response), never derived locally.
 */

import {
  ApiClient,
  type ContextResponse,
  type FilterState,
  type GroupCard,
  type HistoryResponse,
  type MemoResponse,
  type SelectionResponse,
} from "./api.js";
import { ContextPane } from "./panes/context.js";
import { GroupVizPane } from "./panes/groupviz.js";
import { HistoryPane } from "./panes/history.js";
import { MemoPane } from "./panes/memo.js";
import { StatsPane } from "./panes/stats.js";

export interface PaneRoots {
  groupviz: HTMLElement;
  context: HTMLElement;
  stats: HTMLElement;
  history: HTMLElement;
  memo: HTMLElement;
}

export interface ViewState {
  dataset: string;
  session: string;
  selection: SelectionResponse | null;
  context: ContextResponse | null;
  history: HistoryResponse | null;
  memo: MemoResponse | null;
  statsGroup: number | null;
  label: string | null;
}

export class AppController {
  state: ViewState = {
    dataset: "",
    session: "",
    selection: null,
    context: null,
    history: null,
    memo: null,
    statsGroup: null,
    label: null,
  };
  colorAttribute: string | null = null;
  labelChoices: string[] = [];
  readonly groupviz: GroupVizPane;
  readonly contextPane: ContextPane;
  readonly statsPane: StatsPane;
  readonly historyPane: HistoryPane;
  readonly memoPane: MemoPane;
  private descriptors = new Map<number, string>();

  constructor(
    private api: ApiClient,
    roots: PaneRoots,
  ) {
    this.groupviz = new GroupVizPane(
      roots.groupviz,
      (gid) => void this.selectGroup(gid),
      (gid) => void this.memoAdd(`g:${gid}`),
    );
    this.contextPane = new ContextPane(roots.context, (entity) => void this.unlearn(entity));
    this.statsPane = new StatsPane(roots.stats, {
      onFiltersChanged: (filters) => void this.applyFilters(filters),
      onLabelChanged: (label) => void this.changeLabel(label),
    });
    this.historyPane = new HistoryPane(
      roots.history,
      (step) => void this.backtrack(step),
      (gid) => this.describe(gid),
    );
    this.memoPane = new MemoPane(roots.memo, (ref) => void this.memoRemove(ref));
  }

  describe(gid: number): string {
    return this.descriptors.get(gid) ?? `group ${gid}`;
  }

  private remember(groups: GroupCard[]): void {
    for (const g of groups) this.descriptors.set(g.gid, g.descriptor.join(" & "));
  }

  async start(dataset: string, params?: Record<string, unknown>): Promise<void> {
    const session = await this.api.createSession(dataset, params);
    this.state.dataset = dataset;
    this.state.session = session.session;
    const selection = await this.api.root(this.state.session);
    this.applySelection(selection);
    await this.refreshSessionPanes();
  }

  private applySelection(selection: SelectionResponse): void {
    this.state.selection = selection;
    this.remember(selection.groups);
    this.groupviz.render(selection, this.colorAttribute);
  }

  async refreshSessionPanes(): Promise<void> {
    const [context, history, memo] = await Promise.all([
      this.api.context(this.state.session),
      this.api.history(this.state.session),
      this.api.memo(this.state.session),
    ]);
    this.state.context = context;
    this.state.history = history;
    this.state.memo = memo;
    this.contextPane.render(context);
    this.historyPane.render(history);
    this.memoPane.render(memo);
  }

  async selectGroup(gid: number): Promise<void> {
    const selection = await this.api.select(this.state.session, gid);
    this.applySelection(selection);
    await this.refreshSessionPanes();
    await this.openStats(gid);
  }

  async backtrack(step: number): Promise<void> {
    const selection = await this.api.backtrack(this.state.session, step);
    this.applySelection(selection);
    await this.refreshSessionPanes();
  }

  /** Unlearn an entity, then mirror the server again: selection + context. */
  async unlearn(entity: string): Promise<void> {
    await this.api.unlearn(this.state.session, entity);
    const stateDoc = await this.api.sessionState(this.state.session);
    if (stateDoc.current) {
      this.applySelection(stateDoc.current);
    }
    const context = await this.api.context(this.state.session);
    this.state.context = context;
    this.contextPane.render(context);
  }

  async memoAdd(ref: string): Promise<void> {
    const memo = await this.api.memoAdd(this.state.session, ref);
    this.state.memo = memo;
    this.memoPane.render(memo);
  }

  async memoRemove(ref: string): Promise<void> {
    const memo = await this.api.memoRemove(this.state.session, ref);
    this.state.memo = memo;
    this.memoPane.render(memo);
  }

  async openStats(gid: number): Promise<void> {
    this.state.statsGroup = gid;
    this.statsPane.clearFilters();
    await this.fetchStats();
  }

  /** One stats request and one members request per brush interaction. */
  async applyFilters(filters: FilterState): Promise<void> {
    this.statsPane.filters = filters;
    await this.fetchStats();
  }

  async changeLabel(label: string): Promise<void> {
    this.state.label = label;
    await this.fetchStats();
  }

  private async fetchStats(): Promise<void> {
    const gid = this.state.statsGroup;
    if (gid === null) return;
    const filters = this.statsPane.filters;
    const [stats, members] = await Promise.all([
      this.api.stats(this.state.dataset, gid, filters),
      this.api.members(this.state.dataset, gid, filters),
    ]);
    let projection = null;
    try {
      projection = await this.api.projection(this.state.dataset, gid, this.state.label ?? undefined);
      if (this.state.label === null) this.state.label = projection.label_dimension;
    } catch {
      projection = null; // too few classes or labeled members; pane shows the rest
    }
    this.statsPane.render(stats, members, projection, this.labelChoices, this.state.label);
  }
}
