/**
 * Typed client for the exploration service. The UI never derives numbers on
 * its own: everything rendered comes back from these calls.
 */

export interface GroupCard {
  gid: number;
  descriptor: string[];
  support: number;
}

export interface SelectionResponse {
  dataset_digest: string;
  session: string;
  focus: number | string;
  groups: GroupCard[];
  diversity: number;
  coverage: number;
  objective: number;
  elapsed_ms: number;
  budget_exhausted: boolean;
}

export interface DatasetInfo {
  id: string;
  digest: string;
  users: number;
  tokens: number;
  actions: number;
  groups: number | null;
  indexed: boolean;
}

export interface SessionState {
  dataset_digest: string;
  session: string;
  dataset: string;
  params: Record<string, unknown>;
  current: SelectionResponse | null;
  history_length: number;
  memo_size: number;
  feedback_size: number;
}

export interface ContextEntry {
  entity: string;
  label: string;
  score: number;
}

export interface ContextResponse {
  dataset_digest: string;
  session: string;
  entries: ContextEntry[];
}

export interface HistoryStep {
  index: number;
  focus: number | string;
  shown: number[];
  chosen: number | null;
  diversity: number;
  coverage: number;
  elapsed_ms: number;
  budget_exhausted: boolean;
}

export interface HistoryResponse {
  dataset_digest: string;
  session: string;
  steps: HistoryStep[];
}

export interface MemoResponse {
  dataset_digest: string;
  session: string;
  groups: GroupCard[];
  users: string[];
}

export interface Histogram {
  dimension: string;
  kind: "categorical" | "numeric";
  bins: Array<string | [number, number]>;
  counts: number[];
  missing: number;
}

export interface StatsResponse {
  dataset_digest: string;
  gid: number;
  filters: Record<string, unknown>;
  histograms: Histogram[];
  summary: Record<string, unknown>;
}

export interface MemberRow {
  user_id: string;
  demographics: Record<string, string | number>;
  action_count: number;
  mean_value: number | null;
}

export interface MembersResponse {
  dataset_digest: string;
  gid: number;
  filters: Record<string, unknown>;
  rows: MemberRow[];
}

export interface ProjectionPoint {
  user_id: string;
  x: number;
  y: number;
  label: string;
}

export interface ProjectionResponse {
  dataset_digest: string;
  gid: number;
  label_dimension: string;
  excluded: number;
  points: ProjectionPoint[];
}

/** One predicate per dimension: value set or closed interval. */
export type FilterPredicate = { values: string[] } | { lo: number; hi: number };
export type FilterState = Record<string, FilterPredicate>;

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const text = await response.text();
  if (!response.ok) {
    let code = "http_error";
    let message = `${response.status} on ${url}`;
    try {
      const body = JSON.parse(text);
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(code, message);
  }
  return JSON.parse(text) as T;
}

function post<T>(url: string, body?: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
}

export class ApiClient {
  constructor(private base: string = "") {}

  listDatasets(): Promise<DatasetInfo[]> {
    return request(`${this.base}/datasets`);
  }

  createSession(dataset: string, params?: Record<string, unknown>): Promise<SessionState> {
    return post(`${this.base}/sessions`, { dataset, params });
  }

  sessionState(sid: string): Promise<SessionState> {
    return request(`${this.base}/sessions/${sid}`);
  }

  root(sid: string): Promise<SelectionResponse> {
    return post(`${this.base}/sessions/${sid}/root`);
  }

  select(sid: string, gid: number): Promise<SelectionResponse> {
    return post(`${this.base}/sessions/${sid}/select`, { gid });
  }

  backtrack(sid: string, step: number): Promise<SelectionResponse> {
    return post(`${this.base}/sessions/${sid}/backtrack`, { step });
  }

  context(sid: string): Promise<ContextResponse> {
    return request(`${this.base}/sessions/${sid}/context`);
  }

  unlearn(sid: string, entity: string): Promise<unknown> {
    return request(`${this.base}/sessions/${sid}/context/${encodeURIComponent(entity)}`, {
      method: "DELETE",
    });
  }

  history(sid: string): Promise<HistoryResponse> {
    return request(`${this.base}/sessions/${sid}/history`);
  }

  memo(sid: string): Promise<MemoResponse> {
    return request(`${this.base}/sessions/${sid}/memo`);
  }

  memoAdd(sid: string, id: string): Promise<MemoResponse> {
    return post(`${this.base}/sessions/${sid}/memo`, { id });
  }

  memoRemove(sid: string, id: string): Promise<MemoResponse> {
    return request(`${this.base}/sessions/${sid}/memo/${encodeURIComponent(id)}`, {
      method: "DELETE",
    });
  }

  stats(dataset: string, gid: number, filters: FilterState): Promise<StatsResponse> {
    return request(`${this.base}/datasets/${dataset}/groups/${gid}/stats${filterQuery(filters)}`);
  }

  members(dataset: string, gid: number, filters: FilterState): Promise<MembersResponse> {
    return request(`${this.base}/datasets/${dataset}/groups/${gid}/members${filterQuery(filters)}`);
  }

  projection(dataset: string, gid: number, label?: string): Promise<ProjectionResponse> {
    const q = label ? `?label=${encodeURIComponent(label)}` : "";
    return request(`${this.base}/datasets/${dataset}/groups/${gid}/projection${q}`);
  }

  exportSession(sid: string): Promise<string> {
    return fetch(`${this.base}/sessions/${sid}/export`).then((r) => r.text());
  }
}

export function filterQuery(filters: FilterState): string {
  if (Object.keys(filters).length === 0) return "";
  return `?filters=${encodeURIComponent(JSON.stringify(filters))}`;
}
