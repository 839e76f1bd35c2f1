/**
 * Stats pane: linked-brushing histograms over every dimension, the filtered
 * member table, and the 2D member projection. Brushing a bin toggles that
 * dimension's predicate and asks the pane controller to refetch; every count
 * shown comes straight from the server response.
 */

import type {
  FilterState,
  Histogram,
  MembersResponse,
  ProjectionResponse,
  StatsResponse,
} from "../api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface StatsCallbacks {
  onFiltersChanged(filters: FilterState): void;
  onLabelChanged(label: string): void;
}

export class StatsPane {
  filters: FilterState = {};

  constructor(
    private root: HTMLElement,
    private callbacks: StatsCallbacks,
  ) {}

  clearFilters(): void {
    this.filters = {};
  }

  render(
    stats: StatsResponse | null,
    members: MembersResponse | null,
    projection: ProjectionResponse | null,
    labelChoices: string[] = [],
    activeLabel: string | null = null,
  ): void {
    this.root.textContent = "";
    if (!stats) {
      const empty = document.createElement("div");
      empty.className = "pane-empty";
      empty.textContent = "Select a group to inspect its members.";
      this.root.appendChild(empty);
      return;
    }

    const histWrap = document.createElement("div");
    histWrap.className = "histograms";
    for (const histogram of stats.histograms) {
      histWrap.appendChild(this.renderHistogram(histogram));
    }
    this.root.appendChild(histWrap);

    if (Object.keys(this.filters).length > 0) {
      const clear = document.createElement("button");
      clear.className = "clear-brushes";
      clear.textContent = "clear brushes";
      clear.addEventListener("click", () => {
        this.filters = {};
        this.callbacks.onFiltersChanged(this.filters);
      });
      this.root.appendChild(clear);
    }

    if (labelChoices.length > 0) {
      const picker = document.createElement("select");
      picker.className = "label-picker";
      for (const choice of labelChoices) {
        const opt = document.createElement("option");
        opt.value = choice;
        opt.textContent = `project by ${choice}`;
        if (choice === activeLabel) opt.selected = true;
        picker.appendChild(opt);
      }
      picker.addEventListener("change", () => this.callbacks.onLabelChanged(picker.value));
      this.root.appendChild(picker);
    }

    if (projection) {
      this.root.appendChild(this.renderProjection(projection));
    }
    if (members) {
      this.root.appendChild(this.renderTable(members));
    }
  }

  private renderHistogram(histogram: Histogram): HTMLElement {
    const box = document.createElement("div");
    box.className = "histogram";
    box.dataset.dimension = histogram.dimension;
    const title = document.createElement("h4");
    title.textContent = histogram.dimension;
    box.appendChild(title);

    const maxCount = Math.max(1, ...histogram.counts);
    const bars = document.createElement("div");
    bars.className = "bars";
    histogram.bins.forEach((bin, i) => {
      const bar = document.createElement("div");
      bar.className = "bar";
      const count = histogram.counts[i] ?? 0;
      bar.dataset.count = String(count);
      bar.style.height = `${(100 * count) / maxCount}%`;
      const binLabel = typeof bin === "string" ? bin : `[${bin[0].toFixed(1)}, ${bin[1].toFixed(1)}]`;
      bar.title = `${binLabel}: ${count}`;
      if (this.binBrushed(histogram, bin)) bar.classList.add("brushed");
      bar.addEventListener("click", () => {
        this.toggleBrush(histogram, bin);
        this.callbacks.onFiltersChanged(this.filters);
      });
      bars.appendChild(bar);
    });
    box.appendChild(bars);
    return box;
  }

  private binBrushed(histogram: Histogram, bin: string | [number, number]): boolean {
    const pred = this.filters[histogram.dimension];
    if (!pred) return false;
    if (typeof bin === "string") {
      return "values" in pred && pred.values.includes(bin);
    }
    return "lo" in pred && pred.lo === bin[0] && pred.hi === bin[1];
  }

  private toggleBrush(histogram: Histogram, bin: string | [number, number]): void {
    const dim = histogram.dimension;
    const pred = this.filters[dim];
    if (typeof bin === "string") {
      const values = pred && "values" in pred ? [...pred.values] : [];
      const at = values.indexOf(bin);
      if (at >= 0) values.splice(at, 1);
      else values.push(bin);
      if (values.length === 0) delete this.filters[dim];
      else this.filters[dim] = { values };
    } else if (pred && "lo" in pred && pred.lo === bin[0] && pred.hi === bin[1]) {
      delete this.filters[dim];
    } else {
      this.filters[dim] = { lo: bin[0], hi: bin[1] };
    }
  }

  private renderProjection(projection: ProjectionResponse): HTMLElement {
    const box = document.createElement("div");
    box.className = "projection";
    const svg = document.createElementNS(SVG_NS, "svg");
    const width = 280;
    const height = 220;
    svg.setAttribute("viewBox", `0 0 ${width} ${height}`);

    const xs = projection.points.map((p) => p.x);
    const ys = projection.points.map((p) => p.y);
    const xLo = Math.min(...xs);
    const xHi = Math.max(...xs);
    const yLo = Math.min(...ys);
    const yHi = Math.max(...ys);
    const labels = [...new Set(projection.points.map((p) => p.label))].sort();
    const palette = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948"];
    const sx = (x: number) => 8 + ((width - 16) * (x - xLo)) / (xHi - xLo || 1);
    const sy = (y: number) => height - 8 - ((height - 16) * (y - yLo)) / (yHi - yLo || 1);

    for (const point of projection.points) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(sx(point.x)));
      dot.setAttribute("cy", String(sy(point.y)));
      dot.setAttribute("r", "3");
      dot.setAttribute("fill", palette[labels.indexOf(point.label) % palette.length]);
      dot.classList.add("projection-point");
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `${point.user_id} (${point.label})`;
      dot.appendChild(title);
      svg.appendChild(dot);
    }
    box.appendChild(svg);
    return box;
  }

  private renderTable(members: MembersResponse): HTMLElement {
    const table = document.createElement("table");
    table.className = "member-table";
    const header = document.createElement("tr");
    const dims = members.rows.length > 0 ? Object.keys(members.rows[0].demographics) : [];
    for (const name of ["user", ...dims, "actions", "mean value"]) {
      const th = document.createElement("th");
      th.textContent = name;
      header.appendChild(th);
    }
    table.appendChild(header);
    for (const row of members.rows) {
      const tr = document.createElement("tr");
      const cells: Array<string | number | null> = [
        row.user_id,
        ...dims.map((d) => row.demographics[d] ?? ""),
        row.action_count,
        row.mean_value === null ? "" : row.mean_value.toFixed(2),
      ];
      for (const value of cells) {
        const td = document.createElement("td");
        td.textContent = value === null ? "" : String(value);
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
    return table;
  }
}
