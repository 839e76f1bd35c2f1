/**
 * Group visualization pane: one circle per shown group (never more than 7),
 * radius monotone in member count, tinted by the chosen color attribute when
 * the group's descriptor pins a value for it. Hover shows the descriptor;
 * clicking a circle selects that group.
 */

import type { GroupCard, SelectionResponse } from "../api.js";
import { layoutCircles } from "../force.js";

const SVG_NS = "http://www.w3.org/2000/svg";
export const MAX_CIRCLES = 7;

const PALETTE = [
  "#4e79a7",
  "#f28e2b",
  "#e15759",
  "#76b7b2",
  "#59a14f",
  "#edc948",
  "#b07aa1",
  "#ff9da7",
];
const NEUTRAL = "#9aa5b1";

export function descriptorText(group: GroupCard): string {
  return group.descriptor.join(" & ");
}

/** Value the descriptor pins for a demographic attribute, if any. */
export function pinnedValue(group: GroupCard, attribute: string): string | null {
  const prefix = `d:${attribute}=`;
  for (const token of group.descriptor) {
    if (token.startsWith(prefix)) return token.slice(prefix.length);
  }
  return null;
}

export class GroupVizPane {
  private legendValues: string[] = [];

  constructor(
    private root: HTMLElement,
    private onSelect: (gid: number) => void,
    private onBookmark?: (gid: number) => void,
  ) {}

  render(selection: SelectionResponse, colorAttribute: string | null): void {
    this.root.textContent = "";
    if (selection.groups.length === 0) {
      const notice = document.createElement("div");
      notice.className = "dead-end";
      notice.textContent = "No neighboring groups from here. Backtrack to continue.";
      this.root.appendChild(notice);
      return;
    }

    const groups = selection.groups.slice(0, MAX_CIRCLES);
    const width = 520;
    const height = 360;
    const supports = groups.map((g) => g.support);
    const maxSupport = Math.max(...supports);
    const radii = supports.map((s) => 14 + 38 * Math.sqrt(s / maxSupport));
    const nodes = layoutCircles(radii, width, height);

    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    svg.setAttribute("class", "groupviz-canvas");

    this.legendValues = [];
    groups.forEach((group, i) => {
      const circle = document.createElementNS(SVG_NS, "circle");
      circle.setAttribute("cx", String(nodes[i].x));
      circle.setAttribute("cy", String(nodes[i].y));
      circle.setAttribute("r", String(radii[i]));
      circle.setAttribute("fill", this.fillFor(group, colorAttribute));
      circle.setAttribute("data-gid", String(group.gid));
      circle.setAttribute("data-support", String(group.support));
      circle.classList.add("group-circle");

      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `${descriptorText(group)} — ${group.support} users`;
      circle.appendChild(title);

      circle.addEventListener("click", () => this.onSelect(group.gid));
      if (this.onBookmark) {
        circle.addEventListener("contextmenu", (ev) => {
          ev.preventDefault();
          this.onBookmark?.(group.gid);
        });
      }
      svg.appendChild(circle);

      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(nodes[i].x));
      label.setAttribute("y", String(nodes[i].y + 4));
      label.setAttribute("text-anchor", "middle");
      label.setAttribute("class", "circle-label");
      label.textContent = String(group.support);
      svg.appendChild(label);
    });
    this.root.appendChild(svg);

    const meta = document.createElement("div");
    meta.className = "selection-meta";
    meta.textContent =
      `diversity ${selection.diversity.toFixed(3)} · coverage ${selection.coverage.toFixed(3)}` +
      ` · ${selection.elapsed_ms.toFixed(1)} ms` +
      (selection.budget_exhausted ? " · budget hit" : "");
    this.root.appendChild(meta);

    if (this.legendValues.length > 0 && colorAttribute) {
      const legend = document.createElement("div");
      legend.className = "legend";
      this.legendValues.forEach((value, i) => {
        const item = document.createElement("span");
        item.className = "legend-item";
        const swatch = document.createElement("span");
        swatch.className = "swatch";
        swatch.style.background = PALETTE[i % PALETTE.length];
        item.appendChild(swatch);
        item.appendChild(document.createTextNode(`${colorAttribute}=${value}`));
        legend.appendChild(item);
      });
      this.root.appendChild(legend);
    }
  }

  private fillFor(group: GroupCard, colorAttribute: string | null): string {
    if (!colorAttribute) return NEUTRAL;
    const value = pinnedValue(group, colorAttribute);
    if (value === null) return NEUTRAL;
    let idx = this.legendValues.indexOf(value);
    if (idx === -1) {
      this.legendValues.push(value);
      idx = this.legendValues.length - 1;
    }
    return PALETTE[idx % PALETTE.length];
  }
}
