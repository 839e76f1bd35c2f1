/**
 * Minimal force layout for a handful of circles: centering pull plus
 * pairwise collision/repulsion, relaxed for a fixed number of iterations.
 * Deterministic: nodes start evenly spaced on a ring.
 */

export interface ForceNode {
  radius: number;
  x: number;
  y: number;
}

export function layoutCircles(
  radii: number[],
  width: number,
  height: number,
  iterations = 120,
): ForceNode[] {
  const cx = width / 2;
  const cy = height / 2;
  const n = radii.length;
  const ring = Math.min(width, height) / 4;
  const nodes: ForceNode[] = radii.map((radius, i) => ({
    radius,
    x: cx + ring * Math.cos((2 * Math.PI * i) / Math.max(n, 1)),
    y: cy + ring * Math.sin((2 * Math.PI * i) / Math.max(n, 1)),
  }));

  const padding = 6;
  for (let iter = 0; iter < iterations; iter++) {
    for (const node of nodes) {
      node.x += (cx - node.x) * 0.03;
      node.y += (cy - node.y) * 0.03;
    }
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        const a = nodes[i];
        const b = nodes[j];
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let dist = Math.hypot(dx, dy);
        if (dist === 0) {
          dx = 0.5 * (i + 1);
          dy = 0.25;
          dist = Math.hypot(dx, dy);
        }
        const minDist = a.radius + b.radius + padding;
        if (dist < minDist) {
          const push = (minDist - dist) / dist / 2;
          a.x -= dx * push;
          a.y -= dy * push;
          b.x += dx * push;
          b.y += dy * push;
        }
      }
    }
    for (const node of nodes) {
      node.x = Math.min(Math.max(node.x, node.radius), width - node.radius);
      node.y = Math.min(Math.max(node.y, node.radius), height - node.radius);
    }
  }
  return nodes;
}
