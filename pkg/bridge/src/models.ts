/**
 * Reference completion models. A model maps an n x 3 point list to a
 * completed point list; anything it throws becomes a per-request error reply.
 */

import * as path from "path";

export type Points = number[][];
export type Model = (points: Points) => Points;

export const echo: Model = (points) => points;

// ---------------------------------------------------------------------------
// mirror: reflect through the best-fitting symmetry plane
// ---------------------------------------------------------------------------

type Mat3 = [number[], number[], number[]];

function centroid(pts: Points): number[] {
  const c = [0, 0, 0];
  for (const p of pts) {
    c[0] += p[0];
    c[1] += p[1];
    c[2] += p[2];
  }
  return c.map((x) => x / pts.length);
}

function covariance(pts: Points, center: number[]): Mat3 {
  const m: Mat3 = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (const p of pts) {
    const q = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    for (let i = 0; i < 3; i++) {
      for (let j = 0; j < 3; j++) {
        m[i][j] += q[i] * q[j];
      }
    }
  }
  const n = Math.max(1, pts.length);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      m[i][j] /= n;
    }
  }
  return m;
}

/** Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix. */
function jacobiEigh(m: Mat3): { values: number[]; vectors: number[][] } {
  const a: Mat3 = [m[0].slice(), m[1].slice(), m[2].slice()] as Mat3;
  const v: Mat3 = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
  ];
  const pairs: Array<[number, number]> = [
    [0, 1],
    [0, 2],
    [1, 2],
  ];
  for (let sweep = 0; sweep < 64; sweep++) {
    let off = 0;
    for (const [p, q] of pairs) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (const [p, q] of pairs) {
      if (Math.abs(a[p][q]) < 1e-300) continue;
      const tau = (a[q][q] - a[p][p]) / (2 * a[p][q]);
      const t = Math.sign(tau || 1) / (Math.abs(tau) + Math.sqrt(1 + tau * tau));
      const c = 1 / Math.sqrt(1 + t * t);
      const s = t * c;
      for (let k = 0; k < 3; k++) {
        const akp = a[k][p];
        const akq = a[k][q];
        a[k][p] = c * akp - s * akq;
        a[k][q] = s * akp + c * akq;
      }
      for (let k = 0; k < 3; k++) {
        const apk = a[p][k];
        const aqk = a[q][k];
        a[p][k] = c * apk - s * aqk;
        a[q][k] = s * apk + c * aqk;
        const vkp = v[k][p];
        const vkq = v[k][q];
        v[k][p] = c * vkp - s * vkq;
        v[k][q] = s * vkp + c * vkq;
      }
    }
  }
  // columns of v are the eigenvectors; return them as rows sorted by
  // descending eigenvalue so axis 0 is the highest-variance direction
  const order = [0, 1, 2].sort((i, j) => a[j][j] - a[i][i]);
  return {
    values: order.map((i) => a[i][i]),
    vectors: order.map((i) => [v[0][i], v[1][i], v[2][i]]),
  };
}

function meanNearestDistance(from: Points, to: Points): number {
  let total = 0;
  for (const p of from) {
    let best = Infinity;
    for (const q of to) {
      const dx = p[0] - q[0];
      const dy = p[1] - q[1];
      const dz = p[2] - q[2];
      const d = dx * dx + dy * dy + dz * dz;
      if (d < best) best = d;
    }
    total += Math.sqrt(best);
  }
  return total / from.length;
}

/**
 * Reflect the cloud through each principal plane, keep the reflection that
 * lands closest back onto the input, and return input + reflection.
 */
export const mirror: Model = (points) => {
  const center = centroid(points);
  const { vectors } = jacobiEigh(covariance(points, center));
  let best: { score: number; reflected: Points } | null = null;
  for (const normal of vectors) {
    const reflected = points.map((p) => {
      const qn =
        (p[0] - center[0]) * normal[0] +
        (p[1] - center[1]) * normal[1] +
        (p[2] - center[2]) * normal[2];
      return [p[0] - 2 * qn * normal[0], p[1] - 2 * qn * normal[1], p[2] - 2 * qn * normal[2]];
    });
    const score = meanNearestDistance(reflected, points);
    if (best === null || score < best.score) best = { score, reflected };
  }
  return points.concat(best!.reflected);
};

// ---------------------------------------------------------------------------
// plugin: user-supplied CommonJS module exporting complete(points) -> points
// ---------------------------------------------------------------------------

export function loadPlugin(modulePath: string): Model {
  // eslint-disable-next-line @typescript-eslint/no-var-requires
  const mod = require(path.resolve(modulePath));
  const complete = mod.complete ?? mod.default?.complete;
  if (typeof complete !== "function") {
    throw new Error(`plugin ${modulePath} does not export complete(points)`);
  }
  return (points) => complete(points);
}

export function makeModel(spec: string): Model {
  if (spec === "echo") return echo;
  if (spec === "mirror") return mirror;
  if (spec.startsWith("plugin:")) return loadPlugin(spec.slice("plugin:".length));
  throw new Error(`unknown model ${JSON.stringify(spec)}; use echo|mirror|plugin:PATH`);
}
