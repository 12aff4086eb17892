/**
 * Client-side path geometry for display.
 *
 * The wire protocol carries positions and channel tensors but no hop
 * geometry, so the console reproduces the engine's path-search rules at
 * display fidelity from the published inputs: scene triangles, the spawn
 * container and the current entity positions. Paths are LOS plus 1..3
 * scatterer bounces, each hop mutually visible and the total length
 * within the configured maximum.
 */

import { Mpc, SceneData, Vec3 } from "./containers.js";

const EPS = 1e-6;

function sub(a: Vec3, b: Vec3): Vec3 { return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]; }
function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}
function dot(a: Vec3, b: Vec3): number { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
export function dist(a: Vec3, b: Vec3): number {
  const d = sub(a, b);
  return Math.sqrt(dot(d, d));
}

/** Scene wrapper with a nearest-hit/occlusion test over all triangles. */
export class Occluder {
  private readonly tris: { v0: Vec3; e1: Vec3; e2: Vec3 }[];

  constructor(scene: SceneData) {
    this.tris = scene.triangles.map((t) => ({
      v0: t.v0, e1: sub(t.v1, t.v0), e2: sub(t.v2, t.v0),
    }));
  }

  /** true when nothing blocks the open segment p -> q */
  segmentVisible(p: Vec3, q: Vec3): boolean {
    const delta = sub(q, p);
    const length = Math.sqrt(dot(delta, delta));
    if (length === 0) return false;
    const dir: Vec3 = [delta[0] / length, delta[1] / length, delta[2] / length];
    const limit = length - EPS;
    for (const { v0, e1, e2 } of this.tris) {
      const pvec = cross(dir, e2);
      const det = dot(e1, pvec);
      if (Math.abs(det) < 1e-14) continue;
      const inv = 1.0 / det;
      const tvec = sub(p, v0);
      const u = dot(tvec, pvec) * inv;
      if (u < 0 || u > 1) continue;
      const qvec = cross(tvec, e1);
      const v = dot(dir, qvec) * inv;
      if (v < 0 || u + v > 1) continue;
      const t = dot(e2, qvec) * inv;
      if (t > EPS && t < limit) return false;
    }
    return true;
  }
}

export interface DisplayPath {
  /** MPC ids along the path; empty for line of sight */
  hops: number[];
  totalLength: number;
  /** node positions tx, hops..., rx for the polyline */
  nodes: Vec3[];
}

export class PathSolver {
  private occluder: Occluder;
  private mpcs: Mpc[];
  private linkDist: Map<number, Map<number, number>> = new Map();
  private lutMaxLength = 0;

  constructor(scene: SceneData, mpcs: Mpc[]) {
    this.occluder = new Occluder(scene);
    this.mpcs = mpcs;
  }

  /** MPC-to-MPC visibility table, built once per max length. */
  private ensureLut(maxLength: number) {
    if (this.lutMaxLength >= maxLength && this.linkDist.size) return;
    this.linkDist = new Map();
    this.lutMaxLength = maxLength;
    for (let i = 0; i < this.mpcs.length; i++) {
      for (let j = i + 1; j < this.mpcs.length; j++) {
        const d = dist(this.mpcs[i].position, this.mpcs[j].position);
        if (d > maxLength) continue;
        if (!this.occluder.segmentVisible(this.mpcs[i].position, this.mpcs[j].position)) continue;
        if (!this.linkDist.has(i)) this.linkDist.set(i, new Map());
        if (!this.linkDist.has(j)) this.linkDist.set(j, new Map());
        this.linkDist.get(i)!.set(j, d);
        this.linkDist.get(j)!.set(i, d);
      }
    }
  }

  solve(tx: Vec3, rx: Vec3, maxPathLength: number, maxBounceOrder: number): DisplayPath[] {
    const paths: DisplayPath[] = [];
    const dLos = dist(tx, rx);
    if (dLos > 0 && dLos <= maxPathLength && this.occluder.segmentVisible(tx, rx)) {
      paths.push({ hops: [], totalLength: dLos, nodes: [tx, rx] });
    }
    if (maxBounceOrder < 1 || this.mpcs.length === 0) return paths;

    const dTx: number[] = [];
    const dRx: number[] = [];
    const visTx: boolean[] = [];
    const visRx: boolean[] = [];
    for (const m of this.mpcs) {
      const dt = dist(tx, m.position);
      const dr = dist(rx, m.position);
      dTx.push(dt);
      dRx.push(dr);
      visTx.push(dt > 0 && dt <= maxPathLength && this.occluder.segmentVisible(tx, m.position));
      visRx.push(dr > 0 && dr <= maxPathLength && this.occluder.segmentVisible(rx, m.position));
    }

    for (let i = 0; i < this.mpcs.length; i++) {
      if (visTx[i] && visRx[i] && dTx[i] + dRx[i] <= maxPathLength) {
        paths.push({
          hops: [i], totalLength: dTx[i] + dRx[i],
          nodes: [tx, this.mpcs[i].position, rx],
        });
      }
    }
    if (maxBounceOrder < 2) return sorted(paths);

    this.ensureLut(maxPathLength);
    for (const [i, nbrs] of this.linkDist) {
      if (!visTx[i]) continue;
      for (const [j, dij] of nbrs) {
        const total2 = dTx[i] + dij + dRx[j];
        if (visRx[j] && total2 <= maxPathLength) {
          paths.push({
            hops: [i, j], totalLength: total2,
            nodes: [tx, this.mpcs[i].position, this.mpcs[j].position, rx],
          });
        }
        if (maxBounceOrder < 3) continue;
        const onward = this.linkDist.get(j);
        if (!onward) continue;
        for (const [k, djk] of onward) {
          if (k === j) continue;
          const total3 = dTx[i] + dij + djk + dRx[k];
          if (visRx[k] && total3 <= maxPathLength) {
            paths.push({
              hops: [i, j, k], totalLength: total3,
              nodes: [tx, this.mpcs[i].position, this.mpcs[j].position, this.mpcs[k].position, rx],
            });
          }
        }
      }
    }
    return sorted(paths);
  }
}

function sorted(paths: DisplayPath[]): DisplayPath[] {
  return paths.sort((a, b) => {
    if (a.hops.length !== b.hops.length) return a.hops.length - b.hops.length;
    if (a.totalLength !== b.totalLength) return a.totalLength - b.totalLength;
    for (let k = 0; k < a.hops.length; k++) {
      if (a.hops[k] !== b.hops[k]) return a.hops[k] - b.hops[k];
    }
    return 0;
  });
}
