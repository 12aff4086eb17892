/**
 * Scene rendering: buildings as solids, scatterers as spheres, paths as
 * color-coded polylines.
 *
 * Color convention: green for first-order paths, yellow for second
 * order, orange for third order, cyan for the direct line of sight, and
 * red marker spheres on every scatterer participating in a current path
 * of the selected link.
 */

import * as THREE from "three";

import { Mpc, SceneData } from "./containers.js";
import { DisplayPath } from "./paths.js";
import { OverlayToggles } from "./viewstate.js";

export const PATH_COLORS: Record<number, number> = {
  0: 0x00c8ff, // line of sight: cyan, drawn distinctly
  1: 0x00cc33, // first order: green
  2: 0xffcc00, // second order: yellow
  3: 0xff8800, // third order: orange
};
export const ACTIVE_MPC_COLOR = 0xee1111; // red balls on active scatterers
export const IDLE_MPC_COLOR = 0x8888aa;
export const BUILDING_COLOR = 0xb0b4ba;

export function pathColor(bounces: number): number {
  return PATH_COLORS[bounces] ?? PATH_COLORS[3];
}

export function buildingsMesh(scene: SceneData): THREE.Mesh {
  const positions = new Float32Array(scene.triangles.length * 9);
  scene.triangles.forEach((tri, i) => {
    positions.set([...tri.v0, ...tri.v1, ...tri.v2], i * 9);
  });
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
  geometry.computeVertexNormals();
  const material = new THREE.MeshLambertMaterial({ color: BUILDING_COLOR });
  const mesh = new THREE.Mesh(geometry, material);
  mesh.name = "buildings";
  return mesh;
}

export function mpcMarkers(mpcs: Mpc[], radius: number, activeIds: Set<number>): THREE.Group {
  const group = new THREE.Group();
  group.name = "mpc-markers";
  const idle = new THREE.MeshBasicMaterial({ color: IDLE_MPC_COLOR });
  const active = new THREE.MeshBasicMaterial({ color: ACTIVE_MPC_COLOR });
  const sphere = new THREE.SphereGeometry(radius, 8, 6);
  for (const mpc of mpcs) {
    const mesh = new THREE.Mesh(sphere, activeIds.has(mpc.id) ? active : idle);
    mesh.position.set(...mpc.position);
    mesh.name = activeIds.has(mpc.id) ? `mpc-${mpc.id}-active` : `mpc-${mpc.id}`;
    group.add(mesh);
  }
  return group;
}

export function pathLines(paths: DisplayPath[], overlays: OverlayToggles): THREE.Group {
  const group = new THREE.Group();
  group.name = "paths";
  const enabled: Record<number, boolean> = {
    0: overlays.los, 1: overlays.order1, 2: overlays.order2, 3: overlays.order3,
  };
  for (const path of paths) {
    const order = path.hops.length;
    if (!enabled[order]) continue;
    const points = path.nodes.map((p) => new THREE.Vector3(...p));
    const geometry = new THREE.BufferGeometry().setFromPoints(points);
    const material = new THREE.LineBasicMaterial({ color: pathColor(order) });
    const line = new THREE.Line(geometry, material);
    line.name = `path-${order}-${path.hops.join(".") || "los"}`;
    group.add(line);
  }
  return group;
}

export interface SnapshotInput {
  scene: SceneData;
  mpcs: Mpc[];
  mpcRadius: number;
  paths: DisplayPath[];
  overlays: OverlayToggles;
}

/** Full render tree for one immutable snapshot. */
export function buildSceneGraph(input: SnapshotInput): THREE.Group {
  const root = new THREE.Group();
  root.name = "lusim";
  root.add(buildingsMesh(input.scene));
  const activeIds = new Set<number>();
  for (const path of input.paths) for (const hop of path.hops) activeIds.add(hop);
  if (input.overlays.mpcMarkers) {
    root.add(mpcMarkers(input.mpcs, input.mpcRadius, activeIds));
  }
  root.add(pathLines(input.paths, input.overlays));
  return root;
}
