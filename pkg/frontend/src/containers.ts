/**
 * Readers for the engine's published file formats: the scene document
 * (JSON: box/mesh solids plus active and traversable areas) and the
 * binary spawn container (magic "LUMP") holding the scatterer set.
 */

export type Vec3 = [number, number, number];

export interface Triangle {
  v0: Vec3;
  v1: Vec3;
  v2: Vec3;
  solidId: number;
}

export interface SceneData {
  triangles: Triangle[];
  activeArea: { min: Vec3; max: Vec3 };
  traversableArea: { min: Vec3; max: Vec3 };
}

const BOX_QUADS: [number, number, number, number][] = [
  [0, 2, 6, 4], [1, 5, 7, 3], [0, 4, 5, 1], [2, 3, 7, 6], [0, 1, 3, 2], [4, 6, 7, 5],
];

function boxCorners(lo: Vec3, hi: Vec3): Vec3[] {
  return [
    [lo[0], lo[1], lo[2]], [hi[0], lo[1], lo[2]], [lo[0], hi[1], lo[2]], [hi[0], hi[1], lo[2]],
    [lo[0], lo[1], hi[2]], [hi[0], lo[1], hi[2]], [lo[0], hi[1], hi[2]], [hi[0], hi[1], hi[2]],
  ];
}

export function parseScene(doc: any): SceneData {
  const triangles: Triangle[] = [];
  const solids = doc.solids ?? [];
  solids.forEach((solid: any, solidId: number) => {
    if (solid.box) {
      const corners = boxCorners(solid.box.min, solid.box.max);
      for (const [a, b, c, d] of BOX_QUADS) {
        triangles.push({ v0: corners[a], v1: corners[b], v2: corners[c], solidId });
        triangles.push({ v0: corners[a], v1: corners[c], v2: corners[d], solidId });
      }
    } else {
      const verts: Vec3[] = solid.vertices;
      for (const [a, b, c] of solid.triangles ?? []) {
        triangles.push({ v0: verts[a], v1: verts[b], v2: verts[c], solidId });
      }
      for (const [a, b, c, d] of solid.quads ?? []) {
        triangles.push({ v0: verts[a], v1: verts[b], v2: verts[c], solidId });
        triangles.push({ v0: verts[a], v1: verts[c], v2: verts[d], solidId });
      }
    }
  });
  for (const mesh of doc.surfaces ?? []) {
    const verts: Vec3[] = mesh.vertices;
    for (const [a, b, c] of mesh.triangles ?? []) {
      triangles.push({ v0: verts[a], v1: verts[b], v2: verts[c], solidId: -1 });
    }
    for (const [a, b, c, d] of mesh.quads ?? []) {
      triangles.push({ v0: verts[a], v1: verts[b], v2: verts[c], solidId: -1 });
      triangles.push({ v0: verts[a], v1: verts[c], v2: verts[d], solidId: -1 });
    }
  }
  return {
    triangles,
    activeArea: { min: doc.active_area.min, max: doc.active_area.max },
    traversableArea: { min: doc.traversable_area.min, max: doc.traversable_area.max },
  };
}

export interface Mpc {
  id: number;
  order: number;
  position: Vec3;
  normal: Vec3;
  g0: number;
  xi: number;
  surfaceIndex: number;
}

export interface SpawnSet {
  sceneHash: bigint;
  spawnSeed: bigint;
  mpcs: Mpc[];
}

const SPAWN_MAGIC = 0x504d554c; // "LUMP" as LE u32
const SPAWN_RECORD = 73;

export function parseSpawn(data: Uint8Array): SpawnSet {
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  if (data.length < 26 || view.getUint32(0, true) !== SPAWN_MAGIC) {
    throw new Error("not a spawn container");
  }
  if (view.getUint16(4, true) !== 1) throw new Error("unsupported spawn container version");
  const sceneHash = view.getBigUint64(6, true);
  const spawnSeed = view.getBigUint64(14, true);
  const count = view.getUint32(22, true);
  if (data.length !== 26 + count * SPAWN_RECORD) throw new Error("truncated spawn container");
  const mpcs: Mpc[] = [];
  for (let i = 0; i < count; i++) {
    const off = 26 + i * SPAWN_RECORD;
    const vec = (base: number): Vec3 => [
      view.getFloat64(base, true), view.getFloat64(base + 8, true), view.getFloat64(base + 16, true),
    ];
    mpcs.push({
      id: view.getUint32(off, true),
      order: view.getUint8(off + 4),
      position: vec(off + 5),
      normal: vec(off + 29),
      g0: view.getFloat64(off + 53, true),
      xi: view.getFloat64(off + 61, true),
      surfaceIndex: view.getUint32(off + 69, true),
    });
  }
  return { sceneHash, spawnSeed, mpcs };
}
