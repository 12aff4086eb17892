/**
 * Scripted session against a live engine (spawned as a subprocess).
 *
 * Covers the console acceptance criteria: dragging the terminal behind
 * the building removes the LOS polyline on the next step, the color
 * mapping is green/yellow with red active markers, and the displayed
 * time always equals the last StepDone confirmation.
 */

import { execFile, spawn, ChildProcess } from "node:child_process";
import dgram from "node:dgram";
import fs from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { parseScene, parseSpawn, SceneData, Mpc } from "../src/containers.js";
import { channelFrame } from "../src/gateway.js";
import { PathSolver } from "../src/paths.js";
import { parseChannelPayload } from "../src/protocol.js";
import { buildSceneGraph, pathColor, ACTIVE_MPC_COLOR } from "../src/render.js";
import { EngineFault, EngineLink } from "../src/session.js";
import { confirmTime, initialViewState, ViewState } from "../src/viewstate.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const fixtures = path.join(here, "fixtures");
const run = promisify(execFile);

const CLEAR_SPOT: [number, number, number] = [10, -20, 1.5];
const SHADOW_SPOT: [number, number, number] = [40, 0, 1.5]; // building between BS and here

let engine: ChildProcess;
let link: EngineLink;
let scene: SceneData;
let mpcs: Mpc[];
let enginePort: number;

async function freeUdpPort(): Promise<number> {
  return new Promise((resolve) => {
    const sock = dgram.createSocket("udp4");
    sock.bind(0, "127.0.0.1", () => {
      const port = (sock.address() as any).port;
      sock.close(() => resolve(port));
    });
  });
}

beforeAll(async () => {
  const spawnFile = path.join(fixtures, "spawn.lump");
  const config = [
    "--gscm", path.join(fixtures, "gscm.json"),
    "--radio", path.join(fixtures, "radio.json"),
    "--scenario", path.join(fixtures, "scenario.json"),
  ];
  await run("python3", ["-m", "lusim.cli", "spawn", ...config, "--out", spawnFile]);
  scene = parseScene(JSON.parse(fs.readFileSync(path.join(fixtures, "scene.json"), "utf-8")));
  mpcs = parseSpawn(fs.readFileSync(spawnFile)).mpcs;
  expect(mpcs.length).toBeGreaterThan(5);

  enginePort = await freeUdpPort();
  engine = spawn("python3", [
    "-m", "lusim.cli", "serve", ...config, "--spawn", spawnFile,
    "--endpoint", `127.0.0.1:${enginePort}`,
  ], { stdio: "inherit" });

  link = new EngineLink({ host: "127.0.0.1", port: enginePort, timeoutMs: 500, retries: 40 });
  await link.hello();
}, 120_000);

afterAll(async () => {
  try {
    await link.shutdown();
  } catch {
    engine?.kill();
  }
  link?.close();
  await new Promise((resolve) => engine?.once("exit", resolve));
});

describe("scripted live session", () => {
  let view: ViewState = initialViewState();
  const solver = () => new PathSolver(scene, mpcs);

  it("steps in lockstep; displayed time equals the last StepDone", async () => {
    const confirmed = await link.stepTo(0.1);
    view = confirmTime(view, confirmed);
    expect(confirmed).toBe(0.1);
    expect(view.timeCursor).toBe(0.1);
    expect(view.confirmedTime).toBe(link.confirmedTime);

    const again = await link.stepTo(0.2);
    view = confirmTime(view, again);
    expect(view.confirmedTime).toBe(0.2);
  });

  it("rejects time regression locally and remotely", async () => {
    await expect(link.stepTo(0.05)).rejects.toThrow(EngineFault);
    expect(link.confirmedTime).toBe(0.2);
  });

  it("drag behind the building removes exactly the LOS polyline next step", async () => {
    const positions = await link.getPositions();
    const bs = positions.find((e) => e.kind === "bs")!;
    const ue = positions.find((e) => e.kind === "ue")!;
    expect(ue.position).toEqual(CLEAR_SPOT);

    const before = solver().solve(bs.position, ue.position, 300, 2);
    const beforeHops = new Set(before.map((p) => p.hops.join(".") || "los"));
    expect(beforeHops.has("los")).toBe(true);

    await link.setPosition(ue.id, SHADOW_SPOT);   // applies on the next step
    const t = await link.stepTo(0.3);
    view = confirmTime(view, t);
    const moved = await link.getPositions();
    const movedUe = moved.find((e) => e.kind === "ue")!;
    expect(movedUe.position).toEqual(SHADOW_SPOT);

    const after = solver().solve(bs.position, movedUe.position, 300, 2);
    const afterHops = new Set(after.map((p) => p.hops.join(".") || "los"));
    expect(afterHops.has("los")).toBe(false);

    // the engine agrees: its channel realization now lacks the direct tap
    const tensor = await link.getChannel(bs.id, movedUe.id);
    expect(tensor.timestamp).toBe(view.confirmedTime);
  });

  it("renders the color convention over the live path set", async () => {
    const positions = await link.getPositions();
    const bs = positions.find((e) => e.kind === "bs")!;
    const ue = positions.find((e) => e.kind === "ue")!;
    const paths = solver().solve(bs.position, ue.position, 300, 2);
    expect(paths.length).toBeGreaterThan(0);

    const graph = buildSceneGraph({
      scene, mpcs, mpcRadius: 0.3, paths,
      overlays: { los: true, order1: true, order2: true, order3: false, mpcMarkers: true },
    });
    const lines = graph.getObjectByName("paths")!;
    for (const line of lines.children) {
      const order = Number(line.name.split("-")[1]);
      expect((line as any).material.color.getHex()).toBe(pathColor(order));
    }
    expect(pathColor(1)).toBe(0x00cc33);  // green, first order
    expect(pathColor(2)).toBe(0xffcc00);  // yellow, second order

    const markers = graph.getObjectByName("mpc-markers")!;
    const activeIds = new Set(paths.flatMap((p) => p.hops));
    const red = markers.children.filter(
      (m) => (m as any).material.color.getHex() === ACTIVE_MPC_COLOR);
    expect(red.length).toBe(activeIds.size);
    expect(red.length).toBeGreaterThan(0);
  });

  it("tightening max_path_length drops long polylines", async () => {
    const positions = await link.getPositions();
    const bs = positions.find((e) => e.kind === "bs")!;
    const ue = positions.find((e) => e.kind === "ue")!;
    const before = solver().solve(bs.position, ue.position, 300, 2);
    const longest = Math.max(...before.map((p) => p.totalLength));

    await link.setParam("max_path_length", longest - 1);
    const after = solver().solve(bs.position, ue.position, longest - 1, 2);
    expect(after.length).toBeLessThan(before.length);
    expect(after.every((p) => p.totalLength <= longest - 1)).toBe(true);
    expect(new Set(after.map((p) => p.hops.join("."))).size).toBe(after.length);
    await link.setParam("max_path_length", 300);
  });

  it("chunked channel tensors reassemble and frame for the browser", async () => {
    const positions = await link.getPositions();
    const bs = positions.find((e) => e.kind === "bs")!;
    const ue = positions.find((e) => e.kind === "ue")!;
    const tensor = await link.getChannel(bs.id, ue.id);
    expect(tensor.bins).toBe(128);
    expect(tensor.iq.length).toBe(2 * 128);

    const frame = channelFrame(
      { type: "channel", tx: tensor.txId, rx: tensor.rxId, bins: tensor.bins }, tensor.iq);
    const headLen = frame.readUInt32LE(0);
    const header = JSON.parse(frame.subarray(4, 4 + headLen).toString());
    expect(header.tx).toBe(bs.id);
    const iqBack = new Float32Array(
      frame.buffer.slice(frame.byteOffset + 4 + headLen, frame.byteOffset + frame.length));
    expect([...iqBack]).toEqual([...tensor.iq]);
  });
});
