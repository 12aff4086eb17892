/**
 * Gateway launcher: node dist/serve.js --engine host:port --scene scene.json
 *   --spawn spawn.lump [--port 8080] [--static static-dir]
 */

import fs from "node:fs";
import path from "node:path";
import process from "node:process";
import { fileURLToPath } from "node:url";

import { Gateway } from "./gateway.js";

function arg(name: string, fallback?: string): string {
  const i = process.argv.indexOf(`--${name}`);
  if (i >= 0 && i + 1 < process.argv.length) return process.argv[i + 1];
  if (fallback !== undefined) return fallback;
  console.error(`missing --${name}`);
  process.exit(2);
}

const here = path.dirname(fileURLToPath(import.meta.url));  // dist/
const root = path.resolve(here, "..");
const engine = arg("engine", "127.0.0.1:47001");
const [host, port] = [engine.slice(0, engine.lastIndexOf(":")), Number(engine.slice(engine.lastIndexOf(":") + 1))];

const staticDir = path.resolve(arg("static", path.join(root, "static")));
const appDir = here;
const vendorSrc = path.join(root, "node_modules", "three", "build", "three.module.js");

// assemble the served tree: static page + compiled app + vendored three
const serveDir = path.join(root, "dist", "site");
fs.mkdirSync(path.join(serveDir, "app"), { recursive: true });
fs.mkdirSync(path.join(serveDir, "vendor"), { recursive: true });
for (const f of fs.readdirSync(staticDir)) {
  fs.copyFileSync(path.join(staticDir, f), path.join(serveDir, f));
}
for (const f of fs.readdirSync(appDir).filter((f) => f.endsWith(".js"))) {
  fs.copyFileSync(path.join(appDir, f), path.join(serveDir, "app", f));
}
fs.copyFileSync(vendorSrc, path.join(serveDir, "vendor", "three.module.js"));

// derive display parameters from the same documents the engine reads
const radioDoc = JSON.parse(fs.readFileSync(arg("radio"), "utf-8"));
const gscmDoc = JSON.parse(fs.readFileSync(arg("gscm"), "utf-8"));

const gateway = new Gateway({
  engineHost: host,
  enginePort: port,
  scenePath: arg("scene"),
  spawnPath: arg("spawn"),
  staticDir: serveDir,
  meta: {
    mpcRadius: gscmDoc.mpc_radius ?? 0.1,
    maxPathLength: radioDoc.max_path_length,
    maxBounceOrder: radioDoc.max_bounce_order ?? 3,
    fadingCoherenceTau: gscmDoc.fading_coherence_tau,
    txPower: radioDoc.tx_power,
  },
});

const listenPort = Number(arg("port", "8080"));
gateway.listen(listenPort).then((p) => {
  console.log(`lusim console at http://127.0.0.1:${p}/ (engine ${host}:${port})`);
});
