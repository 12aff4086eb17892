/**
 * Browser application: renders the scene, steers the engine, plots |H|.
 *
 * Pure client of the gateway: every mutation of simulation state goes
 * through a protocol frame, and the displayed time always equals the
 * last StepDone confirmation.
 */

import * as THREE from "three";

import { Mpc, SceneData, parseScene, parseSpawn } from "./containers.js";
import { DisplayPath, PathSolver } from "./paths.js";
import { buildSceneGraph } from "./render.js";
import {
  ViewState,
  confirmTime,
  initialViewState,
  selectLink,
  setPlaying,
  toggleOverlay,
} from "./viewstate.js";

interface Meta {
  mpcRadius: number;
  maxPathLength: number;
  maxBounceOrder: number;
  fadingCoherenceTau: number;
  txPower: number;
}

interface EntityView {
  id: number;
  kind: "bs" | "ue";
  position: [number, number, number];
  velocity: [number, number, number];
}

class ConsoleApp {
  private view: ViewState = initialViewState();
  private scene!: SceneData;
  private mpcs: Mpc[] = [];
  private meta!: Meta;
  private solver!: PathSolver;
  private entities: EntityView[] = [];
  private paths: DisplayPath[] = [];
  private socket!: WebSocket;
  private three = {
    renderer: undefined as THREE.WebGLRenderer | undefined,
    scene: new THREE.Scene(),
    camera: new THREE.PerspectiveCamera(55, 16 / 9, 0.1, 5000),
    overlay: new THREE.Group(),
    entityMeshes: new Map<number, THREE.Mesh>(),
  };
  private playTimer: number | null = null;
  private dragGhost: { id: number; previous: [number, number, number] } | null = null;

  async start() {
    const [sceneDoc, spawnBlob, meta] = await Promise.all([
      fetch("/api/scene").then((r) => r.json()),
      fetch("/api/mpcs").then((r) => r.arrayBuffer()),
      fetch("/api/meta").then((r) => r.json()),
    ]);
    this.scene = parseScene(sceneDoc);
    this.mpcs = parseSpawn(new Uint8Array(spawnBlob)).mpcs;
    this.meta = meta;
    this.solver = new PathSolver(this.scene, this.mpcs);
    this.setupThree();
    this.setupControls();
    this.connect();
  }

  private connect() {
    this.socket = new WebSocket(`ws://${location.host}/ws`);
    this.socket.binaryType = "arraybuffer";
    this.socket.onmessage = (event) => {
      if (typeof event.data === "string") {
        this.onFrame(JSON.parse(event.data));
      } else {
        this.onChannel(new Uint8Array(event.data));
      }
    };
    this.socket.onclose = () => this.status("engine link closed");
  }

  private send(frame: Record<string, unknown>) {
    this.socket.send(JSON.stringify(frame));
  }

  private onFrame(frame: any) {
    switch (frame.type) {
      case "ready":
        this.status("connected");
        this.view = confirmTime(this.view, frame.time);
        this.send({ type: "get_positions" });
        break;
      case "step_done":
        this.view = confirmTime(this.view, frame.time);
        this.send({ type: "get_positions" });
        break;
      case "positions":
        this.entities = frame.entities;
        this.dragGhost = null;
        if (!this.view.selectedLink) {
          const tx = this.entities.find((e) => e.kind === "bs");
          const rx = this.entities.find((e) => e.kind === "ue");
          if (tx && rx) this.view = selectLink(this.view, tx.id, rx.id);
        }
        this.refreshPaths();
        if (this.view.selectedLink) {
          this.send({ type: "get_channel", ...this.view.selectedLink });
        }
        break;
      case "ack":
        break;
      case "error":
        this.status(`engine: ${frame.text}`);
        if (this.dragGhost) {
          // engine rejected the move: roll the ghost back
          const mesh = this.three.entityMeshes.get(this.dragGhost.id);
          mesh?.position.set(...this.dragGhost.previous);
          this.dragGhost = null;
        }
        break;
      case "disconnect":
        this.status(`engine unreachable: ${frame.text}`);
        break;
    }
    this.updateHud();
  }

  private onChannel(data: Uint8Array) {
    const view = new DataView(data.buffer, data.byteOffset);
    const headLen = view.getUint32(0, true);
    const header = JSON.parse(new TextDecoder().decode(data.subarray(4, 4 + headLen)));
    const iq = new Float32Array(data.buffer, data.byteOffset + 4 + headLen);
    this.plotChannel(header, iq);
  }

  private refreshPaths() {
    const link = this.view.selectedLink;
    if (!link) return;
    const tx = this.entities.find((e) => e.id === link.tx);
    const rx = this.entities.find((e) => e.id === link.rx);
    if (!tx || !rx) return;
    this.paths = this.solver.solve(tx.position, rx.position,
                                   this.meta.maxPathLength, this.meta.maxBounceOrder);
    this.rebuildOverlay();
  }

  private rebuildOverlay() {
    this.three.scene.remove(this.three.overlay);
    this.three.overlay = buildSceneGraph({
      scene: this.scene, mpcs: this.mpcs, mpcRadius: this.meta.mpcRadius,
      paths: this.paths, overlays: this.view.overlays,
    });
    this.three.scene.add(this.three.overlay);
    this.syncEntities();
  }

  private syncEntities() {
    for (const entity of this.entities) {
      let mesh = this.three.entityMeshes.get(entity.id);
      if (!mesh) {
        const geom = entity.kind === "bs"
          ? new THREE.ConeGeometry(1.2, 3.0, 6)
          : new THREE.SphereGeometry(0.8, 10, 8);
        const color = entity.kind === "bs" ? 0x3355ff : 0xffffff;
        mesh = new THREE.Mesh(geom, new THREE.MeshLambertMaterial({ color }));
        mesh.userData.entityId = entity.id;
        mesh.userData.kind = entity.kind;
        this.three.entityMeshes.set(entity.id, mesh);
        this.three.scene.add(mesh);
      }
      if (!this.dragGhost || this.dragGhost.id !== entity.id) {
        mesh.position.set(...entity.position);
      }
    }
  }

  // -- steering --------------------------------------------------------

  step() {
    this.send({ type: "step", dt: this.view.stepSize });
  }

  togglePlay() {
    this.view = setPlaying(this.view, !this.view.playing);
    if (this.view.playing) {
      this.playTimer = window.setInterval(() => this.step(), this.view.stepSize * 1000);
    } else if (this.playTimer !== null) {
      window.clearInterval(this.playTimer);
      this.playTimer = null;
    }
    this.updateHud();
  }

  dragEntity(id: number, target: [number, number, number]) {
    const entity = this.entities.find((e) => e.id === id);
    if (!entity || entity.kind !== "ue") return;
    this.dragGhost = { id, previous: [...entity.position] as [number, number, number] };
    const mesh = this.three.entityMeshes.get(id);
    mesh?.position.set(...target);
    this.send({ type: "drag", id, position: target, velocity: [0, 0, 0] });
  }

  editParam(key: "max_path_length" | "tx_power" | "fading_coherence_tau", value: number) {
    this.send({ type: "set_param", key, value });
    if (key === "max_path_length") this.meta.maxPathLength = value;
    this.refreshPaths();
  }

  // -- presentation ------------------------------------------------------

  private setupThree() {
    const canvas = document.getElementById("view") as HTMLCanvasElement;
    this.three.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.three.renderer.setSize(canvas.clientWidth, canvas.clientHeight, false);
    this.three.scene.background = new THREE.Color(0x10141c);
    this.three.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(1, 2, 3);
    this.three.scene.add(sun);

    const area = this.scene.activeArea;
    const center = new THREE.Vector3(
      (area.min[0] + area.max[0]) / 2, (area.min[1] + area.max[1]) / 2, 0);
    this.three.camera.up.set(0, 0, 1);
    this.three.camera.position.set(center.x, center.y - 140, 120);
    this.three.camera.lookAt(center);

    let orbiting = false;
    let last = { x: 0, y: 0 };
    canvas.addEventListener("pointerdown", (e) => {
      const picked = this.pick(e, canvas);
      if (picked && e.shiftKey) {
        this.beginDrag(picked, e, canvas);
      } else if (picked && picked.userData.kind) {
        this.pickLink(picked.userData.entityId as number);
      } else {
        orbiting = true;
        last = { x: e.clientX, y: e.clientY };
      }
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!orbiting) return;
      const dx = (e.clientX - last.x) * 0.005;
      const dy = (e.clientY - last.y) * 0.005;
      last = { x: e.clientX, y: e.clientY };
      const offset = this.three.camera.position.clone().sub(center);
      const spherical = new THREE.Spherical().setFromVector3(offset);
      spherical.theta -= dx;
      spherical.phi = Math.min(Math.max(spherical.phi - dy, 0.1), Math.PI / 2 - 0.05);
      this.three.camera.position.copy(center.clone().add(new THREE.Vector3().setFromSpherical(spherical)));
      this.three.camera.lookAt(center);
    });
    canvas.addEventListener("pointerup", () => { orbiting = false; });
    canvas.addEventListener("wheel", (e) => {
      const offset = this.three.camera.position.clone().sub(center);
      offset.multiplyScalar(e.deltaY > 0 ? 1.1 : 0.9);
      this.three.camera.position.copy(center.clone().add(offset));
      this.three.camera.lookAt(center);
    });

    const animate = () => {
      requestAnimationFrame(animate);
      this.three.renderer!.render(this.three.scene, this.three.camera);
    };
    animate();
  }

  private pick(e: PointerEvent, canvas: HTMLCanvasElement): THREE.Object3D | null {
    const rect = canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((e.clientX - rect.left) / rect.width) * 2 - 1,
      -((e.clientY - rect.top) / rect.height) * 2 + 1);
    const raycaster = new THREE.Raycaster();
    raycaster.setFromCamera(ndc, this.three.camera);
    const meshes = [...this.three.entityMeshes.values()];
    const hits = raycaster.intersectObjects(meshes, false);
    return hits.length ? hits[0].object : null;
  }

  private beginDrag(target: THREE.Object3D, e: PointerEvent, canvas: HTMLCanvasElement) {
    const id = target.userData.entityId as number;
    const ground = new THREE.Plane(new THREE.Vector3(0, 0, 1), -target.position.z);
    const move = (ev: PointerEvent) => {
      const rect = canvas.getBoundingClientRect();
      const ndc = new THREE.Vector2(
        ((ev.clientX - rect.left) / rect.width) * 2 - 1,
        -((ev.clientY - rect.top) / rect.height) * 2 + 1);
      const raycaster = new THREE.Raycaster();
      raycaster.setFromCamera(ndc, this.three.camera);
      const point = new THREE.Vector3();
      if (raycaster.ray.intersectPlane(ground, point)) {
        target.position.set(point.x, point.y, target.position.z);
      }
    };
    const up = () => {
      canvas.removeEventListener("pointermove", move);
      canvas.removeEventListener("pointerup", up);
      this.dragEntity(id, [target.position.x, target.position.y, target.position.z]);
    };
    canvas.addEventListener("pointermove", move);
    canvas.addEventListener("pointerup", up);
  }

  private pickLink(entityId: number) {
    const entity = this.entities.find((e) => e.id === entityId);
    if (!entity || !this.view.selectedLink) return;
    const link = { ...this.view.selectedLink };
    if (entity.kind === "bs") link.tx = entityId;
    else link.rx = entityId;
    this.view = selectLink(this.view, link.tx, link.rx);
    this.refreshPaths();
    this.send({ type: "get_channel", ...link });
    this.updateHud();
  }

  private plotChannel(header: any, iq: Float32Array) {
    const canvas = document.getElementById("spectrum") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d")!;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const bins = header.bins as number;
    const db: number[] = [];
    for (let n = 0; n < bins; n++) {
      const re = iq[2 * n];
      const im = iq[2 * n + 1];
      db.push(10 * Math.log10(re * re + im * im + 1e-30));
    }
    const lo = Math.min(...db) - 3;
    const hi = Math.max(...db) + 3;
    ctx.strokeStyle = "#6cf";
    ctx.beginPath();
    db.forEach((v, n) => {
      const x = (n / (bins - 1)) * canvas.width;
      const y = canvas.height * (1 - (v - lo) / (hi - lo));
      n === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    const label = document.getElementById("spectrum-label");
    if (label) {
      label.textContent =
        `|H(f)| link ${header.tx} -> ${header.rx} @ t=${header.timestamp.toFixed(2)} s ` +
        `(${bins} bins, ${lo.toFixed(0)}..${hi.toFixed(0)} dB)`;
    }
  }

  private setupControls() {
    const byId = (id: string) => document.getElementById(id)!;
    byId("step").onclick = () => this.step();
    byId("play").onclick = () => this.togglePlay();
    for (const key of ["los", "order1", "order2", "order3", "mpcMarkers"] as const) {
      (byId(`toggle-${key}`) as HTMLInputElement).onchange = () => {
        this.view = toggleOverlay(this.view, key);
        this.rebuildOverlay();
      };
    }
    const paramForm = byId("param-form") as HTMLFormElement;
    paramForm.onsubmit = (e) => {
      e.preventDefault();
      const key = (byId("param-key") as HTMLSelectElement).value as
        "max_path_length" | "tx_power" | "fading_coherence_tau";
      const value = Number((byId("param-value") as HTMLInputElement).value);
      if (Number.isFinite(value)) this.editParam(key, value);
    };
  }

  private status(text: string) {
    const el = document.getElementById("status");
    if (el) el.textContent = text;
  }

  private updateHud() {
    const el = document.getElementById("time");
    if (el) el.textContent = `t = ${this.view.confirmedTime.toFixed(2)} s`;
    const link = document.getElementById("link");
    if (link && this.view.selectedLink) {
      link.textContent = `link ${this.view.selectedLink.tx} -> ${this.view.selectedLink.rx}`;
    }
  }
}

new ConsoleApp().start();
