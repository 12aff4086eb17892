/**
 * The gateway: browsers speak JSON over a WebSocket, the engine speaks
 * datagrams; this process owns the datagram leg.
 *
 * HTTP serves the static app plus the session's data documents
 * (/api/scene, /api/mpcs, /api/meta). The socket upgrade lives at /ws.
 * Browser frames are JSON; channel tensors go back as one binary frame:
 * u32 JSON header length (LE), the JSON header, then interleaved f32 IQ.
 */

import fs from "node:fs";
import http from "node:http";
import path from "node:path";

import { WebSocket, WebSocketServer } from "ws";

import { EngineFault, EngineLink } from "./session.js";

export interface GatewayConfig {
  engineHost: string;
  enginePort: number;
  scenePath: string;
  spawnPath: string;
  staticDir: string;
  /** engine parameters the console may edit at run time */
  meta: {
    mpcRadius: number;
    maxPathLength: number;
    maxBounceOrder: number;
    fadingCoherenceTau: number;
    txPower: number;
  };
}

type Frame = Record<string, unknown>;

const RUNTIME_KEYS = new Set(["max_path_length", "tx_power", "fading_coherence_tau"]);

export function channelFrame(header: Frame, iq: Float32Array): Buffer {
  const head = Buffer.from(JSON.stringify(header), "utf-8");
  const out = Buffer.alloc(4 + head.length + iq.byteLength);
  out.writeUInt32LE(head.length, 0);
  head.copy(out, 4);
  Buffer.from(iq.buffer, iq.byteOffset, iq.byteLength).copy(out, 4 + head.length);
  return out;
}

export class GatewaySession {
  private link: EngineLink;

  constructor(
    private readonly send: (frame: Frame | Buffer) => void,
    config: GatewayConfig,
  ) {
    this.link = new EngineLink({ host: config.engineHost, port: config.enginePort });
  }

  async start(): Promise<void> {
    await this.link.hello();
    this.send({ type: "ready", time: this.link.confirmedTime });
  }

  close() {
    this.link.close();
  }

  async handle(frame: Frame): Promise<void> {
    try {
      switch (frame.type) {
        case "step": {
          const target = this.link.confirmedTime + Number(frame.dt ?? 0.1);
          const time = await this.link.stepTo(target);
          this.send({ type: "step_done", time });
          break;
        }
        case "drag": {
          await this.link.setPosition(Number(frame.id), frame.position as number[],
                                      (frame.velocity as number[]) ?? [0, 0, 0]);
          this.send({ type: "ack", what: "drag", id: frame.id });
          break;
        }
        case "set_param": {
          const key = String(frame.key);
          if (!RUNTIME_KEYS.has(key)) {
            this.send({ type: "error", code: 4, text: `parameter ${key} is not run-time safe` });
            return;
          }
          await this.link.setParam(key, Number(frame.value));
          this.send({ type: "ack", what: "set_param", key });
          break;
        }
        case "get_positions": {
          const entities = await this.link.getPositions();
          this.send({ type: "positions", time: this.link.confirmedTime, entities });
          break;
        }
        case "get_channel": {
          const tensor = await this.link.getChannel(Number(frame.tx), Number(frame.rx));
          this.send(channelFrame({
            type: "channel", tx: tensor.txId, rx: tensor.rxId, timestamp: tensor.timestamp,
            rxAnt: tensor.rxAnt, txAnt: tensor.txAnt, bins: tensor.bins,
          }, tensor.iq));
          break;
        }
        default:
          this.send({ type: "error", code: 1, text: `unknown frame type ${frame.type}` });
      }
    } catch (err) {
      if (err instanceof EngineFault) {
        this.send({ type: "error", code: err.code, text: err.text });
      } else {
        this.send({ type: "error", code: 0, text: String(err) });
      }
    }
  }
}

const MIME: Record<string, string> = {
  ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
  ".json": "application/json", ".map": "application/json",
};

export class Gateway {
  readonly server: http.Server;
  private wss: WebSocketServer;

  constructor(private readonly config: GatewayConfig) {
    this.server = http.createServer((req, res) => this.serveHttp(req, res));
    this.wss = new WebSocketServer({ server: this.server, path: "/ws" });
    this.wss.on("connection", (socket) => this.attach(socket));
  }

  listen(port: number, host = "127.0.0.1"): Promise<number> {
    return new Promise((resolve) => {
      this.server.listen(port, host, () => {
        const addr = this.server.address();
        resolve(typeof addr === "object" && addr ? addr.port : port);
      });
    });
  }

  close() {
    this.wss.close();
    this.server.close();
  }

  private attach(socket: WebSocket) {
    const session = new GatewaySession((frame) => {
      if (socket.readyState !== WebSocket.OPEN) return;
      if (Buffer.isBuffer(frame)) socket.send(frame);
      else socket.send(JSON.stringify(frame));
    }, this.config);
    socket.on("message", (raw, isBinary) => {
      if (isBinary) return;
      let frame: Frame;
      try {
        frame = JSON.parse(raw.toString());
      } catch {
        socket.send(JSON.stringify({ type: "error", code: 1, text: "frame is not JSON" }));
        return;
      }
      void session.handle(frame);
    });
    socket.on("close", () => session.close());
    void session.start().catch((err) => {
      if (socket.readyState === WebSocket.OPEN) {
        socket.send(JSON.stringify({ type: "disconnect", text: String(err) }));
        socket.close();
      }
      session.close();
    });
  }

  private serveHttp(req: http.IncomingMessage, res: http.ServerResponse) {
    const url = req.url ?? "/";
    try {
      if (url === "/api/scene") {
        res.setHeader("content-type", "application/json");
        res.end(fs.readFileSync(this.config.scenePath));
        return;
      }
      if (url === "/api/mpcs") {
        res.setHeader("content-type", "application/octet-stream");
        res.end(fs.readFileSync(this.config.spawnPath));
        return;
      }
      if (url === "/api/meta") {
        res.setHeader("content-type", "application/json");
        res.end(JSON.stringify(this.config.meta));
        return;
      }
      const rel = url === "/" ? "index.html" : url.replace(/^\//, "");
      const file = path.normalize(path.join(this.config.staticDir, rel));
      if (!file.startsWith(path.normalize(this.config.staticDir))) {
        res.statusCode = 403;
        res.end("forbidden");
        return;
      }
      res.setHeader("content-type", MIME[path.extname(file)] ?? "application/octet-stream");
      res.end(fs.readFileSync(file));
    } catch {
      res.statusCode = 404;
      res.end("not found");
    }
  }
}
