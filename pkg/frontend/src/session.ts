/**
 * One engine session over UDP: strictly sequenced request/reply with
 * idempotent retransmission, chunk reassembly for channel tensors, and
 * local enforcement of the protocol's time-regression rule.
 *
 * Requests are serialized (one in flight), matching the engine's
 * single-owner concurrency model.
 */

import dgram from "node:dgram";

import {
  ChannelTensor,
  ChunkAssembler,
  CodecError,
  EntityState,
  Message,
  MsgType,
  decode,
  encode,
  getChannel,
  getPositions,
  hello,
  parseChannelData,
  parseChannelPayload,
  parseError,
  parsePositions,
  parseTime,
  setParam,
  setPosition,
  shutdown,
  stepTo,
} from "./protocol.js";

export class EngineFault extends Error {
  constructor(public code: number, public text: string) {
    super(`engine error ${code}: ${text}`);
  }
}

export interface EngineLinkOptions {
  host: string;
  port: number;
  timeoutMs?: number;
  retries?: number;
}

export class EngineLink {
  private socket: dgram.Socket;
  private seq = 0;
  private queue: Promise<unknown> = Promise.resolve();
  private readonly timeoutMs: number;
  private readonly retries: number;
  /** last engine-confirmed time; requests behind it are rejected locally */
  confirmedTime = 0;

  constructor(private readonly options: EngineLinkOptions) {
    this.timeoutMs = options.timeoutMs ?? 500;
    this.retries = options.retries ?? 10;
    this.socket = dgram.createSocket("udp4");
  }

  close() {
    this.socket.close();
  }

  private nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  /** serialize: at most one request on the wire */
  private enqueue<T>(job: () => Promise<T>): Promise<T> {
    const next = this.queue.then(job, job);
    this.queue = next.catch(() => undefined);
    return next;
  }

  private request(msg: Message, wantTypes: Set<MsgType>): Promise<Message[]> {
    return this.enqueue(() => this.exchange(msg, wantTypes));
  }

  private exchange(msg: Message, wantTypes: Set<MsgType>): Promise<Message[]> {
    const data = encode(msg);
    return new Promise((resolve, reject) => {
      const replies: Message[] = [];
      let chunkTotal: number | null = null;
      let attempts = 0;
      let timer: NodeJS.Timeout;

      const cleanup = () => {
        clearTimeout(timer);
        this.socket.removeListener("message", onMessage);
      };
      const fail = (err: Error) => {
        cleanup();
        reject(err);
      };
      const send = () => {
        if (attempts >= this.retries) {
          fail(new Error(`no reply from engine after ${this.retries} attempts`));
          return;
        }
        attempts += 1;
        this.socket.send(data, this.options.port, this.options.host);
        timer = setTimeout(send, this.timeoutMs);
      };
      const onMessage = (raw: Buffer) => {
        let reply: Message;
        try {
          reply = decode(new Uint8Array(raw));
        } catch (err) {
          if (err instanceof CodecError) return; // stray datagram
          throw err;
        }
        if (reply.msgType === MsgType.Error) {
          const fault = parseError(reply);
          fail(new EngineFault(fault.code, fault.text));
          return;
        }
        if (!wantTypes.has(reply.msgType)) return;
        replies.push(reply);
        if (reply.msgType === MsgType.ChannelData) {
          chunkTotal = parseChannelData(reply).total;
          const seen = new Set(replies.map((r) => parseChannelData(r).index));
          if (seen.size < chunkTotal) return;
        }
        cleanup();
        resolve(replies);
      };
      this.socket.on("message", onMessage);
      send();
    });
  }

  async hello(): Promise<void> {
    await this.request(hello(this.nextSeq()), new Set([MsgType.HelloAck]));
  }

  async stepTo(time: number): Promise<number> {
    if (time < this.confirmedTime) {
      throw new EngineFault(2, `time regression: ${time} < ${this.confirmedTime}`);
    }
    const replies = await this.request(stepTo(this.nextSeq(), time), new Set([MsgType.StepDone]));
    this.confirmedTime = parseTime(replies[0]);
    return this.confirmedTime;
  }

  async setPosition(entityId: number, position: number[], velocity: number[] = [0, 0, 0]): Promise<void> {
    await this.request(setPosition(this.nextSeq(), entityId, position, velocity),
                       new Set([MsgType.Ack]));
  }

  async setParam(key: string, value: number): Promise<void> {
    await this.request(setParam(this.nextSeq(), key, value), new Set([MsgType.Ack]));
  }

  async getPositions(): Promise<EntityState[]> {
    const replies = await this.request(getPositions(this.nextSeq()), new Set([MsgType.Positions]));
    return parsePositions(replies[0]);
  }

  async getChannel(txId: number, rxId: number): Promise<ChannelTensor> {
    const replies = await this.request(getChannel(this.nextSeq(), txId, rxId),
                                       new Set([MsgType.ChannelData]));
    const assembler = new ChunkAssembler();
    let payload: Uint8Array | null = null;
    for (const reply of replies) {
      payload = assembler.add(parseChannelData(reply)) ?? payload;
    }
    if (!payload) throw new CodecError("incomplete chunked channel payload");
    return parseChannelPayload(payload);
  }

  async shutdown(): Promise<void> {
    await this.request(shutdown(this.nextSeq()), new Set([MsgType.Ack]));
  }
}
