/**
 * Wire protocol codec: the TypeScript side of the engine's UDP datagrams.
 *
 * Layout (little-endian): magic "LUSM", u16 version=1, u16 msg_type,
 * u32 seq, u32 body_len, body. Channel tensors arrive chunked; the
 * assembler reassembles them bit-exactly.
 */

export const MAGIC = 0x4d53554c; // "LUSM" read as LE u32
export const PROTOCOL_VERSION = 1;
export const MAX_DATAGRAM = 60_000;
export const HEADER_SIZE = 16;

export enum MsgType {
  Hello = 1,
  HelloAck = 2,
  StepTo = 3,
  StepDone = 4,
  SetPosition = 5,
  GetChannel = 6,
  ChannelData = 7,
  GetPositions = 8,
  Positions = 9,
  SetParam = 10,
  Ack = 11,
  Error = 12,
  Shutdown = 13,
}

export interface Message {
  msgType: MsgType;
  seq: number;
  body: Uint8Array;
}

export class CodecError extends Error {}

export function encode(msg: Message): Uint8Array {
  const out = new Uint8Array(HEADER_SIZE + msg.body.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, MAGIC, true);
  view.setUint16(4, PROTOCOL_VERSION, true);
  view.setUint16(6, msg.msgType, true);
  view.setUint32(8, msg.seq, true);
  view.setUint32(12, msg.body.length, true);
  out.set(msg.body, HEADER_SIZE);
  if (out.length > MAX_DATAGRAM) throw new CodecError(`datagram of ${out.length} bytes too large`);
  return out;
}

export function decode(data: Uint8Array): Message {
  if (data.length < HEADER_SIZE) throw new CodecError("datagram shorter than header");
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  if (view.getUint32(0, true) !== MAGIC) throw new CodecError("bad magic");
  if (view.getUint16(4, true) !== PROTOCOL_VERSION) throw new CodecError("bad version");
  const msgType = view.getUint16(6, true);
  if (msgType < 1 || msgType > 13) throw new CodecError(`unknown message type ${msgType}`);
  const seq = view.getUint32(8, true);
  const bodyLen = view.getUint32(12, true);
  if (bodyLen !== data.length - HEADER_SIZE) throw new CodecError("body length mismatch");
  return { msgType, seq, body: data.subarray(HEADER_SIZE) };
}

function body(size: number): [Uint8Array, DataView] {
  const buf = new Uint8Array(size);
  return [buf, new DataView(buf.buffer)];
}

export const hello = (seq: number): Message => ({ msgType: MsgType.Hello, seq, body: new Uint8Array(0) });
export const shutdown = (seq: number): Message => ({ msgType: MsgType.Shutdown, seq, body: new Uint8Array(0) });
export const getPositions = (seq: number): Message => ({ msgType: MsgType.GetPositions, seq, body: new Uint8Array(0) });

export function stepTo(seq: number, time: number): Message {
  const [buf, view] = body(8);
  view.setFloat64(0, time, true);
  return { msgType: MsgType.StepTo, seq, body: buf };
}

export function parseTime(msg: Message): number {
  if (msg.body.length !== 8) throw new CodecError("time body must be 8 bytes");
  return new DataView(msg.body.buffer, msg.body.byteOffset).getFloat64(0, true);
}

export function setPosition(
  seq: number, entityId: number, position: number[], velocity: number[],
): Message {
  const [buf, view] = body(52);
  view.setUint32(0, entityId, true);
  for (let k = 0; k < 3; k++) view.setFloat64(4 + 8 * k, position[k], true);
  for (let k = 0; k < 3; k++) view.setFloat64(28 + 8 * k, velocity[k], true);
  return { msgType: MsgType.SetPosition, seq, body: buf };
}

export function getChannel(seq: number, txId: number, rxId: number): Message {
  const [buf, view] = body(8);
  view.setUint32(0, txId, true);
  view.setUint32(4, rxId, true);
  return { msgType: MsgType.GetChannel, seq, body: buf };
}

export function setParam(seq: number, key: string, value: number): Message {
  const raw = new TextEncoder().encode(key);
  const [buf, view] = body(2 + raw.length + 8);
  view.setUint16(0, raw.length, true);
  buf.set(raw, 2);
  view.setFloat64(2 + raw.length, value, true);
  return { msgType: MsgType.SetParam, seq, body: buf };
}

export interface EntityState {
  id: number;
  kind: "bs" | "ue";
  position: [number, number, number];
  velocity: [number, number, number];
}

export function parsePositions(msg: Message): EntityState[] {
  const view = new DataView(msg.body.buffer, msg.body.byteOffset, msg.body.byteLength);
  const count = view.getUint32(0, true);
  if (msg.body.length !== 4 + count * 53) throw new CodecError("positions body length mismatch");
  const out: EntityState[] = [];
  for (let i = 0; i < count; i++) {
    const off = 4 + i * 53;
    const id = view.getUint32(off, true);
    const kind = view.getUint8(off + 4) === 0 ? "bs" : "ue";
    const fetch = (base: number): [number, number, number] => [
      view.getFloat64(base, true), view.getFloat64(base + 8, true), view.getFloat64(base + 16, true),
    ];
    out.push({ id, kind, position: fetch(off + 5), velocity: fetch(off + 29) });
  }
  return out;
}

export function parseAck(msg: Message): number {
  return new DataView(msg.body.buffer, msg.body.byteOffset).getUint32(0, true);
}

export interface RemoteFault { ofSeq: number; code: number; text: string }

export function parseError(msg: Message): RemoteFault {
  const view = new DataView(msg.body.buffer, msg.body.byteOffset, msg.body.byteLength);
  const ofSeq = view.getUint32(0, true);
  const code = view.getUint16(4, true);
  const len = view.getUint16(6, true);
  const text = new TextDecoder().decode(msg.body.subarray(8, 8 + len));
  return { ofSeq, code, text };
}

export interface ChunkPart { index: number; total: number; chunk: Uint8Array }

export function parseChannelData(msg: Message): ChunkPart {
  const view = new DataView(msg.body.buffer, msg.body.byteOffset, msg.body.byteLength);
  return { index: view.getUint16(0, true), total: view.getUint16(2, true), chunk: msg.body.subarray(4) };
}

export class ChunkAssembler {
  private total: number | null = null;
  private parts = new Map<number, Uint8Array>();

  add(part: ChunkPart): Uint8Array | null {
    if (this.total === null) this.total = part.total;
    else if (this.total !== part.total) throw new CodecError("inconsistent chunk totals");
    this.parts.set(part.index, part.chunk);
    if (this.parts.size !== this.total) return null;
    let size = 0;
    for (let i = 0; i < this.total; i++) size += this.parts.get(i)!.length;
    const out = new Uint8Array(size);
    let off = 0;
    for (let i = 0; i < this.total; i++) {
      const chunk = this.parts.get(i)!;
      out.set(chunk, off);
      off += chunk.length;
    }
    return out;
  }
}

export interface ChannelTensor {
  txId: number;
  rxId: number;
  timestamp: number;
  rxAnt: number;
  txAnt: number;
  bins: number;
  /** interleaved (re, im) f32, row-major [rx][tx][bin] */
  iq: Float32Array;
}

export function parseChannelPayload(payload: Uint8Array): ChannelTensor {
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  const txId = view.getUint32(0, true);
  const rxId = view.getUint32(4, true);
  const timestamp = view.getFloat64(8, true);
  const rxAnt = view.getUint16(16, true);
  const txAnt = view.getUint16(18, true);
  const bins = view.getUint32(20, true);
  const expected = 24 + rxAnt * txAnt * bins * 8;
  if (payload.length !== expected) throw new CodecError("channel payload length mismatch");
  const iq = new Float32Array(rxAnt * txAnt * bins * 2);
  for (let i = 0; i < iq.length; i++) iq[i] = view.getFloat32(24 + 4 * i, true);
  return { txId, rxId, timestamp, rxAnt, txAnt, bins, iq };
}
