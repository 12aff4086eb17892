"""The co-simulation boundary: datagram codec, engine server, relay, log.

The system simulator owns time and drives the engine over a small UDP
message vocabulary (16-byte header, little-endian bodies).  Delivery is
at-least-once: the engine caches replies per (sender, sequence number) so
retransmits are answered with identical bytes and never advance state
twice.  Channel tensors are chunked to stay within the 60 kB datagram
budget.  Channel realizations stream to disk in a skippable binary log
container with a JSON metadata header.
"""

from __future__ import annotations

import io
import json
import select
import socket
import struct
import threading
from collections import OrderedDict
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .channel import ChannelRealization
from .errors import (
    BadBody,
    BadMagic,
    BadVersion,
    BodyLenMismatch,
    RemoteError,
    Truncated,
    UnknownType,
)

MAGIC = b"LUSM"
PROTOCOL_VERSION = 1
MAX_DATAGRAM = 60_000
CHUNK_PAYLOAD_MAX = 59_000

DEFAULT_ENGINE_PORT = 47001
DEFAULT_PROXY_PORT = 47000

_HEADER = struct.Struct("<4sHHII")  # magic, version, msg_type, seq, body_len

ERR_MALFORMED = 1
ERR_TIME_REGRESSION = 2
ERR_UNKNOWN_ENTITY = 3
ERR_BAD_PARAM = 4


class MsgType(IntEnum):
    HELLO = 1
    HELLO_ACK = 2
    STEP_TO = 3
    STEP_DONE = 4
    SET_POSITION = 5
    GET_CHANNEL = 6
    CHANNEL_DATA = 7
    GET_POSITIONS = 8
    POSITIONS = 9
    SET_PARAM = 10
    ACK = 11
    ERROR = 12
    SHUTDOWN = 13


@dataclass(frozen=True)
class Message:
    msg_type: int
    seq: int
    body: bytes = b""


def encode(msg: Message) -> bytes:
    """Frame a message; rejects oversized datagrams and unknown types."""
    if msg.msg_type not in MsgType._value2member_map_:
        raise UnknownType(f"message type {msg.msg_type}")
    data = _HEADER.pack(MAGIC, PROTOCOL_VERSION, msg.msg_type, msg.seq, len(msg.body)) + msg.body
    if len(data) > MAX_DATAGRAM:
        raise BodyLenMismatch(f"datagram of {len(data)} bytes exceeds {MAX_DATAGRAM}")
    return data


def decode(data: bytes) -> Message:
    """Parse a datagram frame; every failure is a typed CodecError."""
    if len(data) < _HEADER.size:
        raise Truncated(f"datagram of {len(data)} bytes is shorter than the header")
    magic, version, msg_type, seq, body_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic("datagram does not start with the protocol magic")
    if version != PROTOCOL_VERSION:
        raise BadVersion(f"protocol version {version}")
    if msg_type not in MsgType._value2member_map_:
        raise UnknownType(f"message type {msg_type}")
    if len(data) > MAX_DATAGRAM:
        raise BodyLenMismatch(f"datagram of {len(data)} bytes exceeds {MAX_DATAGRAM}")
    if body_len != len(data) - _HEADER.size:
        raise BodyLenMismatch(f"declared body of {body_len} bytes, found {len(data) - _HEADER.size}")
    return Message(msg_type=MsgType(msg_type), seq=seq, body=data[_HEADER.size:])


# -- typed bodies ---------------------------------------------------------------

_TIME = struct.Struct("<d")
_SET_POSITION = struct.Struct("<I6d")
_GET_CHANNEL = struct.Struct("<II")
_CHUNK = struct.Struct("<HH")
_ACK = struct.Struct("<I")
_ERROR = struct.Struct("<IHH")
_POS_COUNT = struct.Struct("<I")
_POS_ENTRY = struct.Struct("<IB6d")
_KEYLEN = struct.Struct("<H")

_ENTITY_KIND_CODE = {"bs": 0, "ue": 1}
_ENTITY_KIND_NAME = {0: "bs", 1: "ue"}


def _unpack(fmt: struct.Struct, body: bytes, what: str):
    if len(body) != fmt.size:
        raise BadBody(f"{what}: body of {len(body)} bytes, expected {fmt.size}")
    return fmt.unpack(body)


def msg_hello(seq: int) -> Message:
    return Message(MsgType.HELLO, seq)


def msg_hello_ack(seq: int) -> Message:
    return Message(MsgType.HELLO_ACK, seq)


def msg_step_to(seq: int, time: float) -> Message:
    return Message(MsgType.STEP_TO, seq, _TIME.pack(time))


def msg_step_done(seq: int, time: float) -> Message:
    return Message(MsgType.STEP_DONE, seq, _TIME.pack(time))


def parse_time(msg: Message) -> float:
    return _unpack(_TIME, msg.body, "time body")[0]


def msg_set_position(seq: int, entity_id: int, position, velocity) -> Message:
    p, v = np.asarray(position, float), np.asarray(velocity, float)
    return Message(MsgType.SET_POSITION, seq, _SET_POSITION.pack(entity_id, *p, *v))


def parse_set_position(msg: Message):
    vals = _unpack(_SET_POSITION, msg.body, "set-position body")
    return vals[0], np.array(vals[1:4]), np.array(vals[4:7])


def msg_get_channel(seq: int, tx_id: int, rx_id: int) -> Message:
    return Message(MsgType.GET_CHANNEL, seq, _GET_CHANNEL.pack(tx_id, rx_id))


def parse_get_channel(msg: Message) -> tuple[int, int]:
    return _unpack(_GET_CHANNEL, msg.body, "get-channel body")


def msg_channel_data(seq: int, chunk_index: int, chunk_total: int, chunk: bytes) -> Message:
    return Message(MsgType.CHANNEL_DATA, seq, _CHUNK.pack(chunk_index, chunk_total) + chunk)


def parse_channel_data(msg: Message) -> tuple[int, int, bytes]:
    if len(msg.body) < _CHUNK.size:
        raise BadBody("channel-data body shorter than its chunk header")
    idx, total = _CHUNK.unpack_from(msg.body)
    return idx, total, msg.body[_CHUNK.size:]


def msg_get_positions(seq: int) -> Message:
    return Message(MsgType.GET_POSITIONS, seq)


def msg_positions(seq: int, entities) -> Message:
    parts = [_POS_COUNT.pack(len(entities))]
    for e in entities:
        parts.append(_POS_ENTRY.pack(e.id, _ENTITY_KIND_CODE[e.kind], *e.position, *e.velocity))
    return Message(MsgType.POSITIONS, seq, b"".join(parts))


def parse_positions(msg: Message):
    if len(msg.body) < _POS_COUNT.size:
        raise BadBody("positions body shorter than its count")
    (count,) = _POS_COUNT.unpack_from(msg.body)
    expected = _POS_COUNT.size + count * _POS_ENTRY.size
    if len(msg.body) != expected:
        raise BadBody(f"positions body of {len(msg.body)} bytes, expected {expected}")
    out = []
    off = _POS_COUNT.size
    for _ in range(count):
        vals = _POS_ENTRY.unpack_from(msg.body, off)
        off += _POS_ENTRY.size
        kind = _ENTITY_KIND_NAME.get(vals[1])
        if kind is None:
            raise BadBody(f"unknown entity kind code {vals[1]}")
        out.append((vals[0], kind, np.array(vals[2:5]), np.array(vals[5:8])))
    return out


def msg_set_param(seq: int, key: str, value: float) -> Message:
    raw = key.encode("utf-8")
    return Message(MsgType.SET_PARAM, seq, _KEYLEN.pack(len(raw)) + raw + _TIME.pack(value))


def parse_set_param(msg: Message) -> tuple[str, float]:
    if len(msg.body) < _KEYLEN.size:
        raise BadBody("set-param body shorter than its key length")
    (klen,) = _KEYLEN.unpack_from(msg.body)
    expected = _KEYLEN.size + klen + _TIME.size
    if len(msg.body) != expected:
        raise BadBody(f"set-param body of {len(msg.body)} bytes, expected {expected}")
    key = msg.body[_KEYLEN.size:_KEYLEN.size + klen].decode("utf-8", errors="replace")
    (value,) = _TIME.unpack_from(msg.body, _KEYLEN.size + klen)
    return key, value


def msg_ack(seq: int, of_seq: int) -> Message:
    return Message(MsgType.ACK, seq, _ACK.pack(of_seq))


def parse_ack(msg: Message) -> int:
    return _unpack(_ACK, msg.body, "ack body")[0]


def msg_error(seq: int, of_seq: int, code: int, text: str) -> Message:
    raw = text.encode("utf-8")[:1000]
    return Message(MsgType.ERROR, seq, _ERROR.pack(of_seq, code, len(raw)) + raw)


def parse_error(msg: Message) -> tuple[int, int, str]:
    if len(msg.body) < _ERROR.size:
        raise BadBody("error body shorter than its header")
    of_seq, code, tlen = _ERROR.unpack_from(msg.body)
    if len(msg.body) != _ERROR.size + tlen:
        raise BadBody("error body length disagrees with its text length")
    return of_seq, code, msg.body[_ERROR.size:].decode("utf-8", errors="replace")


def msg_shutdown(seq: int) -> Message:
    return Message(MsgType.SHUTDOWN, seq)


# -- channel payload and chunking ------------------------------------------------

_CH_PAYLOAD = struct.Struct("<IIdHHI")  # tx, rx, timestamp, rx_ant, tx_ant, n_bins


def encode_channel_payload(real: ChannelRealization) -> bytes:
    rx_ant, tx_ant, n_bins = real.h.shape
    head = _CH_PAYLOAD.pack(real.tx_id, real.rx_id, real.timestamp, rx_ant, tx_ant, n_bins)
    return head + np.ascontiguousarray(real.h.astype("<c8")).tobytes()


def decode_channel_payload(payload: bytes):
    if len(payload) < _CH_PAYLOAD.size:
        raise Truncated("channel payload shorter than its header")
    tx_id, rx_id, timestamp, rx_ant, tx_ant, n_bins = _CH_PAYLOAD.unpack_from(payload)
    body = payload[_CH_PAYLOAD.size:]
    expected = rx_ant * tx_ant * n_bins * 8
    if len(body) != expected:
        raise Truncated(f"channel payload of {len(body)} tensor bytes, expected {expected}")
    h = np.frombuffer(body, dtype="<c8").reshape(rx_ant, tx_ant, n_bins)
    return tx_id, rx_id, timestamp, h


def chunk_payload(payload: bytes) -> list[tuple[int, int, bytes]]:
    """Split into <= 59 kB chunks; at least one chunk even when empty."""
    total = max(1, -(-len(payload) // CHUNK_PAYLOAD_MAX))
    if total > 0xFFFF:
        raise ValueError("payload needs more than 65535 chunks")
    return [(i, total, payload[i * CHUNK_PAYLOAD_MAX:(i + 1) * CHUNK_PAYLOAD_MAX])
            for i in range(total)]


class ChunkAssembler:
    """Reassemble one chunked payload, tolerating duplicates."""

    def __init__(self):
        self.total = None
        self.chunks: dict[int, bytes] = {}

    def add(self, index: int, total: int, chunk: bytes) -> bytes | None:
        if total < 1 or index >= total:
            raise BadBody(f"chunk {index} of {total}")
        if self.total is None:
            self.total = total
        elif self.total != total:
            raise BadBody("inconsistent chunk totals")
        self.chunks[index] = chunk
        if len(self.chunks) == self.total:
            return b"".join(self.chunks[i] for i in range(self.total))
        return None


# -- engine-side protocol server ---------------------------------------------------


class EngineServer:
    """Transport-independent request handler around an engine.

    ``handle_datagram`` maps one inbound datagram to a list of reply
    datagrams.  Replies are cached per (sender, seq) in a small LRU so a
    retransmitted request is answered with identical bytes without
    re-executing its effect.
    """

    REPLY_TYPES = {MsgType.HELLO_ACK, MsgType.STEP_DONE, MsgType.CHANNEL_DATA,
                   MsgType.POSITIONS, MsgType.ACK, MsgType.ERROR}

    def __init__(self, engine, cache_size: int = 64):
        self.engine = engine
        self.cache_size = cache_size
        self._cache: OrderedDict[tuple, list[bytes]] = OrderedDict()
        self._seq = 0
        self.shutdown_requested = False
        self.dropped = 0

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _reply(self, sender_key, request_seq: int, messages: list[Message]) -> list[bytes]:
        out = [encode(m) for m in messages]
        self._cache[(sender_key, request_seq)] = out
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return out

    def handle_datagram(self, data: bytes, sender) -> list[bytes]:
        try:
            msg = decode(data)
        except Exception as e:
            return [encode(msg_error(self._next_seq(), 0, ERR_MALFORMED, str(e)))]

        if msg.msg_type in self.REPLY_TYPES:
            self.dropped += 1
            return []

        cached = self._cache.get((sender, msg.seq))
        if cached is not None:
            self._cache.move_to_end((sender, msg.seq))
            return cached

        try:
            replies = self._dispatch(msg)
        except Exception as e:  # engine state must survive malformed input
            replies = [msg_error(self._next_seq(), msg.seq, ERR_MALFORMED, str(e))]
        return self._reply(sender, msg.seq, replies)

    def _dispatch(self, msg: Message) -> list[Message]:
        engine = self.engine
        t = msg.msg_type
        if t == MsgType.HELLO:
            return [msg_hello_ack(self._next_seq())]
        if t == MsgType.STEP_TO:
            target = parse_time(msg)
            if target < engine.time:
                return [msg_error(self._next_seq(), msg.seq, ERR_TIME_REGRESSION,
                                  f"time regression: {target} < {engine.time}")]
            engine.step_to(target)
            return [msg_step_done(self._next_seq(), engine.time)]
        if t == MsgType.SET_POSITION:
            entity_id, pos, vel = parse_set_position(msg)
            try:
                engine.queue_position(entity_id, pos, vel)
            except KeyError:
                return [msg_error(self._next_seq(), msg.seq, ERR_UNKNOWN_ENTITY,
                                  f"unknown entity {entity_id}")]
            return [msg_ack(self._next_seq(), msg.seq)]
        if t == MsgType.GET_CHANNEL:
            tx_id, rx_id = parse_get_channel(msg)
            if tx_id not in engine.entities or rx_id not in engine.entities:
                return [msg_error(self._next_seq(), msg.seq, ERR_UNKNOWN_ENTITY,
                                  f"unknown entity in pair ({tx_id}, {rx_id})")]
            payload = encode_channel_payload(engine.get_channel(tx_id, rx_id))
            return [msg_channel_data(self._next_seq(), i, total, chunk)
                    for i, total, chunk in chunk_payload(payload)]
        if t == MsgType.GET_POSITIONS:
            return [msg_positions(self._next_seq(), engine.positions())]
        if t == MsgType.SET_PARAM:
            key, value = parse_set_param(msg)
            try:
                engine.set_param(key, value)
            except (KeyError, ValueError) as e:
                return [msg_error(self._next_seq(), msg.seq, ERR_BAD_PARAM, str(e))]
            return [msg_ack(self._next_seq(), msg.seq)]
        if t == MsgType.SHUTDOWN:
            self.shutdown_requested = True
            return [msg_ack(self._next_seq(), msg.seq)]
        raise BadBody(f"unhandled message type {t}")


def engine_serve(engine, endpoint=("127.0.0.1", DEFAULT_ENGINE_PORT), *,
                 ready: threading.Event | None = None, bound: list | None = None,
                 poll_interval: float = 0.2):
    """Serve the wire protocol over UDP until a Shutdown message arrives.

    ``bound`` (when given) receives the actual bound address, and
    ``ready`` is set once the socket is listening; both exist for
    embedding the server in tests and the gateway.
    """
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind(endpoint)
        if bound is not None:
            bound.append(sock.getsockname())
        if ready is not None:
            ready.set()
        sock.settimeout(poll_interval)
        server = EngineServer(engine)
        while not server.shutdown_requested:
            try:
                data, addr = sock.recvfrom(65535)
            except socket.timeout:
                continue
            for out in server.handle_datagram(data, addr):
                sock.sendto(out, addr)
    finally:
        sock.close()


# -- relay proxy -------------------------------------------------------------------


class ProxyRelay:
    """Datagram relay between one client side and one engine side.

    The client side is learned from the first Hello arriving on the
    listen socket; the engine side is the configured destination.
    Datagrams from any other source are dropped and counted.  Payloads
    are forwarded verbatim, order preserved per direction.
    """

    def __init__(self, listen_endpoint, engine_endpoint):
        self.listen_endpoint = listen_endpoint
        self.engine_endpoint = engine_endpoint
        self.client_addr = None
        self.forwarded_to_engine = 0
        self.forwarded_to_client = 0
        self.dropped = 0
        self._stop = threading.Event()

    def stop(self):
        self._stop.set()

    def serve(self, *, ready: threading.Event | None = None, bound: list | None = None):
        client_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        engine_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            client_sock.bind(self.listen_endpoint)
            engine_sock.bind((self.listen_endpoint[0], 0))
            if bound is not None:
                bound.append(client_sock.getsockname())
            if ready is not None:
                ready.set()
            while not self._stop.is_set():
                readable, _, _ = select.select([client_sock, engine_sock], [], [], 0.2)
                for sock in readable:
                    data, addr = sock.recvfrom(65535)
                    if sock is client_sock:
                        if self.client_addr is None:
                            try:
                                if decode(data).msg_type != MsgType.HELLO:
                                    self.dropped += 1
                                    continue
                            except Exception:
                                self.dropped += 1
                                continue
                            self.client_addr = addr
                        if addr != self.client_addr:
                            self.dropped += 1
                            continue
                        engine_sock.sendto(data, self.engine_endpoint)
                        self.forwarded_to_engine += 1
                    else:
                        if addr != self.engine_endpoint or self.client_addr is None:
                            self.dropped += 1
                            continue
                        client_sock.sendto(data, self.client_addr)
                        self.forwarded_to_client += 1
        finally:
            client_sock.close()
            engine_sock.close()


def proxy_relay(endpoint_a, endpoint_b, **kwargs):
    """Run a relay between a client endpoint and the engine endpoint."""
    relay = ProxyRelay(endpoint_a, endpoint_b)
    relay.serve(**kwargs)
    return relay


# -- UDP client --------------------------------------------------------------------


class UdpEngineClient:
    """Blocking request/reply client with idempotent retransmission."""

    def __init__(self, endpoint, timeout: float = 0.5, retries: int = 10):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self._seq = 0
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.settimeout(timeout)

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _request(self, msg: Message, want: set[MsgType]) -> list[Message]:
        data = encode(msg)
        for _ in range(self.retries):
            self.sock.sendto(data, self.endpoint)
            try:
                replies = self._collect(want)
            except socket.timeout:
                continue
            return replies
        raise TimeoutError(f"no reply from {self.endpoint} after {self.retries} tries")

    def _collect(self, want: set[MsgType]) -> list[Message]:
        replies = []
        assembler_total = None
        while True:
            raw, _ = self.sock.recvfrom(65535)
            try:
                reply = decode(raw)
            except Exception:
                continue
            if reply.msg_type == MsgType.ERROR:
                of_seq, code, text = parse_error(reply)
                raise RemoteError(of_seq, code, text)
            if reply.msg_type not in want:
                continue
            replies.append(reply)
            if reply.msg_type != MsgType.CHANNEL_DATA:
                return replies
            idx, total, _ = parse_channel_data(reply)
            assembler_total = total
            seen = {parse_channel_data(r)[0] for r in replies}
            if len(seen) == assembler_total:
                return replies

    def hello(self):
        self._request(msg_hello(self._next_seq()), {MsgType.HELLO_ACK})

    def step_to(self, t: float) -> float:
        replies = self._request(msg_step_to(self._next_seq(), t), {MsgType.STEP_DONE})
        return parse_time(replies[0])

    def set_position(self, entity_id: int, position, velocity=(0, 0, 0)):
        self._request(msg_set_position(self._next_seq(), entity_id, position, velocity),
                      {MsgType.ACK})

    def set_param(self, key: str, value: float):
        self._request(msg_set_param(self._next_seq(), key, value), {MsgType.ACK})

    def get_positions(self):
        replies = self._request(msg_get_positions(self._next_seq()), {MsgType.POSITIONS})
        return parse_positions(replies[0])

    def get_channel(self, tx_id: int, rx_id: int):
        replies = self._request(msg_get_channel(self._next_seq(), tx_id, rx_id),
                                {MsgType.CHANNEL_DATA})
        assembler = ChunkAssembler()
        payload = None
        for r in replies:
            idx, total, chunk = parse_channel_data(r)
            payload = assembler.add(idx, total, chunk) or payload
        if payload is None:
            raise Truncated("incomplete chunked channel payload")
        return decode_channel_payload(payload)

    def shutdown(self):
        self._request(msg_shutdown(self._next_seq()), {MsgType.ACK})


# -- channel log container -----------------------------------------------------------

LOG_MAGIC = b"LUSC"
LOG_VERSION = 1
_LOG_HEADER = struct.Struct("<4sHI")
_REC_FIXED = struct.Struct("<dIIHHI")
_REC_PATH = struct.Struct("<dffB")
_REC_PATH_COUNT = struct.Struct("<I")


@dataclass(frozen=True)
class PathSummary:
    delay: float
    avg_gain: float
    doppler: float
    hop_count: int


@dataclass
class LogRecord:
    timestamp: float
    tx_id: int
    rx_id: int
    rx_ant: int
    tx_ant: int
    n_bins: int
    h: np.ndarray | None            # (rx_ant, tx_ant, n_bins) complex64, None when skipped
    paths: list[PathSummary]

    @classmethod
    def from_realization(cls, real: ChannelRealization) -> "LogRecord":
        rx_ant, tx_ant, n_bins = real.h.shape
        paths = [PathSummary(p.delay, float(np.float32(p.avg_gain)),
                             float(np.float32(p.doppler)), len(p.hops))
                 for p in real.paths]
        return cls(real.timestamp, real.tx_id, real.rx_id, rx_ant, tx_ant, n_bins,
                   real.h.astype("<c8"), paths)


def _record_bytes(rec: LogRecord) -> bytes:
    if rec.h is None:
        raise ValueError("cannot append a record without its tensor")
    parts = [_REC_FIXED.pack(rec.timestamp, rec.tx_id, rec.rx_id,
                             rec.rx_ant, rec.tx_ant, rec.n_bins)]
    parts.append(np.ascontiguousarray(rec.h.astype("<c8")).tobytes())
    parts.append(_REC_PATH_COUNT.pack(len(rec.paths)))
    for p in rec.paths:
        parts.append(_REC_PATH.pack(p.delay, p.avg_gain, p.doppler, p.hop_count))
    return b"".join(parts)


class ChannelLogWriter:
    """Append-only writer; one write syscall per record keeps appends atomic."""

    def __init__(self, path, meta: dict):
        self.path = path
        meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
        self._f = open(path, "wb")
        self._f.write(_LOG_HEADER.pack(LOG_MAGIC, LOG_VERSION, len(meta_bytes)) + meta_bytes)
        self._last_timestamp = -np.inf
        self.records_written = 0

    def append(self, rec: LogRecord | ChannelRealization):
        if isinstance(rec, ChannelRealization):
            rec = LogRecord.from_realization(rec)
        if rec.timestamp < self._last_timestamp:
            raise ValueError(
                f"record at {rec.timestamp} behind last written {self._last_timestamp}")
        self._f.write(_record_bytes(rec))
        self._f.flush()
        self._last_timestamp = rec.timestamp
        self.records_written += 1

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log_meta(path) -> dict:
    with open(path, "rb") as f:
        head = f.read(_LOG_HEADER.size)
        if len(head) < _LOG_HEADER.size or head[:4] != LOG_MAGIC:
            raise BadMagic("not a channel log")
        _, version, meta_len = _LOG_HEADER.unpack(head)
        if version != LOG_VERSION:
            raise BadVersion(f"channel log version {version}")
        meta_bytes = f.read(meta_len)
        if len(meta_bytes) < meta_len:
            raise Truncated("log metadata truncated")
        return json.loads(meta_bytes)


def read_channel_log(path, with_h: bool = True):
    """Iterate records; raises Truncated after the last complete record.

    With ``with_h=False`` the tensor block of each record is skipped with
    a seek, so scanning cost is O(records) regardless of tensor size.
    """
    read_log_meta(path)  # validate header
    with open(path, "rb") as f:
        head = f.read(_LOG_HEADER.size)
        _, _, meta_len = _LOG_HEADER.unpack(head)
        f.seek(_LOG_HEADER.size + meta_len)

        while True:
            fixed = f.read(_REC_FIXED.size)
            if not fixed:
                return
            if len(fixed) < _REC_FIXED.size:
                raise Truncated("record header truncated")
            timestamp, tx_id, rx_id, rx_ant, tx_ant, n_bins = _REC_FIXED.unpack(fixed)
            tensor_bytes = rx_ant * tx_ant * n_bins * 8
            if with_h:
                blob = f.read(tensor_bytes)
                if len(blob) < tensor_bytes:
                    raise Truncated("record tensor truncated")
                h = np.frombuffer(blob, dtype="<c8").reshape(rx_ant, tx_ant, n_bins)
            else:
                here = f.tell()
                f.seek(0, io.SEEK_END)
                end = f.tell()
                if end - here < tensor_bytes:
                    raise Truncated("record tensor truncated")
                f.seek(here + tensor_bytes)
                h = None
            count_raw = f.read(_REC_PATH_COUNT.size)
            if len(count_raw) < _REC_PATH_COUNT.size:
                raise Truncated("record path count truncated")
            (n_paths,) = _REC_PATH_COUNT.unpack(count_raw)
            paths_raw = f.read(n_paths * _REC_PATH.size)
            if len(paths_raw) < n_paths * _REC_PATH.size:
                raise Truncated("record path summaries truncated")
            paths = [PathSummary(*_REC_PATH.unpack_from(paths_raw, k * _REC_PATH.size))
                     for k in range(n_paths)]
            yield LogRecord(timestamp, tx_id, rx_id, rx_ant, tx_ant, n_bins, h, paths)
