"""UDP datagram transport with fragmentation and reassembly.

Datagram layout (big-endian)::

    b"USDP" | stream_id u32 | frag_seq u32 | frag_total u32 | payload (<= 1400 bytes)

A stream is complete when all ``frag_total`` fragments of one ``stream_id``
have arrived; reassembly gives up ``timeout_s`` after the last fragment.
"""

from __future__ import annotations

import logging
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from urllib.parse import urlparse

log = logging.getLogger(__name__)

MAGIC = b"USDP"
MAX_FRAGMENT = 1400
REASSEMBLY_TIMEOUT_S = 2.0
SEND_RETRIES = 3
_HEADER = struct.Struct(">4sIII")


class TransportError(OSError):
    pass


def parse_udp_url(url: str) -> tuple[str, int]:
    u = urlparse(url)
    if u.scheme != "udp" or not u.hostname or u.port is None:
        raise ValueError(f"expected udp://host:port, got {url!r}")
    return u.hostname, u.port


def fragment(data: bytes, stream_id: int, max_fragment: int = MAX_FRAGMENT) -> list[bytes]:
    if not 1 <= max_fragment <= MAX_FRAGMENT:
        raise ValueError(f"max_fragment must be in 1..{MAX_FRAGMENT}")
    data = bytes(data)
    chunks = [data[i : i + max_fragment] for i in range(0, len(data), max_fragment)] or [b""]
    total = len(chunks)
    return [_HEADER.pack(MAGIC, stream_id, k, total) + c for k, c in enumerate(chunks)]


def parse_datagram(datagram: bytes) -> tuple[int, int, int, bytes] | None:
    if len(datagram) < _HEADER.size:
        return None
    magic, stream_id, seq, total = _HEADER.unpack_from(datagram)
    if magic != MAGIC or seq >= total or len(datagram) - _HEADER.size > MAX_FRAGMENT:
        return None
    return stream_id, seq, total, datagram[_HEADER.size :]


@dataclass
class Reassembler:
    """Collects fragments for one or more streams."""

    streams: dict = field(default_factory=dict)

    def add(self, datagram: bytes) -> int | None:
        """Store a datagram; return its stream id once that stream is complete."""
        parsed = parse_datagram(datagram)
        if parsed is None:
            return None
        sid, seq, total, payload = parsed
        st = self.streams.setdefault(sid, {"total": total, "frags": {}})
        st["frags"].setdefault(seq, payload)
        return sid if len(st["frags"]) == st["total"] else None

    def result(self, sid: int) -> tuple[bytes, list[int]]:
        """Stream bytes and the missing fragment numbers.

        Senders fill every fragment but the last, so a missing interior
        fragment is replaced by ``MAX_FRAGMENT`` zero bytes to keep later
        offsets intact; a missing final fragment truncates the stream.
        """
        st = self.streams.get(sid)
        if st is None:
            return b"", []
        frags = st["frags"]
        missing = [k for k in range(st["total"]) if k not in frags]
        last = max(frags) if frags else -1
        zero = bytes(MAX_FRAGMENT)
        return b"".join(frags.get(k, zero) for k in range(last + 1)), missing


class UdpSender:
    """Streams bytes as datagrams from a background thread fed by a bounded buffer.

    Producers call :meth:`send_stream` as data becomes available, so encoding and
    transmission overlap; :meth:`close` flushes and joins.
    """

    def __init__(self, host: str, port: int, stream_id: int = 1, buffer_datagrams: int = 256, pace_every: int = 32):
        self.addr = (host, port)
        self.stream_id = stream_id
        self.buffer: queue.Queue = queue.Queue(maxsize=buffer_datagrams)
        self.pace_every = pace_every
        self.error: BaseException | None = None
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._thread = threading.Thread(target=self._run, daemon=True, name="udp-sender")
        self._thread.start()

    def _send(self, datagram: bytes):
        for attempt in range(1, SEND_RETRIES + 1):
            try:
                self.sock.sendto(datagram, self.addr)
                return
            except OSError as exc:
                log.warning("send to %s:%d failed (attempt %d/%d): %s", *self.addr, attempt, SEND_RETRIES, exc)
                if attempt == SEND_RETRIES:
                    raise TransportError(f"endpoint {self.addr[0]}:{self.addr[1]} unreachable") from exc
                time.sleep(0.05 * attempt)

    def _run(self):
        sent = 0
        while True:
            item = self.buffer.get()
            if item is None:
                return
            if self.error is not None:
                continue
            try:
                self._send(item)
            except TransportError as exc:
                self.error = exc
                continue
            sent += 1
            if self.pace_every and sent % self.pace_every == 0:
                time.sleep(0.001)

    def send_stream(self, data: bytes):
        for dgram in fragment(data, self.stream_id):
            self.buffer.put(dgram)
            if self.error is not None:
                raise self.error

    def close(self):
        self.buffer.put(None)
        self._thread.join()
        self.sock.close()
        if self.error is not None:
            raise self.error


def send_bytes(data: bytes, url: str, stream_id: int = 1):
    host, port = parse_udp_url(url)
    sender = UdpSender(host, port, stream_id)
    try:
        sender.send_stream(data)
    finally:
        sender.close()


class UdpReceiver:
    """Bound UDP socket that reassembles one stream."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, rcvbuf: int = 8 << 20):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, rcvbuf)
        except OSError:
            pass
        self.sock.bind((host, port))

    @property
    def port(self) -> int:
        return self.sock.getsockname()[1]

    @property
    def url(self) -> str:
        host, port = self.sock.getsockname()
        return f"udp://{host}:{port}"

    def receive(self, first_timeout_s: float = 10.0, timeout_s: float = REASSEMBLY_TIMEOUT_S) -> tuple[bytes, list[int], bool]:
        """Wait for a stream; returns ``(data, missing_fragments, complete)``.

        ``missing_fragments`` is empty and ``complete`` False if nothing arrived.
        """
        asm = Reassembler()
        sid = None
        self.sock.settimeout(first_timeout_s)
        while True:
            try:
                dgram, _ = self.sock.recvfrom(65535)
            except socket.timeout:
                break
            self.sock.settimeout(timeout_s)
            got = asm.add(dgram)
            parsed = parse_datagram(dgram)
            if parsed is not None and sid is None:
                sid = parsed[0]
            if got is not None and got == sid:
                data, _ = asm.result(sid)
                return data, [], True
        if sid is None:
            return b"", [], False
        data, missing = asm.result(sid)
        return data, missing, False

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
