"""UDP control protocol between the BS-side controller and the surface.

Frame layout (big-endian)::

    magic 'RD' | version 0x01 | msg_type | seq u16 | payload_len u16 | payload | crc u16

The CRC is CRC-16/CCITT-FALSE over everything before it.
"""
from __future__ import annotations

import binascii
import enum
import logging
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rdars_model import NUM_ELEMENTS, RdarsConfiguration

log = logging.getLogger(__name__)

MAGIC = b"RD"
VERSION = 0x01
DEFAULT_PORT = 47474
HEADER = struct.Struct(">2sBBHH")
CRC = struct.Struct(">H")
MIN_FRAME = HEADER.size + CRC.size
MAX_FRAME = 128
SEQ_MOD = 1 << 16
SEQ_WINDOW = 1 << 15


class MsgType(enum.IntEnum):
    PHASE_CONFIG = 0x01
    MODE_MASK = 0x02
    ACK = 0x03
    NACK = 0x04


class Status(enum.IntEnum):
    OK = 0x00
    MALFORMED = 0x01
    STALE = 0x02


PAYLOAD_LEN = {MsgType.PHASE_CONFIG: 64, MsgType.MODE_MASK: 32, MsgType.ACK: 3, MsgType.NACK: 3}


class FrameError(ValueError):
    pass


class BadMagic(FrameError):
    pass


class BadVersion(FrameError):
    pass


class LengthMismatch(FrameError):
    pass


class BadCrc(FrameError):
    pass


class UnknownMessageType(FrameError):
    pass


class LinkTimeout(TimeoutError):
    pass


class NackReceived(RuntimeError):
    def __init__(self, seq: int, status: int):
        super().__init__(f"device rejected seq {seq} with status 0x{status:02x}")
        self.seq = seq
        self.status = status


def crc16_ccitt_false(data: bytes) -> int:
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class ControlFrame:
    msg_type: MsgType
    seq: int
    payload: bytes = b""

    def __post_init__(self):
        object.__setattr__(self, "msg_type", MsgType(self.msg_type))
        object.__setattr__(self, "payload", bytes(self.payload))
        if not 0 <= self.seq < SEQ_MOD:
            raise ValueError("seq must fit in 16 bits")
        if len(self.payload) != PAYLOAD_LEN[self.msg_type]:
            raise ValueError(f"{self.msg_type.name} payload must be {PAYLOAD_LEN[self.msg_type]} bytes")

    @property
    def echoed(self) -> tuple[int, int]:
        """(seq, status) carried by an ACK/NACK payload."""
        seq, status = struct.unpack(">HB", self.payload)
        return seq, status


def encode_frame(frame: ControlFrame) -> bytes:
    body = HEADER.pack(MAGIC, VERSION, frame.msg_type, frame.seq, len(frame.payload)) + frame.payload
    return body + CRC.pack(crc16_ccitt_false(body))


def _declared_len(msg_type: int, plen: int) -> Optional[int]:
    """Frame size announced by a self-consistent header, else None."""
    try:
        kind = MsgType(msg_type)
    except ValueError:
        return None
    return MIN_FRAME + plen if plen == PAYLOAD_LEN[kind] else None


def decode_frame(data: bytes) -> ControlFrame:
    """Parse and verify one datagram.

    A header whose type and payload_len agree but whose datagram has a
    different size is a truncated or padded frame (LengthMismatch). Anything
    else is checked against the CRC first, so single-bit damage anywhere in
    the frame reports as BadCrc; header checks then catch well-formed frames
    from a foreign or newer protocol.
    """
    data = bytes(data)
    if len(data) < MIN_FRAME:
        raise LengthMismatch(f"datagram of {len(data)} bytes is shorter than a frame")
    magic, version, msg_type, seq, plen = HEADER.unpack_from(data)
    declared = _declared_len(msg_type, plen)
    if declared is not None and declared != len(data):
        raise LengthMismatch(f"header announces {declared} bytes, datagram has {len(data)}")
    (crc,) = CRC.unpack_from(data, len(data) - CRC.size)
    if crc != crc16_ccitt_false(data[:-CRC.size]):
        raise BadCrc(f"crc mismatch in frame seq {seq}")
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    if len(data) != MIN_FRAME + plen:
        raise LengthMismatch(f"payload_len {plen} disagrees with datagram of {len(data)} bytes")
    try:
        kind = MsgType(msg_type)
    except ValueError:
        raise UnknownMessageType(f"unknown msg_type 0x{msg_type:02x}") from None
    if plen != PAYLOAD_LEN[kind]:
        raise LengthMismatch(f"{kind.name} requires {PAYLOAD_LEN[kind]} payload bytes, got {plen}")
    return ControlFrame(kind, seq, data[HEADER.size:HEADER.size + plen])


def recoverable_seq(data: bytes) -> Optional[int]:
    """Sequence number of a damaged frame if its header is still recognisable."""
    if len(data) >= HEADER.size and data[:2] == MAGIC and data[2] == VERSION:
        return struct.unpack_from(">H", data, 4)[0]
    return None


def reply_frame(kind: MsgType, seq: int, status: int) -> ControlFrame:
    return ControlFrame(kind, seq, struct.pack(">HB", seq, status))


# -- payload codecs ---------------------------------------------------------

def encode_phase_payload(config: RdarsConfiguration) -> bytes:
    """Pack 256 two-bit codes, four per byte, element n at bits 2*(n % 4)."""
    if config.size != NUM_ELEMENTS:
        raise ValueError(f"configuration must have {NUM_ELEMENTS} elements")
    c = config.codes.reshape(-1, 4).astype(np.uint8)
    packed = c[:, 0] | (c[:, 1] << 2) | (c[:, 2] << 4) | (c[:, 3] << 6)
    return packed.astype(np.uint8).tobytes()


def unpack_phase_codes(data: bytes) -> np.ndarray:
    if len(data) != NUM_ELEMENTS // 4:
        raise FrameError(f"phase payload must be 64 bytes, got {len(data)}")
    b = np.frombuffer(bytes(data), dtype=np.uint8)
    return np.stack([(b >> s) & 0b11 for s in (0, 2, 4, 6)], axis=1).reshape(-1)


def decode_phase_payload(data: bytes, connected_mask=frozenset()) -> RdarsConfiguration:
    return RdarsConfiguration(unpack_phase_codes(data), connected_mask)


def encode_mode_mask(connected) -> bytes:
    """256-bit bitmap, element n at bit n % 8 of byte n // 8."""
    bits = np.zeros(NUM_ELEMENTS, dtype=np.uint8)
    idx = list(connected)
    if any(not 0 <= i < NUM_ELEMENTS for i in idx):
        raise ValueError("connected index out of range")
    bits[idx] = 1
    return np.packbits(bits, bitorder="little").tobytes()


def decode_mode_mask(data: bytes) -> frozenset[int]:
    if len(data) != NUM_ELEMENTS // 8:
        raise FrameError(f"mode mask must be 32 bytes, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8), bitorder="little")
    return frozenset(int(i) for i in np.flatnonzero(bits))


def phase_config_frame(config: RdarsConfiguration, seq: int) -> ControlFrame:
    return ControlFrame(MsgType.PHASE_CONFIG, seq, encode_phase_payload(config))


def mode_mask_frame(connected, seq: int) -> ControlFrame:
    return ControlFrame(MsgType.MODE_MASK, seq, encode_mode_mask(connected))


def seq_newer(seq: int, last: int) -> bool:
    """True if ``seq`` follows ``last`` within half the 16-bit sequence space."""
    return 0 < (seq - last) % SEQ_MOD < SEQ_WINDOW


# -- device side ------------------------------------------------------------

@dataclass
class DeviceState:
    current: RdarsConfiguration = field(default_factory=lambda: RdarsConfiguration.uniform(0))
    last_seq_applied: int = 0


class RdarsDevice:
    """Protocol state machine of the surface controller, transport-free.

    Phase codes are kept for every element, including connected ones, so a
    MODE_MASK never disturbs the codes of elements left in reflection mode.
    """

    def __init__(self, initial: Optional[DeviceState] = None):
        initial = initial or DeviceState()
        self._lock = threading.Lock()
        self._codes = initial.current.codes.copy()
        self._mask = initial.current.connected_set
        self._last = initial.last_seq_applied
        self._current = initial.current

    @property
    def state(self) -> DeviceState:
        with self._lock:
            return DeviceState(self._current, self._last)

    def handle(self, data: bytes) -> Optional[bytes]:
        """Process one datagram; returns the reply datagram or None."""
        try:
            frame = decode_frame(data)
        except FrameError as exc:
            seq = recoverable_seq(data)
            log.debug("malformed frame (%s), seq=%s", exc, seq)
            if seq is None:
                return None
            return encode_frame(reply_frame(MsgType.NACK, seq, Status.MALFORMED))
        if frame.msg_type not in (MsgType.PHASE_CONFIG, MsgType.MODE_MASK):
            return None
        with self._lock:
            if not seq_newer(frame.seq, self._last):
                return encode_frame(reply_frame(MsgType.NACK, frame.seq, Status.STALE))
            if frame.msg_type is MsgType.PHASE_CONFIG:
                codes = unpack_phase_codes(frame.payload)
                mask = self._mask
            else:
                codes = self._codes
                mask = decode_mode_mask(frame.payload)
            self._codes, self._mask = codes, mask
            self._current = RdarsConfiguration(codes.copy(), mask)
            self._last = frame.seq
        return encode_frame(reply_frame(MsgType.ACK, frame.seq, Status.OK))


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        data, sock = self.request
        srv: DeviceServer = self.server  # type: ignore[assignment]
        if srv.drop(srv.drop_rx):
            return
        reply = srv.device.handle(data)
        if reply is not None and not srv.drop(srv.drop_tx):
            sock.sendto(reply, self.client_address)


class DeviceServer(socketserver.UDPServer):
    """Emulated surface controller on a UDP socket.

    ``drop_rx`` / ``drop_tx`` inject independent datagram loss on the
    request and reply directions. Frames are handled one at a time.
    """

    allow_reuse_address = True

    def __init__(self, bind=("127.0.0.1", DEFAULT_PORT), initial: Optional[DeviceState] = None,
                 drop_rx: float = 0.0, drop_tx: float = 0.0, seed: int = 0):
        super().__init__(bind, _Handler)
        self.device = RdarsDevice(initial)
        self.drop_rx = drop_rx
        self.drop_tx = drop_tx
        self._rng = np.random.default_rng(seed)
        self._thread: Optional[threading.Thread] = None

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[:2]

    @property
    def state(self) -> DeviceState:
        return self.device.state

    def drop(self, p: float) -> bool:
        return p > 0 and self._rng.random() < p

    def start(self) -> "DeviceServer":
        self._thread = threading.Thread(target=self.serve_forever, kwargs={"poll_interval": 0.05},
                                        daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


# -- controller side --------------------------------------------------------

@dataclass(frozen=True)
class AckOutcome:
    seq: int
    attempts: int
    duplicate: bool = False  # acknowledged via a stale-NACK to a retransmission


def send_frame(sock: socket.socket, endpoint, frame: ControlFrame, timeout: float,
               retries: int) -> AckOutcome:
    """Send ``frame`` and wait for the reply echoing its seq, retransmitting as needed."""
    if not timeout > 0:
        raise ValueError("timeout must be positive")
    datagram = encode_frame(frame)
    sock.settimeout(timeout)
    for attempt in range(1, retries + 2):
        sock.sendto(datagram, endpoint)
        while True:
            try:
                data, _ = sock.recvfrom(MAX_FRAME)
            except socket.timeout:
                break
            except OSError as exc:  # e.g. ICMP port unreachable on loopback
                log.debug("recv failed: %s", exc)
                break
            try:
                reply = decode_frame(data)
            except FrameError:
                continue
            if reply.msg_type not in (MsgType.ACK, MsgType.NACK):
                continue
            seq, status = reply.echoed
            if seq != frame.seq:
                continue  # late reply to an earlier frame
            if reply.msg_type is MsgType.ACK:
                return AckOutcome(seq, attempt)
            if status == Status.STALE and attempt > 1:
                # an earlier copy of this very frame was applied; only its ACK got lost
                return AckOutcome(seq, attempt, duplicate=True)
            raise NackReceived(seq, status)
    raise LinkTimeout(f"no reply for seq {frame.seq} after {retries + 1} attempts")


def send_config(endpoint, config: RdarsConfiguration, seq: int, timeout: float = 0.2,
                retries: int = 5) -> AckOutcome:
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        return send_frame(sock, endpoint, phase_config_frame(config, seq), timeout, retries)


class ControlClient:
    """Controller session: one socket, an incrementing seq, mask tracking.

    ``apply`` pushes a full configuration, sending a MODE_MASK first whenever
    the connected set differs from the one last acknowledged.
    """

    def __init__(self, endpoint, timeout: float = 0.2, retries: int = 5, start_seq: int = 1):
        self.endpoint = tuple(endpoint)
        self.timeout = timeout
        self.retries = retries
        self._seq = start_seq % SEQ_MOD
        self._mask: Optional[frozenset] = None
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def _next(self) -> int:
        seq = self._seq
        self._seq = (self._seq + 1) % SEQ_MOD
        return seq

    def send(self, frame_for_seq) -> AckOutcome:
        return send_frame(self._sock, self.endpoint, frame_for_seq(self._next()),
                          self.timeout, self.retries)

    def apply(self, config: RdarsConfiguration) -> None:
        if config.connected_set != self._mask:
            self.send(lambda s: mode_mask_frame(config.connected_set, s))
            self._mask = config.connected_set
        self.send(lambda s: phase_config_frame(config, s))

    def close(self):
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
