"""Serial-line <-> CAN gateway.

ASCII line protocol on one side (t/T/r/R + uppercase hex + CR, in the slcan
family), a bus node on the other. The pump is a cooperative step function:
feed bytes in, drain bytes out between simulation steps.
"""

from __future__ import annotations

import enum
from typing import Optional

from .frame import (Frame, FrameId, FrameKind, IdOutOfRangeError,
                    MAX_EXTENDED_ID, MAX_STANDARD_ID)
from .node import BusOffError, Node

CR = b"\r"
BEL = b"\x07"
MAX_LINE_BYTES = 28  # including the CR terminator

_HEX = set("0123456789ABCDEF")


class ParseReason(enum.Enum):
    BAD_COMMAND = "BadCommand"
    BAD_HEX = "BadHex"
    BAD_DLC = "BadDlc"
    ID_OUT_OF_RANGE = "IdOutOfRange"
    LENGTH_MISMATCH = "LengthMismatch"
    OVERFLOW = "Overflow"


class SerialParseError(ValueError):
    def __init__(self, reason: ParseReason, message: str = ""):
        self.reason = reason
        super().__init__(message or reason.value)


def _hex_field(text: str, what: str) -> int:
    if not text or any(ch not in _HEX for ch in text):
        raise SerialParseError(ParseReason.BAD_HEX, f"bad hex in {what}: {text!r}")
    return int(text, 16)


def parse_serial_line(data: bytes) -> Frame:
    """One ASCII line to a frame.

    Grammar: ``t<iii><d><data>`` / ``T<iiiiiiii><d><data>`` for data frames,
    ``r<iii><d>`` / ``R<iiiiiiii><d>`` for remote frames; uppercase hex,
    optionally CR-terminated.
    """
    if len(data) > MAX_LINE_BYTES:
        raise SerialParseError(ParseReason.OVERFLOW, "line too long")
    if data.endswith(CR):
        data = data[:-1]
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise SerialParseError(ParseReason.BAD_COMMAND, "non-ASCII input") from None
    if not text:
        raise SerialParseError(ParseReason.BAD_COMMAND, "empty line")
    cmd, rest = text[0], text[1:]
    if cmd not in "tTrR":
        raise SerialParseError(ParseReason.BAD_COMMAND, f"unknown command {cmd!r}")
    extended = cmd in "TR"
    id_digits = 8 if extended else 3
    if len(rest) < id_digits + 1:
        raise SerialParseError(ParseReason.LENGTH_MISMATCH, "line too short")
    id_value = _hex_field(rest[:id_digits], "identifier")
    limit = MAX_EXTENDED_ID if extended else MAX_STANDARD_ID
    if id_value > limit:
        raise SerialParseError(ParseReason.ID_OUT_OF_RANGE,
                               f"identifier 0x{id_value:X} out of range")
    dlc_ch = rest[id_digits]
    if dlc_ch not in _HEX:
        raise SerialParseError(ParseReason.BAD_HEX, f"bad dlc digit {dlc_ch!r}")
    dlc = int(dlc_ch, 16)
    if dlc > 8:
        raise SerialParseError(ParseReason.BAD_DLC, f"dlc {dlc} exceeds 8")
    body = rest[id_digits + 1:]
    frame_id = FrameId(id_value, extended=extended)
    if cmd in "rR":
        if body:
            raise SerialParseError(ParseReason.LENGTH_MISMATCH,
                                   "remote frame carries no data")
        return Frame(frame_id, FrameKind.REMOTE, dlc, b"")
    if len(body) != 2 * dlc:
        raise SerialParseError(ParseReason.LENGTH_MISMATCH,
                               f"expected {2 * dlc} data digits, got {len(body)}")
    payload = bytes(_hex_field(body[i:i + 2], "data") for i in range(0, len(body), 2))
    return Frame(frame_id, FrameKind.DATA, dlc, payload)


def format_serial_line(frame: Frame) -> bytes:
    """Exact inverse of :func:`parse_serial_line`; uppercase hex, CR terminated."""
    if frame.id.extended:
        cmd = "T" if frame.kind is FrameKind.DATA else "R"
        ident = f"{frame.id.value:08X}"
    else:
        cmd = "t" if frame.kind is FrameKind.DATA else "r"
        ident = f"{frame.id.value:03X}"
    data = frame.payload.hex().upper() if frame.kind is FrameKind.DATA else ""
    return f"{cmd}{ident}{frame.dlc:X}{data}".encode("ascii") + CR


class GatewaySession:
    """One serial session bound to a bus node."""

    def __init__(self, node: Node):
        self.node = node
        self.rx_buffer = bytearray()
        self.frames_in = 0
        self.frames_out = 0
        self.parse_errors = 0
        self._rx_cursor = 0
        self._discarding = False  # overlong line: drop bytes until the next CR

    def pump(self, incoming: bytes = b"") -> bytes:
        """Feed serial bytes, submit complete lines to the node, and emit
        every frame the node has received since the last call.

        Responds CR per accepted line, BEL per rejected one; the session never
        aborts."""
        out = bytearray()
        for byte in incoming:
            if self._discarding:
                if byte == CR[0]:
                    self._discarding = False
                continue
            if byte == CR[0]:
                line = bytes(self.rx_buffer)
                self.rx_buffer.clear()
                try:
                    frame = parse_serial_line(line)
                    self.node.submit(frame)
                except (SerialParseError, BusOffError):
                    self.parse_errors += 1
                    out += BEL
                else:
                    self.frames_in += 1
                    out += CR
            else:
                self.rx_buffer.append(byte)
                if len(self.rx_buffer) >= MAX_LINE_BYTES:
                    self.rx_buffer.clear()
                    self.parse_errors += 1
                    self._discarding = True
                    out += BEL
        received = self.node.received
        while self._rx_cursor < len(received):
            out += format_serial_line(received[self._rx_cursor])
            self.frames_out += 1
            self._rx_cursor += 1
        return bytes(out)


def gateway_pump(session: GatewaySession, incoming: bytes = b"") -> bytes:
    return session.pump(incoming)
