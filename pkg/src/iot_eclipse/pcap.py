"""Classic pcap to trace conversion.

Only the receiver address (for filtering), the capture time and the frame
length are read from each record; everything else is dropped on the spot.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .trace import ClassLabel, EmptyTraceError, Trace, TraceError

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D

LINKTYPE_ETHERNET = 1
LINKTYPE_IEEE802_11 = 105
LINKTYPE_IEEE802_11_RADIOTAP = 127

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16


class UnsupportedFormatError(TraceError):
    pass


@dataclass
class PcapSummary:
    linktype: int
    frames: int = 0
    kept: int = 0
    truncated: int = 0

    @property
    def skipped(self) -> int:
        return self.frames - self.kept

    def __str__(self):
        return (f"{self.frames} frames read, {self.kept} kept, "
                f"{self.skipped} skipped ({self.truncated} truncated)")


def parse_mac(text) -> bytes:
    if isinstance(text, (bytes, bytearray)):
        if len(text) != 6:
            raise ValueError("MAC address must be 6 bytes")
        return bytes(text)
    parts = text.replace("-", ":").split(":")
    if len(parts) != 6:
        raise ValueError(f"invalid MAC address {text!r}")
    try:
        return bytes(int(p, 16) for p in parts)
    except ValueError:
        raise ValueError(f"invalid MAC address {text!r}") from None


def _read_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if hasattr(source, "read"):
        return source.read()
    with open(source, "rb") as fh:
        return fh.read()


def _receiver(frame: bytes, linktype: int) -> tuple[bytes, int] | None:
    """Return (receiver address, on-air length offset) or None if truncated."""
    if linktype == LINKTYPE_ETHERNET:
        return (frame[0:6], 0) if len(frame) >= 6 else None
    offset = 0
    if linktype == LINKTYPE_IEEE802_11_RADIOTAP:
        if len(frame) < 4:
            return None
        offset = struct.unpack_from("<H", frame, 2)[0]
    # 802.11 MAC header: frame control (2), duration (2), addr1 = receiver
    if len(frame) < offset + 10:
        return None
    return frame[offset + 4:offset + 10], offset


def convert_pcap_with_summary(source, receiver_mac, label: ClassLabel | None = None
                              ) -> tuple[Trace, PcapSummary]:
    data = _read_bytes(source)
    mac = parse_mac(receiver_mac)
    if len(data) < GLOBAL_HEADER_LEN:
        raise UnsupportedFormatError("file too short for a pcap global header")

    for endian in "<>":
        magic = struct.unpack_from(endian + "I", data, 0)[0]
        if magic in (MAGIC_USEC, MAGIC_NSEC):
            break
    else:
        raise UnsupportedFormatError(f"not a classic pcap file (magic {data[:4].hex()})")
    ts_scale = 1e-9 if magic == MAGIC_NSEC else 1e-6
    linktype = struct.unpack_from(endian + "I", data, 20)[0] & 0x0FFFFFFF
    if linktype not in (LINKTYPE_ETHERNET, LINKTYPE_IEEE802_11, LINKTYPE_IEEE802_11_RADIOTAP):
        raise UnsupportedFormatError(f"unsupported link-layer type {linktype}")

    summary = PcapSummary(linktype)
    record = struct.Struct(endian + "IIII")
    times, sizes = [], []
    pos = GLOBAL_HEADER_LEN
    while pos < len(data):
        if pos + RECORD_HEADER_LEN > len(data):
            summary.frames += 1
            summary.truncated += 1
            break
        ts_sec, ts_frac, incl_len, orig_len = record.unpack_from(data, pos)
        pos += RECORD_HEADER_LEN
        frame = data[pos:pos + incl_len]
        pos += incl_len
        summary.frames += 1
        if len(frame) < incl_len:
            summary.truncated += 1
            break
        hit = _receiver(frame, linktype)
        if hit is None:
            summary.truncated += 1
            continue
        addr, preamble = hit
        if addr != mac:
            continue
        length = orig_len - preamble
        if length < 1:
            summary.truncated += 1
            continue
        times.append(ts_sec + ts_frac * ts_scale)
        sizes.append(length)
        summary.kept += 1

    if not times:
        raise EmptyTraceError(f"no frames addressed to {mac.hex(':')} ({summary})")
    t = np.asarray(times)
    s = np.asarray(sizes, dtype=np.int64)
    order = np.argsort(t, kind="stable")
    t, s = t[order], s[order]
    return Trace(t - t[0], s, label), summary


def convert_pcap(source, receiver_mac, label: ClassLabel | None = None) -> Trace:
    """Keep frames whose receiver address is ``receiver_mac`` as (time, length) records.

    Handles Ethernet and 802.11 captures, with or without a radiotap
    preamble. For radiotap captures the preamble is not counted in the size.
    """
    return convert_pcap_with_summary(source, receiver_mac, label)[0]


def build_pcap(frames, linktype: int = LINKTYPE_ETHERNET, big_endian: bool = False) -> bytes:
    """Serialize ``(timestamp, frame_bytes[, orig_len])`` tuples as a classic pcap.

    Mostly useful for fixtures and round-trip checks.
    """
    e = ">" if big_endian else "<"
    out = [struct.pack(e + "IHHiIII", MAGIC_USEC, 2, 4, 0, 0, 65535, linktype)]
    for item in frames:
        ts, frame = item[0], bytes(item[1])
        orig_len = item[2] if len(item) > 2 else len(frame)
        sec = int(ts)
        usec = int(round((ts - sec) * 1e6))
        out.append(struct.pack(e + "IIII", sec, usec, len(frame), orig_len))
        out.append(frame)
    return b"".join(out)
