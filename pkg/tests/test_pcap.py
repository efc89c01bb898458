import struct

import pytest

from iot_eclipse.pcap import (LINKTYPE_ETHERNET, LINKTYPE_IEEE802_11,
                              LINKTYPE_IEEE802_11_RADIOTAP, UnsupportedFormatError, build_pcap,
                              convert_pcap, convert_pcap_with_summary, parse_mac)
from iot_eclipse.trace import EmptyTraceError

TARGET = "AA:BB:CC:DD:EE:FF"
OTHER = "11:22:33:44:55:66"


def eth(dst, length):
    frame = parse_mac(dst) + bytes(6) + b"\x08\x00"
    return frame + bytes(max(0, length - len(frame)))


def dot11(receiver, length):
    frame = b"\x88\x02" + b"\x00\x00" + parse_mac(receiver) + bytes(12)
    return frame + bytes(max(0, length - len(frame)))


def radiotap(inner, rt_len=18):
    header = struct.pack("<BBHI", 0, 0, rt_len, 0) + bytes(rt_len - 8)
    return header + inner


def test_filter_by_receiver():
    frames = [(1.0, eth(TARGET, 100)), (1.1, eth(OTHER, 200)), (1.2, eth(TARGET, 300)),
              (1.3, eth(OTHER, 400)), (1.5, eth(TARGET, 500))]
    tr = convert_pcap(build_pcap(frames), TARGET)
    assert len(tr) == 3
    assert tr.sizes.tolist() == [100, 300, 500]
    assert tr.timestamps.tolist() == pytest.approx([0.0, 0.2, 0.5])


def test_field_mapping_uses_orig_len():
    # snapped capture: 64 bytes stored, 1024 on the air
    frames = [(12.0, eth(TARGET, 64), 1024), (12.25, eth(TARGET, 64), 60)]
    tr = convert_pcap(build_pcap(frames), TARGET)
    assert tr.sizes.tolist() == [1024, 60]
    assert tr.timestamps[0] == 0.0


def test_no_matches():
    with pytest.raises(EmptyTraceError):
        convert_pcap(build_pcap([(0.0, eth(OTHER, 80))]), TARGET)


def test_big_endian():
    tr = convert_pcap(build_pcap([(3.0, eth(TARGET, 90)), (3.5, eth(TARGET, 91))],
                                 big_endian=True), TARGET)
    assert tr.sizes.tolist() == [90, 91]


def test_80211_receiver_address():
    frames = [(0.0, dot11(TARGET, 300)), (0.1, dot11(OTHER, 300)), (0.2, dot11(TARGET, 700))]
    tr = convert_pcap(build_pcap(frames, LINKTYPE_IEEE802_11), TARGET)
    assert tr.sizes.tolist() == [300, 700]


def test_radiotap_preamble_is_skipped():
    frames = [(0.0, radiotap(dot11(TARGET, 400))), (0.1, radiotap(dot11(OTHER, 400))),
              (0.3, radiotap(dot11(TARGET, 1000), rt_len=26))]
    tr = convert_pcap(build_pcap(frames, LINKTYPE_IEEE802_11_RADIOTAP), TARGET)
    assert tr.sizes.tolist() == [400, 1000]


def test_truncated_frames_counted():
    frames = [(0.0, eth(TARGET, 100)), (0.1, b"\xaa\xbb"), (0.2, eth(TARGET, 120))]
    tr, summary = convert_pcap_with_summary(build_pcap(frames), TARGET)
    assert len(tr) == 2
    assert summary.truncated == 1
    assert summary.frames == 3 and summary.kept == 2


def test_truncated_file_tail():
    data = build_pcap([(0.0, eth(TARGET, 100)), (0.1, eth(TARGET, 100))])
    tr, summary = convert_pcap_with_summary(data[:-10], TARGET)
    assert len(tr) == 1 and summary.truncated == 1


def test_unsupported_linktype():
    with pytest.raises(UnsupportedFormatError):
        convert_pcap(build_pcap([(0.0, eth(TARGET, 100))], linktype=113), TARGET)


def test_not_a_pcap():
    with pytest.raises(UnsupportedFormatError):
        convert_pcap(b"\x0a\x0d\x0d\x0a" + bytes(40), TARGET)


def test_parse_mac():
    assert parse_mac("aa-bb-cc-dd-ee-ff") == bytes.fromhex("aabbccddeeff")
    with pytest.raises(ValueError):
        parse_mac("aa:bb")


def test_ethernet_linktype_constant():
    assert LINKTYPE_ETHERNET == 1
