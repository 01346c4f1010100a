#!/usr/bin/env python3
"""Regenerates the hand-assembled media fixtures in this directory.

The byte layouts are written out explicitly here rather than produced by the
crate under test, so the fixtures stay an independent reference. Pillow is
only used to produce a decodable baseline JPEG.
"""
import io
import os
import struct

from PIL import Image

HERE = os.path.dirname(os.path.abspath(__file__))


def write(name, data):
    with open(os.path.join(HERE, name), "wb") as f:
        f.write(data)


def clean_jpeg():
    img = Image.new("RGB", (16, 16), (200, 120, 40))
    buf = io.BytesIO()
    img.save(buf, "JPEG", quality=75)
    return buf.getvalue()


def app13_with_iptc(iim):
    block = b"8BIM" + struct.pack(">H", 0x0404) + b"\x00\x00"
    block += struct.pack(">I", len(iim)) + iim
    if len(iim) % 2:
        block += b"\x00"
    payload = b"Photoshop 3.0\x00" + block
    return b"\xff\xed" + struct.pack(">H", len(payload) + 2) + payload


def splice_after_app0(jpeg, segment):
    assert jpeg[:4] == b"\xff\xd8\xff\xe0"
    app0_len = struct.unpack(">H", jpeg[4:6])[0]
    cut = 4 + app0_len
    return jpeg[:cut] + segment + jpeg[cut:]


def iim(record, dataset, value):
    return bytes([0x1C, record, dataset]) + struct.pack(">H", len(value)) + value


def id3v23(frames, padding=0):
    body = b""
    for fid, payload in frames:
        body += fid + struct.pack(">I", len(payload)) + b"\x00\x00" + payload
    body += b"\x00" * padding
    n = len(body)
    size = bytes([(n >> 21) & 0x7F, (n >> 14) & 0x7F, (n >> 7) & 0x7F, n & 0x7F])
    return b"ID3\x03\x00\x00" + size + body


def mp4_box(kind, payload):
    return struct.pack(">I", 8 + len(payload)) + kind + payload


def main():
    clean = clean_jpeg()
    write("clean.jpg", clean)
    write("city.jpg", splice_after_app0(clean, app13_with_iptc(iim(2, 90, b"Test"))))

    # Two fake MPEG-1 Layer III frame headers followed by silence.
    audio = (b"\xff\xfb\x90\x64" + b"\x00" * 413) * 2
    write("tit2.mp3", id3v23([(b"TIT2", b"\x00Hi")]) + audio)
    write("clean.mp3", audio)

    ftyp = mp4_box(b"ftyp", b"isom" + struct.pack(">I", 0x200) + b"isomiso2mp41")
    mvhd = mp4_box(
        b"mvhd",
        b"\x00\x00\x00\x00"
        + struct.pack(">IIII", 0, 0, 1000, 0)
        + struct.pack(">IH", 0x00010000, 0x0100)
        + b"\x00" * 10
        + struct.pack(">9I", 0x10000, 0, 0, 0, 0x10000, 0, 0, 0, 0x40000000)
        + b"\x00" * 24
        + struct.pack(">I", 2),
    )
    udta = mp4_box(b"udta", b"")
    moov = mp4_box(b"moov", mvhd + udta)
    mdat = mp4_box(b"mdat", b"\x00\x11\x22\x33")
    write("tiny.mp4", ftyp + moov + mdat)


if __name__ == "__main__":
    main()
