#!/usr/bin/env python3
"""Prints the text metadata of a media file as JSON, using Pillow (IPTC) and
mutagen (ID3, MP4). Used by the test suite as an independent reader."""
import json
import sys


def jpeg(path):
    from PIL import Image, IptcImagePlugin

    with Image.open(path) as im:
        info = IptcImagePlugin.getiptcinfo(im) or {}
    out = {}
    for (record, dataset), value in info.items():
        if isinstance(value, list):
            value = value[0]
        out["iptc:%d:%d" % (record, dataset)] = value.decode("utf-8")
    return out


def mp3(path):
    from mutagen.id3 import ID3

    tag = ID3(path)
    out = {}
    for frame in tag.values():
        key = frame.FrameID
        if key == "COMM":
            out["id3:COMM"] = frame.text[0]
        elif key.startswith("T"):
            out["id3:" + key] = frame.text[0]
    return out


def mp4(path):
    from mutagen.mp4 import MP4

    tag = MP4(path).tags or {}
    return {"mp4:" + k: v[0] for k, v in tag.items() if isinstance(v[0], str)}


def main():
    kind, path = sys.argv[1], sys.argv[2]
    print(json.dumps({"jpg": jpeg, "mp3": mp3, "mp4": mp4}[kind](path), sort_keys=True))


if __name__ == "__main__":
    main()
