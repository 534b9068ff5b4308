"""Writes golden3.fseb and golden3_corrupt.fseb without using the Rust crate."""
import json
import struct

header = json.dumps(
    {"dimension": 4, "backbone": "vit-l-14/block12-cls", "layer": 12, "normalized": True, "count": 3},
    separators=(",", ":"),
).encode()

records = [
    ("img-000", "real", 0, [1.0, 0.0, 0.0, 0.0]),
    ("img-001", "biggan", 1, [0.0, 0.6, 0.8, 0.0]),
    ("img-002", "midjourney", 1, [0.5, -0.5, 0.5, -0.5]),
]


def encode(label_override=None):
    out = bytearray(b"FSEB")
    out += struct.pack("<H", 1)
    out += struct.pack("<I", len(header))
    out += header
    for i, (rid, src, label, vec) in enumerate(records):
        for s in (rid, src):
            b = s.encode()
            out += struct.pack("<H", len(b)) + b
        if label_override and label_override[0] == i:
            label = label_override[1]
        out += bytes([label])
        out += struct.pack("<%df" % len(vec), *vec)
    return bytes(out)


with open("golden3.fseb", "wb") as f:
    f.write(encode())
# record 2's label byte set to an undefined value
with open("golden3_corrupt.fseb", "wb") as f:
    f.write(encode(label_override=(2, 7)))
