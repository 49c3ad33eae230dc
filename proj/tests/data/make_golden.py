#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes golden.fch1 with an encoder independent of the C++ writer."""
import struct
import sys

ROLES = {"support_pos": 0, "support_neg": 1, "query": 2, "candidate": 3, "text": 4}

E1, E2, E3, E4 = [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]
RECORDS = [
    ("g1.sp0", "support_pos", E1),
    ("g1.sp1", "support_pos", [0.6, 0.8, 0, 0]),
    ("g1.sn0", "support_neg", E3),
    ("g1.sn1", "support_neg", [0, 0, 0.8, 0.6]),
    ("g1.q", "query", [0.8, 0.6, 0, 0]),
    ("a photo that a person rides bicycle, it is true", "text", [0.6, 0, 0.8, 0]),
    ("a photo that a person rides bicycle, it is false", "text", [0, 0.6, 0, 0.8]),
    ("g1.pos/0", "candidate", E1),
    ("g1.pos/1", "candidate", E4),
    ("g1.neg/0", "candidate", E3),
    ("g1.neg/1", "candidate", E2),
    ("g2.q", "query", [0, 0, 0.6, 0.8]),
]


def encode(records, dim=4):
    out = bytearray(b"FCH1")
    out += struct.pack("<II", dim, len(records))
    for rid, role, vec in records:
        raw = rid.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw + struct.pack("<B", ROLES[role])
        out += struct.pack("<%df" % dim, *vec)
    return bytes(out)


if __name__ == "__main__":
    path = sys.argv[1] if len(sys.argv) > 1 else "golden.fch1"
    with open(path, "wb") as f:
        f.write(encode(RECORDS))
