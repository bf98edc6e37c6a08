#!/usr/bin/env python3
"""Builds the 5k-image MNIST subset used by the experiment configs.

Reads the 5000-sample CSV that ships inside the mlxtend wheel (or a plain
copy of it), shuffles it with a fixed seed and writes gzipped IDX files:
2000 training and 3000 test images.
"""

import argparse
import gzip
import io
import random
import struct
import zipfile
from pathlib import Path

CSV_IN_WHEEL = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(source: Path):
    if source.suffix == ".whl":
        raw = zipfile.ZipFile(source).read(CSV_IN_WHEEL)
    else:
        raw = source.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    rows = []
    for line in io.StringIO(raw.decode()):
        line = line.strip()
        if line:
            values = [int(float(v)) for v in line.split(",")]
            rows.append((values[:-1], values[-1]))
    return rows


def write_idx(out: Path, prefix: str, rows):
    images = bytearray(struct.pack(">IIII", 0x803, len(rows), 28, 28))
    labels = bytearray(struct.pack(">II", 0x801, len(rows)))
    for pixels, label in rows:
        images.extend(bytes(pixels))
        labels.append(label)
    # mtime=0 keeps the archives byte-stable
    for name, payload in [(f"{prefix}-images-idx3-ubyte.gz", images), (f"{prefix}-labels-idx1-ubyte.gz", labels)]:
        with open(out / name, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0) as gz:
            gz.write(payload)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("source", type=Path, help="mlxtend wheel or mnist_5k.csv(.gz)")
    ap.add_argument("--out", type=Path, default=Path("data/mnist-5k"))
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = read_rows(args.source)
    if any(len(p) != 784 for p, _ in rows):
        raise SystemExit("expected 784 pixel columns plus a label")
    random.Random(args.seed).shuffle(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out, "train", rows[: args.train])
    write_idx(args.out, "test", rows[args.train :])
    print(f"wrote {args.train} training and {len(rows) - args.train} test images to {args.out}")


if __name__ == "__main__":
    main()
