#!/usr/bin/env python3
"""Regenerate the data fixtures under data/.

  data/mnist/train-images-idx3-ubyte, train-labels-idx1-ubyte
      IDX files built from the 5000-digit MNIST training subset that ships
      inside the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz).
  data/letters/<A..Z>.pgm
      26 capital letters rendered in a serif font at 28x28, binary PGM (P5).

Usage: make_fixtures.py --mnist-csv path/to/mnist_5k.csv.gz [--font path.ttf]
"""
import argparse
import gzip
import os
import string
import struct

from PIL import Image, ImageDraw, ImageFont

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")


def write_mnist(csv_path):
    rows = []
    with gzip.open(csv_path, "rt") as f:
        for line in f:
            vals = [int(v) for v in line.strip().split(",")]
            # mlxtend stores the label in the last column
            rows.append((vals[-1], bytes(vals[:-1])))
    out = os.path.join(ROOT, "mnist")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "train-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for _, px in rows:
            assert len(px) == 784
            f.write(px)
    with open(os.path.join(out, "train-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(label for label, _ in rows))
    print(f"wrote {len(rows)} digits")


def write_letters(font_path, side=28, size=22):
    out = os.path.join(ROOT, "letters")
    os.makedirs(out, exist_ok=True)
    font = ImageFont.truetype(font_path, size)
    for ch in string.ascii_uppercase:
        img = Image.new("L", (side, side), 0)
        draw = ImageDraw.Draw(img)
        left, top, right, bottom = draw.textbbox((0, 0), ch, font=font)
        x = (side - (right - left)) // 2 - left
        y = (side - (bottom - top)) // 2 - top
        draw.text((x, y), ch, fill=255, font=font)
        with open(os.path.join(out, f"{ch}.pgm"), "wb") as f:
            f.write(f"P5\n{side} {side}\n255\n".encode("ascii"))
            f.write(img.tobytes())
    print("wrote 26 letters")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--mnist-csv", required=True)
    ap.add_argument("--font", default="/usr/share/fonts/truetype/dejavu/DejaVuSerif.ttf")
    args = ap.parse_args()
    write_mnist(args.mnist_csv)
    write_letters(args.font)
