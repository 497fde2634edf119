"""Builds data/mnist3k-*: the first 300 images of each digit from the 5000-image
MNIST sample shipped in the mlxtend wheel, written as an IDX pair.

usage: python3 tools/make_mnist3k.py [WHEEL]   (downloads mlxtend 0.24.0 when WHEEL is omitted)
"""

import glob
import gzip
import pathlib
import struct
import subprocess
import sys
import tempfile
import zipfile

PER_CLASS = 300
OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def wheel_path():
    if len(sys.argv) > 1:
        return sys.argv[1]
    tmp = tempfile.mkdtemp()
    subprocess.run([sys.executable, "-m", "pip", "download", "mlxtend==0.24.0", "--no-deps", "-d", tmp], check=True)
    return glob.glob(tmp + "/mlxtend*.whl")[0]


def main():
    raw = zipfile.ZipFile(wheel_path()).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = [list(map(int, map(float, line.split(",")))) for line in gzip.decompress(raw).decode().splitlines()]
    taken = {d: 0 for d in range(10)}
    images, labels = [], []
    for row in rows:
        digit = row[-1]
        if taken[digit] < PER_CLASS:
            taken[digit] += 1
            images.append(bytes(row[:-1]))
            labels.append(digit)
    OUT.mkdir(exist_ok=True)
    with open(OUT / "mnist3k-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.writelines(images)
    with open(OUT / "mnist3k-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


if __name__ == "__main__":
    main()
