"""Convert the 5000-digit MNIST sample shipped with mlxtend into IDX files.

Usage: python3 scripts/mnist_5k_to_idx.py SOURCE OUT_DIR

SOURCE is either the mlxtend wheel or the extracted mnist_5k.csv.gz. Each CSV
row holds 784 pixel values followed by the label. The split is stratified and
deterministic: per class, the first 400 rows in file order go to train and
the remaining 100 to test; both splits keep file order.
"""

import gzip
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
TRAIN_PER_CLASS = 400


def read_rows(source: Path):
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as z:
            raw = z.read(MEMBER)
    else:
        raw = source.read_bytes()
    text = gzip.decompress(raw).decode("ascii")
    rows = []
    for line in text.strip().splitlines():
        values = [int(v) for v in line.split(",")]
        if len(values) != 785:
            raise ValueError(f"expected 785 columns, got {len(values)}")
        rows.append((values[:-1], values[-1]))
    return rows


def write_idx(out: Path, stem: str, rows) -> None:
    n = len(rows)
    images = bytearray(struct.pack(">IIII", 2051, n, 28, 28))
    labels = bytearray(struct.pack(">II", 2049, n))
    for pixels, label in rows:
        images.extend(bytes(pixels))
        labels.append(label)
    (out / f"{stem}-images-idx3-ubyte").write_bytes(bytes(images))
    (out / f"{stem}-labels-idx1-ubyte").write_bytes(bytes(labels))


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    source, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    seen = {}
    train, test = [], []
    for pixels, label in read_rows(source):
        seen[label] = seen.get(label, 0) + 1
        (train if seen[label] <= TRAIN_PER_CLASS else test).append((pixels, label))
    write_idx(out, "train", train)
    write_idx(out, "test", test)
    print(f"wrote {len(train)} train and {len(test)} test digits to {out}")


if __name__ == "__main__":
    main()
