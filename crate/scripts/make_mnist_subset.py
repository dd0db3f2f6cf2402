"""Build the bundled 1000/1000 MNIST subset in IDX format.

Source: the `mnist` npm package (MIT), which ships 10,000 MNIST digits as
JSON arrays of 784 pixel intensities in [0, 1] rounded to three decimals.

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 scripts/make_mnist_subset.py package/src/digits data/mnist-subset
"""
import json
import struct
import sys
from pathlib import Path

PER_DIGIT = 100


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main(src, dst):
    src, dst = Path(src), Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        n = len(data) // 784
        assert n >= 2 * PER_DIGIT
        samples = [
            [min(255, max(0, round(v * 255))) for v in data[i * 784:(i + 1) * 784]]
            for i in range(2 * PER_DIGIT)
        ]
        train += [(s, digit) for s in samples[:PER_DIGIT]]
        test += [(s, digit) for s in samples[PER_DIGIT:]]
    # interleave digits so that contiguous prefixes stay class-balanced
    def interleave(rows):
        return [rows[d * PER_DIGIT + i] for i in range(PER_DIGIT) for d in range(10)]
    for name, rows in (("train", interleave(train)), ("test", interleave(test))):
        write_images(dst / f"{name}-images.idx", [r[0] for r in rows])
        write_labels(dst / f"{name}-labels.idx", [r[1] for r in rows])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
