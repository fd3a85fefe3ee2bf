#!/usr/bin/env python3
"""Convert ATIS/SNIPS in the seq.in / seq.out / label layout to the corpus TSV format.

Input layout (one directory per split):
    <src>/train/{seq.in,seq.out,label}
    <src>/valid/{seq.in,seq.out,label}   (or dev/)
    <src>/test/{seq.in,seq.out,label}

Output: <dst>/train.tsv, <dst>/dev.tsv, <dst>/test.tsv
"""

import argparse
import pathlib
import sys

SPLITS = {"train": ("train",), "dev": ("valid", "dev"), "test": ("test",)}


def read_lines(path):
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def convert_split(src_dir, dst_file):
    tokens = read_lines(src_dir / "seq.in")
    tags = read_lines(src_dir / "seq.out")
    labels = read_lines(src_dir / "label")
    if not (len(tokens) == len(tags) == len(labels)):
        raise ValueError(f"{src_dir}: seq.in/seq.out/label line counts differ")
    written = 0
    with open(dst_file, "w", encoding="utf-8") as out:
        for n, (words, bio, intent) in enumerate(zip(tokens, tags, labels), start=1):
            w, t = words.split(), bio.split()
            if not w:
                continue
            if len(w) != len(t):
                raise ValueError(f"{src_dir}: line {n}: {len(w)} tokens but {len(t)} tags")
            out.write(f"# intent: {intent.strip()}\n")
            for word, tag in zip(w, t):
                out.write(f"{word}\t{tag}\n")
            out.write("\n")
            written += 1
    return written


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=pathlib.Path)
    ap.add_argument("dst", type=pathlib.Path)
    args = ap.parse_args(argv)
    args.dst.mkdir(parents=True, exist_ok=True)
    for name, candidates in SPLITS.items():
        src = next((args.src / c for c in candidates if (args.src / c).is_dir()), None)
        if src is None:
            print(f"missing split directory for {name} under {args.src}", file=sys.stderr)
            return 2
        count = convert_split(src, args.dst / f"{name}.tsv")
        print(f"{name}: {count} utterances")
    return 0


if __name__ == "__main__":
    sys.exit(main())
