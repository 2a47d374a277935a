#!/usr/bin/env python3
"""Build a paired umc bundle from the UCI multiple-features (mfeat) digits.

The source is either the raw UCI directory (whitespace-separated mfeat-* files,
200 consecutive rows per digit) or an mvlearn wheel, which ships the same data
as CSV with a header row and the digit in the last column.

    prepare_mfeat.py SOURCE OUT [--views fou,fac]
    umc unpair --in OUT --seed 1 --out OUT_unpaired
"""

import argparse
import json
import pathlib
import zipfile

FEATURES = ("fou", "fac", "kar", "pix", "zer", "mor")


def from_wheel(wheel, name):
    with zipfile.ZipFile(wheel) as z:
        member = f"mvlearn/datasets/UCImultifeature/mfeat-{name}.csv"
        lines = z.read(member).decode().splitlines()[1:]
    rows = [line.split(",") for line in lines if line.strip()]
    return [r[:-1] for r in rows], [int(float(r[-1])) for r in rows]


def from_uci(directory, name):
    lines = (pathlib.Path(directory) / f"mfeat-{name}").read_text().splitlines()
    rows = [line.split() for line in lines if line.strip()]
    return rows, [i // 200 for i in range(len(rows))]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", help="mvlearn wheel or UCI mfeat directory")
    ap.add_argument("out")
    ap.add_argument("--views", default="fou,fac", help=f"comma list from {','.join(FEATURES)}")
    args = ap.parse_args()

    names = args.views.split(",")
    for n in names:
        if n not in FEATURES:
            ap.error(f"unknown feature set {n!r}")
    read = from_wheel if str(args.source).endswith(".whl") else from_uci

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    views, labels0 = [], None
    for i, name in enumerate(names, start=1):
        rows, labels = read(args.source, name)
        if labels0 is None:
            labels0 = labels
        elif labels != labels0:
            raise SystemExit(f"mfeat-{name}: rows are not aligned with mfeat-{names[0]}")
        (out / f"view{i}.csv").write_text("".join(",".join(r) + "\n" for r in rows))
        (out / f"labels{i}.csv").write_text("".join(f"{l}\n" for l in labels))
        views.append({"file": f"view{i}.csv", "labels_file": f"labels{i}.csv", "n": len(rows), "d": len(rows[0])})

    manifest = {"name": "digit", "V": len(names), "K": len(set(labels0)), "views": views}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    dims = ", ".join(f"{n}({v['d']})" for n, v in zip(names, views))
    print(f"{out}: {len(labels0)} samples, views {dims}")


if __name__ == "__main__":
    main()
