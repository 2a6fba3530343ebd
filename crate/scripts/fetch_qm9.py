#!/usr/bin/env python3
"""Download QM9 and write a seeded 600-molecule subset for molgen.

The output CSV has columns ``smiles`` and ``E_HOMO [Ha]`` and is what the
acceptance target and the README walkthrough read from ``data/qm9_600.csv``.
Molecules with stereo marks, charges or multiple fragments are skipped so
every row parses with the toolkit's SMILES reader.

    python3 scripts/fetch_qm9.py                       # download and sample
    python3 scripts/fetch_qm9.py --input qm9.csv       # use a local copy
"""

import argparse
import csv
import io
import random
import sys
import urllib.request
from pathlib import Path

DEFAULT_URL = "https://deepchemdata.s3-us-west-1.amazonaws.com/datasets/qm9.csv"
SKIP_CHARS = set("@/\\.+-")


def read_rows(text):
    reader = csv.DictReader(io.StringIO(text))
    fields = {f.lower(): f for f in reader.fieldnames or []}
    smiles_key = fields.get("smiles")
    homo_key = fields.get("homo")
    if smiles_key is None or homo_key is None:
        sys.exit(f"expected 'smiles' and 'homo' columns, found {reader.fieldnames}")
    for row in reader:
        smiles = row[smiles_key].strip()
        if not smiles or SKIP_CHARS & set(smiles):
            continue
        try:
            homo = float(row[homo_key])
        except ValueError:
            continue
        yield smiles, homo


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--url", default=DEFAULT_URL)
    ap.add_argument("--input", type=Path, help="local QM9 CSV instead of downloading")
    ap.add_argument("--n", type=int, default=600)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "qm9_600.csv")
    args = ap.parse_args()

    if args.input:
        text = args.input.read_text()
    else:
        print(f"downloading {args.url}", file=sys.stderr)
        try:
            with urllib.request.urlopen(args.url, timeout=120) as r:
                text = r.read().decode()
        except OSError as e:
            sys.exit(f"download failed: {e}\nfetch the file another way and pass --input")

    rows = list(read_rows(text))
    if len(rows) < args.n:
        sys.exit(f"only {len(rows)} usable rows, need {args.n}")
    sample = random.Random(args.seed).sample(rows, args.n)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["smiles", "E_HOMO [Ha]"])
        w.writerows(sample)
    print(f"wrote {len(sample)} molecules to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
