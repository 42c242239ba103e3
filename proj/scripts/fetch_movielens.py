#!/usr/bin/env python3
"""Builds data/ml-100k-pos4.tsv: MovieLens-100K ratings >= 4 as an edge list.

GroupLens is the canonical source. When only a PyPI mirror is reachable the
ratings are taken from the copy bundled in the RecBole wheel
(recbole/dataset_example/ml-100k/ml-100k.inter).
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
RECBOLE_MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def ratings_from_grouplens():
    with urllib.request.urlopen(GROUPLENS_URL, timeout=30) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    for line in archive.read("ml-100k/u.data").decode().splitlines():
        user, item, rating, _ = line.split("\t")
        yield user, item, float(rating)


def ratings_from_recbole():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
             "recbole==1.2.1", "-d", tmp],
            check=True)
        wheel = next(pathlib.Path(tmp).glob("recbole-*.whl"))
        text = zipfile.ZipFile(wheel).read(RECBOLE_MEMBER).decode()
    lines = text.splitlines()
    for line in lines[1:]:  # header: user_id:token item_id:token rating:float timestamp:float
        user, item, rating, _ = line.split("\t")
        yield user, item, float(rating)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent
                                             / "data" / "ml-100k-pos4.tsv"))
    parser.add_argument("--min-rating", type=float, default=4.0)
    args = parser.parse_args()

    try:
        ratings = list(ratings_from_grouplens())
        source = "grouplens"
    except Exception as exc:  # noqa: BLE001 - any network failure falls back
        print(f"grouplens unavailable ({exc}); using the RecBole wheel copy", file=sys.stderr)
        ratings = list(ratings_from_recbole())
        source = "recbole wheel"

    if len(ratings) != 100000:
        sys.exit(f"expected 100000 ratings, found {len(ratings)}")

    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    kept = [(u, i) for u, i, r in ratings if r >= args.min_rating]
    with out.open("w") as fh:
        fh.write(f"# MovieLens-100K ratings >= {args.min_rating:g} ({source})\n")
        for u, i in kept:
            fh.write(f"{u}\t{i}\n")
    users = len({u for u, _ in kept})
    items = len({i for _, i in kept})
    print(f"wrote {out}: {users} users, {items} items, {len(kept)} interactions")


if __name__ == "__main__":
    main()
