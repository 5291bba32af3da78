#!/usr/bin/env python3
"""Regenerate the shipped matrix-family files.

Each file is produced by the exact subdivision-automaton constructor and
re-validated on load; run from the repository root.  The plastic-number
family (x^3 - x - 1) is deliberately not shipped: its ~28k-dimensional
embedding makes a multi-megabyte file, and the tests that need it build it
on the fly instead.
"""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fracdim.pisot import construct_family, load_family, save_family  # noqa: E402

FAMILIES = [
    ("golden", (1, -1, -1)),
    ("tribonacci", (1, -1, -1, -1)),
    ("x3-x2-1", (1, -1, 0, -1)),
    ("x3-2x2+x-1", (1, -2, 1, -1)),
    ("x4-2x3+x-1", (1, -2, 0, 1, -1)),
    ("x4-x3-2x2+1", (1, -1, -2, 0, 1)),
]


def main() -> int:
    out_dir = pathlib.Path(__file__).resolve().parents[1] / \
        "src" / "fracdim" / "data" / "families"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, coeffs in FAMILIES:
        fam = construct_family(coeffs, experimental_ok=True)
        path = out_dir / f"{name}.txt"
        save_family(fam, str(path))
        reread = load_family(str(path))
        assert reread.k == fam.k and reread.d == fam.d
        assert reread.triples == fam.triples
        n_entries = sum(len(t) for t in fam.triples)
        print(f"{name}: k={fam.k} d={fam.d} entries={n_entries} "
              f"({path.stat().st_size} bytes)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
