"""Smoke test for the pplink extension module.

Build the library first:

    cargo build -p pplink-python --features extension-module --release

then run ``python3 python/smoke_test.py``. The script copies the built
shared library next to a temporary import path as ``pplink.so``.
"""

import csv
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module(tmp):
    candidates = [os.environ.get("PPLINK_LIB")] + [
        str(ROOT / "target" / profile / "libpplink.so") for profile in ("release", "debug")
    ]
    for c in candidates:
        if c and Path(c).exists():
            shutil.copy(c, Path(tmp) / "pplink.so")
            sys.path.insert(0, tmp)
            import pplink

            return pplink
    sys.exit("libpplink.so not found; build it with cargo first (see the docstring)")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        pplink = load_module(tmp)

        last, initials, canonical = pplink.normalize_name("Prof. Dr. Jörg Müller", "DE")
        assert (last, initials) == ("mueller", "j"), (last, initials)
        assert canonical == "mueller, j"

        assert pplink.parse_publication_number("EP1234567B1") == ("EP1234567", "B", 1)
        assert abs(pplink.delta_years("2000-01-01", "2001-01-01") - 366 / 365.25) < 1e-12
        assert pplink.cosine([1.0, 0.0], [0.0, 2.0]) == 0.0
        assert abs(pplink.cosine([1.0, 2.0], [2.0, 4.0]) - 1.0) < 1e-12
        assert pplink.normalize_doi("https://doi.org/10.1000/ABC") == "10.1000/abc"
        c = pplink.parse_citation('Smith J, Doe A. Insulin signalling in muscle tissue. J Biol Chem. 1999;12:1-9.')
        assert c["year_guess"] == 1999 and "smith" in [a.lower() for a in c["author_lastnames"]], c
        assert len(pplink.pair_id("EP1", "123")) == 16

        tsv = "D1\ten\tInsulin\ttrue\nD2\ten\tInsulin Resistance\ttrue\nD2\tde\tInsulinresistenz\tfalse\n"
        th = pplink.Thesaurus(tsv)
        assert len(th) == 2
        assert th.extract("Insulin resistance and insulin.") == ["Insulin", "Insulin Resistance"]
        assert th.extract("Die Insulinresistenz.", "de") == ["Insulin Resistance"]

        config = pplink.write_synthetic_corpus(Path(tmp) / "corpus", "standard", 42)
        pipe = pplink.Pipeline(config, Path(tmp) / "stages")
        assert pipe.stages()[0] == "ingest"
        counts = pipe.run_all()
        assert counts["rank"]["final_pairs"] > 0, counts
        finals = pipe.final_pairs()
        assert len(finals) == counts["rank"]["final_pairs"]
        assert all(0.0 <= f["boosted_cosine"] <= 1.0 for f in finals if f["boosted_cosine"] is not None)
        with open(pipe.path("report.csv")) as fh:
            assert next(csv.reader(fh))[0] == "n_common_names"

        try:
            pplink.Pipeline(config, Path(tmp) / "empty").run("rank")
        except OSError as e:
            assert "missing input" in str(e)
        else:
            raise AssertionError("expected a missing-input error")

        print(f"pplink smoke test ok: {len(finals)} final pairs")


if __name__ == "__main__":
    main()
