"""Regenerate the committed golden FCI report under tests/golden.

Runs the command line fci method on the 2-orbital hydrogen fixture and
stores the eigenvalue list, after checking it against the independent
dense-algebra oracle used by the test suite. The committed file pins the
exact floating-point output, so any platform or code drift shows up as a
bit-level mismatch. Run from the repository root:

    python scripts/make_golden.py
"""

from __future__ import annotations

import json
import pathlib
import sys
import tempfile

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from oracles import sector_fci  # noqa: E402

from qsubspace.cli import main  # noqa: E402
from qsubspace.integrals import parse_fcidump  # noqa: E402

FIXTURE = ROOT / "tests" / "fixtures" / "h2_sto3g.fcidump"
OUT = ROOT / "tests" / "golden" / "fci_h2_sto3g.json"


def build():
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["fci", "--input", str(FIXTURE), "--out", tmp])
        if code != 0:
            raise SystemExit(f"fci run failed with exit code {code}")
        report = json.loads((pathlib.Path(tmp) / "result.json").read_text())
    eigenvalues = report["result"]["eigenvalues"]

    ints = parse_fcidump(FIXTURE.read_text())
    want, _ = sector_fci(
        ints.e_nuc, ints.one_body, ints.two_body, ints.num_up, ints.num_down
    )
    np.testing.assert_allclose(eigenvalues, want, atol=1e-9)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(
        json.dumps(
            {"input": FIXTURE.name, "method": "fci", "eigenvalues": eigenvalues},
            indent=2,
        )
        + "\n"
    )
    print(f"wrote {OUT} ({len(eigenvalues)} eigenvalues, oracle agreement <= 1e-9)")


if __name__ == "__main__":
    build()
