"""Regenerate the committed FCIDUMP fixtures under tests/fixtures.

The hydrogen-molecule file carries standard tabulated minimal-basis values.
The synthetic fixtures are built from hand-chosen symmetric pair factors, so
the two-body supermatrix is positive semidefinite with exact 8-fold symmetry,
and are then rotated to the basis that diagonalizes the closed-shell mean
field, so the lowest determinant is a canonical reference. Run from the
repository root:  python scripts/make_fixtures.py
"""

from __future__ import annotations

import pathlib

import numpy as np

from qsubspace.integrals import MolecularIntegrals, serialize_fcidump

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def eri_from_factors(factors):
    """(pr|qs) = 2 sum_g L^g_pr L^g_qs from symmetric factors."""
    g = np.zeros((factors.shape[1],) * 4)
    for ell in factors:
        g += 2.0 * np.einsum("pr,qs->prqs", ell, ell)
    return g


def mean_field(h, g, nocc):
    """Closed-shell Fock matrix for the first `nocc` orbitals occupied."""
    f = h.copy()
    for i in range(nocc):
        f += 2.0 * g[:, :, i, i] - g[:, i, i, :]
    return f


def canonicalize(h, g, nocc, sweeps=60):
    """Rotate to the self-consistent mean-field eigenbasis."""
    m = h.shape[0]
    c = np.eye(m)
    for _ in range(sweeps):
        hh = c.T @ h @ c
        gg = np.einsum("prqs,pa,rb,qc,sd->abcd", g, c, c, c, c, optimize=True)
        f = mean_field(hh, gg, nocc)
        off = np.max(np.abs(f - np.diag(np.diag(f))))
        if off < 1e-13:
            break
        _, vecs = np.linalg.eigh(f)
        c = c @ vecs
    hh = c.T @ h @ c
    gg = np.einsum("prqs,pa,rb,qc,sd->abcd", g, c, c, c, c, optimize=True)
    f = mean_field(hh, gg, nocc)
    assert np.max(np.abs(f - np.diag(np.diag(f)))) < 1e-10, "not canonical"
    assert np.all(np.diff(np.diag(f)) > 0), "reference not ordered"
    return hh, gg


def write(name, ints):
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / name
    path.write_text(serialize_fcidump(ints))
    print(f"wrote {path}")


def main():
    # helium-like single orbital, two electrons: E = 2 h + (00|00)
    write(
        "he_minimal.fcidump",
        MolecularIntegrals(
            1, 1, 1, 0.0,
            np.array([[-1.85]]),
            np.full((1, 1, 1, 1), 1.05),
        ),
    )

    # hydrogen molecule, minimal basis, near-equilibrium bond length.
    # Standard tabulated restricted values; gerade/ungerade symmetry zeroes
    # every integral with an odd count of either index.
    h = np.array([[-1.252477495, 0.0], [0.0, -0.475934275]])
    g = np.zeros((2, 2, 2, 2))
    g[0, 0, 0, 0] = 0.674493166
    g[1, 1, 1, 1] = 0.697397504
    g[0, 0, 1, 1] = g[1, 1, 0, 0] = 0.663472101
    val = 0.181287518
    g[0, 1, 0, 1] = g[1, 0, 0, 1] = g[0, 1, 1, 0] = g[1, 0, 1, 0] = val
    write("h2_sto3g.fcidump", MolecularIntegrals(2, 1, 1, 0.713753950, h, g))

    # the same symmetry structure with a small determinant gap: strong mixing
    h = np.array([[-0.85, 0.0], [0.0, -0.78]])
    g = np.zeros((2, 2, 2, 2))
    g[0, 0, 0, 0] = 0.58
    g[1, 1, 1, 1] = 0.56
    g[0, 0, 1, 1] = g[1, 1, 0, 0] = 0.54
    val = 0.19
    g[0, 1, 0, 1] = g[1, 0, 0, 1] = g[0, 1, 1, 0] = g[1, 0, 1, 0] = val
    write("h2_stretched.fcidump", MolecularIntegrals(2, 1, 1, 0.36, h, g))

    # heteronuclear two-orbital system: no point-group symmetry, so the
    # canonical basis comes out of the mean-field iteration
    factors = np.array(
        [
            [[0.62, 0.11], [0.11, 0.46]],
            [[0.10, 0.17], [0.17, -0.08]],
        ]
    )
    g = eri_from_factors(factors)
    h = np.array([[-1.61, 0.13], [0.13, -0.74]])
    hh, gg = canonicalize(h, g, nocc=1)
    write("heh_like.fcidump", MolecularIntegrals(2, 1, 1, 1.2, hh, gg))

    # three orbitals, two electrons
    factors = np.array(
        [
            [[0.58, 0.09, 0.04], [0.09, 0.49, 0.07], [0.04, 0.07, 0.42]],
            [[0.05, 0.14, -0.03], [0.14, -0.02, 0.08], [-0.03, 0.08, 0.06]],
            [[0.02, -0.05, 0.09], [-0.05, 0.04, 0.05], [0.09, 0.05, -0.03]],
        ]
    )
    g = eri_from_factors(factors)
    h = np.array(
        [[-1.42, 0.09, -0.05], [0.09, -0.91, 0.11], [-0.05, 0.11, -0.52]]
    )
    hh, gg = canonicalize(h, g, nocc=1)
    write("h3_plus.fcidump", MolecularIntegrals(3, 1, 1, 0.9, hh, gg))

    # four orbitals, four electrons: the desk-scale workhorse (dimension 36)
    factors = np.array(
        [
            [
                [0.55, 0.08, 0.03, 0.01],
                [0.08, 0.47, 0.06, 0.02],
                [0.03, 0.06, 0.40, 0.05],
                [0.01, 0.02, 0.05, 0.34],
            ],
            [
                [0.04, 0.12, -0.02, 0.03],
                [0.12, -0.03, 0.07, -0.01],
                [-0.02, 0.07, 0.05, 0.06],
                [0.03, -0.01, 0.06, -0.04],
            ],
        ]
    )
    g = eri_from_factors(factors)
    h = np.array(
        [
            [-2.05, 0.07, -0.04, 0.02],
            [0.07, -1.46, 0.09, -0.03],
            [-0.04, 0.09, -0.88, 0.06],
            [0.02, -0.03, 0.06, -0.42],
        ]
    )
    hh, gg = canonicalize(h, g, nocc=2)
    write("h4_toy.fcidump", MolecularIntegrals(4, 2, 2, 1.7, hh, gg))


if __name__ == "__main__":
    main()
