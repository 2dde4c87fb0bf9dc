"""Regenerate the bundled FCIDUMP fixtures and their reference energies.

Needs PySCF, which is not a dependency of the package; run it from an
environment that has it installed::

    python tests/data/make_fixtures.py

Integrals are written in the Lowdin-orthonormalised STO-3G basis. The
reference energy is PySCF's ROHF energy converged to 1e-12 Hartree, taking
the lowest result over several initial guesses.
"""

import json
import os

import numpy as np
import pyscf
from pyscf import ao2mo, gto, scf, tools

HERE = os.path.dirname(os.path.abspath(__file__))

MOLECULES = {
    "ch2_triplet_sto3g": dict(atom="C 0 0 0.1; H 0 0.86 -0.5; H 0 -0.86 -0.5", spin=2),
    "oh_doublet_sto3g": dict(atom="O 0 0 0; H 0 0 0.97", spin=1),
}


def lowdin_integrals(mol):
    S = mol.intor("int1e_ovlp")
    w, V = np.linalg.eigh(S)
    X = V @ np.diag(w ** -0.5) @ V.T
    h = X.T @ scf.hf.get_hcore(mol) @ X
    eri = ao2mo.restore(1, ao2mo.full(mol, X), X.shape[1])
    return X, h, eri


def reference_energy(mol):
    best = None
    for guess in ("minao", "atom", "hcore", "huckel", "1e"):
        mf = scf.ROHF(mol)
        mf.conv_tol = 1e-12
        mf.conv_tol_grad = 1e-8
        mf.max_cycle = 500
        mf.init_guess = guess
        mf.verbose = 0
        e = mf.kernel()
        if not mf.converged:
            continue
        mf = mf.newton()
        mf.conv_tol = 1e-12
        mf.verbose = 0
        e = mf.kernel(mf.mo_coeff, mf.mo_occ)
        if best is None or e < best[0]:
            best = (e, guess)
    return best


def main():
    refs = {}
    for name, spec in MOLECULES.items():
        mol = gto.M(basis="sto-3g", unit="Angstrom", verbose=0, **spec)
        X, h, eri = lowdin_integrals(mol)
        n = h.shape[0]
        tools.fcidump.from_integrals(
            os.path.join(HERE, name + ".fcidump"), h, eri, n, mol.nelectron,
            nuc=mol.energy_nuc(), ms=mol.spin, tol=1e-16,
        )
        e, guess = reference_energy(mol)
        na, nb = mol.nelec
        refs[name] = {
            "energy": float(e),
            "n_orb": n,
            "n_internal": nb,
            "n_active": na - nb,
            "atom": spec["atom"],
            "basis": "sto-3g",
            "program": f"PySCF {pyscf.__version__} ROHF + second-order refinement",
            "best_guess": guess,
        }
        print(name, n, nb, na - nb, repr(e), guess)
    with open(os.path.join(HERE, "references.json"), "w") as f:
        json.dump(refs, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
