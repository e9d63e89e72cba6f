"""Regenerate the FCIDUMP fixtures under data/.

Offline helper, not imported by the package. Requires pyscf (RHF/STO-3G,
symmetry-adapted canonical orbitals). Run from the repository root:

    python tools/make_fixtures.py
"""

from pathlib import Path

import numpy as np
from pyscf import gto, scf
from pyscf.tools import fcidump

DATA = Path(__file__).resolve().parent.parent / "data"

H2_GRID = sorted(set(np.round(np.linspace(0.3, 2.1, 10), 4)) | {0.7414})
H4_GRID = [0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0]


def chain(n_atoms, spacing):
    return [("H", (0.0, 0.0, i * spacing)) for i in range(n_atoms)]


def dump(name, atoms):
    mol = gto.M(atom=atoms, basis="sto-3g", unit="Angstrom", symmetry=True, verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    path = DATA / name
    fcidump.from_scf(mf, str(path), tol=1e-15)
    return path, mf.e_tot


def main():
    DATA.mkdir(exist_ok=True)
    for r in H2_GRID:
        print(*dump(f"h2_{r:.4f}.fcidump", chain(2, r)))
    for r in H4_GRID:
        print(*dump(f"h4_{r:.4f}.fcidump", chain(4, r)))
    reference_fci()



def reference_fci():
    """Write data/reference_fci.csv from pyscf's own FCI solver."""
    from pyscf import fci

    rows = ["molecule,R_angstrom,E_fci_hartree"]
    for mol_name, n_atoms, grid in (("h2", 2, H2_GRID), ("h4", 4, H4_GRID)):
        for r in grid:
            mol = gto.M(atom=chain(n_atoms, r), basis="sto-3g", unit="Angstrom",
                        symmetry=True, verbose=0)
            mf = scf.RHF(mol)
            mf.conv_tol = 1e-12
            mf.kernel()
            e = fci.FCI(mf).kernel()[0]
            rows.append(f"{mol_name},{r:.4f},{e:.12f}")
    (DATA / "reference_fci.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
