"""Compile the SNAP Pauli-word library used by the H2 and H4 pipelines.

Words are the distinct 4-qubit blocks of the H4 Hamiltonian on the (4, 4)
partition, which include every H2 word. The file is rewritten after each
word so an interrupted run can be resumed.

    python tools/build_library.py [out.json]
"""

import sys
import time
import warnings
from pathlib import Path

from qumodechem.compiler import ParamLibrary, compile_target, load_library, save_library
from qumodechem.fermion import build_molecular_hamiltonian, jordan_wigner, load_fcidump_file, word_matrix

ROOT = Path(__file__).resolve().parents[1]


def h4_block_words() -> list[str]:
    ints = load_fcidump_file(ROOT / "data" / "h4_1.0000.fcidump")
    words = jordan_wigner(build_molecular_hamiltonian(ints)).simplify().terms
    blocks = {b for w in words for b in (w[:4], w[4:])}
    blocks.discard("IIII")
    return sorted(blocks)


warnings.simplefilter("ignore")
out = Path(sys.argv[1] if len(sys.argv) > 1 else ROOT / "data" / "snap_library.json")
lib = load_library(out, verify_sample=0) if out.exists() else ParamLibrary("snap", 16, 1e-8)
for word in h4_block_words():
    if word in lib.entries:
        continue
    t0 = time.time()
    res = compile_target(word_matrix(word), "snap", 16, restarts=10, seed=0)
    if not res.converged:
        # a few blocks (XXII, XIXX, XZXI) need more random starts
        res = compile_target(word_matrix(word), "snap", 16, restarts=40, seed=0)
    lib.add(word, res)
    save_library(lib, out)
    print(f"{word} loss={res.final_loss:.3e} restarts={res.restarts_used} {time.time() - t0:.1f}s", flush=True)
