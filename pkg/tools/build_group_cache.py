"""Compile the grouped H2 operators (N_t = 15, N_d = 10) into data/ecd_groups.json.

    python tools/build_group_cache.py [R ...]
"""

import sys
import time

from qumodechem.fermion import group_pauli_sum
from qumodechem.vqe import GroupCache, default_data_dir, group_key, qubit_hamiltonian

geoms = [float(r) for r in sys.argv[1:]] or [0.7414]
cache = GroupCache.load(default_data_dir() / "ecd_groups.json")
for R in geoms:
    _, _, psum = qubit_hamiltonian("h2", R)
    for g in group_pauli_sum(psum):
        if all(set(w) == {"I"} for w in g.words()) or group_key(g) in cache.entries:
            continue
        t0 = time.time()
        _, loss = cache.get(g, restarts=10, seed=0)
        print(f"{group_key(g)} loss={loss:.3e} {time.time() - t0:.1f}s", flush=True)
