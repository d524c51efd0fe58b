"""Compiled single-spin Metropolis kernels.

The log-weight of a state is ``sum_b (sum_m Kf[m, b] B_m(b) + Kp[b] prod_m B_m(b))``
where ``B_m(b)`` is the product of flavor-``m`` spins on bond ``b``.  Bond
values and their flavor product are carried along with the spins so a flip
costs only the bonds touching the spin.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def bond_values(spins, bond_ptr, bond_spins):
    F = spins.shape[0]
    nB = bond_ptr.shape[0] - 1
    Bv = np.ones((F, nB), dtype=np.int8)
    prod = np.ones(nB, dtype=np.int8)
    for b in range(nB):
        p = 1
        for m in range(F):
            v = 1
            for q in range(bond_ptr[b], bond_ptr[b + 1]):
                v *= spins[m, bond_spins[q]]
            Bv[m, b] = v
            p *= v
        prod[b] = p
    return Bv, prod


@numba.njit(cache=True)
def log_weight(Bv, prod, Kf, Kp, use_prod):
    F, nB = Bv.shape
    tot = 0.0
    for b in range(nB):
        for m in range(F):
            if Kf[m, b] != 0.0:
                tot += Kf[m, b] * Bv[m, b]
        if use_prod and Kp[b] != 0.0:
            tot += Kp[b] * prod[b]
    return tot


@numba.njit(cache=True)
def sweeps(spins, Bv, prod, Kf, Kp, use_prod, spin_ptr, spin_bonds, uniforms):
    """Sweeps of single-spin updates, each spin of each flavor attempted once.

    ``uniforms`` has shape (n_sweeps, 2, F, n_spins): slot 0 drives the
    acceptance tests and slot 1 a Fisher-Yates shuffle of the visiting order.
    A fixed order would accept zero-cost flips deterministically and can
    trap small systems in part of the state space.  Returns the number of
    accepted flips; ``spins``, ``Bv`` and ``prod`` are updated in place.
    """
    n_sw, _, F, n_sp = uniforms.shape
    order = np.empty(n_sp, dtype=np.int64)
    acc = 0
    for sw in range(n_sw):
        for m in range(F):
            for i in range(n_sp):
                order[i] = i
            for i in range(n_sp - 1, 0, -1):
                j = int(uniforms[sw, 1, m, i] * (i + 1))
                if j > i:
                    j = i
                t = order[i]
                order[i] = order[j]
                order[j] = t
            for k in range(n_sp):
                s = order[k]
                dl = 0.0
                for q in range(spin_ptr[s], spin_ptr[s + 1]):
                    b = spin_bonds[q]
                    kf = Kf[m, b]
                    if kf != 0.0:
                        dl -= 2.0 * kf * Bv[m, b]
                    if use_prod:
                        kp = Kp[b]
                        if kp != 0.0:
                            dl -= 2.0 * kp * prod[b]
                if dl >= 0.0 or uniforms[sw, 0, m, k] < np.exp(dl):
                    spins[m, s] = -spins[m, s]
                    for q in range(spin_ptr[s], spin_ptr[s + 1]):
                        b = spin_bonds[q]
                        Bv[m, b] = -Bv[m, b]
                        prod[b] = -prod[b]
                    acc += 1
    return acc
