"""Exact evaluation: enumeration of spin models and a dense density-matrix reference.

Two independent routes compute the same quantities on small tori:

* the statistical-mechanics route sums a derived :class:`~stabsm.smgen.SMModel`
  exactly (Gray-code enumeration over symmetry-reduced configurations);
* the dense route builds the decohered code state as a ``2^N x 2^N`` matrix by
  projecting onto the code space and applying Kraus operators literally.

A third route, :func:`moment_stabilizer_sum`, expands ``rho`` in its
stabilizer basis and uses a Walsh-Hadamard transform; it shares no code with
the spin-model path and is cheap up to a few dozen stabilizers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .channels import ChannelSpec, kw_dual_beta
from .codes import CodeSpec, ResolvedLogical, logicals, stabilizer_matrix
from .lattice import (
    Torus,
    all_f2_vectors,
    independent_rows_f2,
    instantiate_vector,
    kernel_f2,
    rank_f2,
    rref_f2,
    split_zx,
    symplectic_product,
)
from .polyalg import LaurentPoly
from .smgen import (
    KWDual,
    ModelError,
    SMModel,
    classical_sm,
    defect_model,
    error_instances,
    kw_dual,
    replica_model,
)

LOG2 = math.log(2.0)
DEFAULT_QUBIT_CAP = 12
MAX_ENUMERATION_BITS = 34


class OracleError(RuntimeError):
    """Reference computation refused (too large, or ill-posed)."""


# --------------------------------------------------------------------------
# exact enumeration


@numba.njit(cache=True)
def _gray_enumerate(
    n_bits,
    bit_flavor,
    bit_ptr,
    bit_bonds,
    signs,
    replica_product,
    bond_class,
    class_K,
    hard,
    bit_obs,
):
    F = signs.shape[0] - 1
    nB = signs.shape[1]
    n_cls = class_K.shape[0]
    n_obs = bit_obs.shape[1]
    T = F + 1 if replica_product else F

    Bv = np.ones((F, nB), dtype=np.int64)
    prod = np.ones(nB, dtype=np.int64)
    S = np.zeros(nB, dtype=np.int64)
    sat = np.zeros(nB, dtype=np.bool_)
    cnt = np.zeros(n_cls, dtype=np.int64)
    viol = 0
    for b in range(nB):
        s = 0
        ok = True
        for m in range(F):
            s += signs[m, b]
            if signs[m, b] != 1:
                ok = False
        if replica_product:
            s += signs[F, b]
            if signs[F, b] != 1:
                ok = False
        S[b] = s
        sat[b] = ok
        if bond_class[b] >= 0:
            cnt[bond_class[b]] += s - T
        if hard[b] and not ok:
            viol += 1
    obs = np.ones(n_obs, dtype=np.int64)

    mx = -np.inf
    acc = 0.0
    acc_obs = np.zeros(n_obs)
    total = np.int64(1) << n_bits
    for step in range(total):
        if step > 0:
            # bit to flip: lowest set bit of the step counter
            j = 0
            v = step
            while (v & 1) == 0:
                v >>= 1
                j += 1
            m = bit_flavor[j]
            for q in range(bit_ptr[j], bit_ptr[j + 1]):
                b = bit_bonds[q]
                cb = bond_class[b]
                if cb >= 0:
                    cnt[cb] -= S[b] - T
                if hard[b] and not sat[b]:
                    viol -= 1
                Bv[m, b] = -Bv[m, b]
                prod[b] = -prod[b]
                s = 0
                ok = True
                for f in range(F):
                    val = signs[f, b] * Bv[f, b]
                    s += val
                    if val != 1:
                        ok = False
                if replica_product:
                    val = signs[F, b] * prod[b]
                    s += val
                    if val != 1:
                        ok = False
                S[b] = s
                sat[b] = ok
                if cb >= 0:
                    cnt[cb] += s - T
                if hard[b] and not ok:
                    viol += 1
            for o in range(n_obs):
                if bit_obs[j, o]:
                    obs[o] = -obs[o]
        if viol > 0:
            continue
        lw = 0.0
        for c in range(n_cls):
            lw += class_K[c] * cnt[c]
        if lw > mx:
            scale = math.exp(mx - lw) if mx > -np.inf else 0.0
            acc = acc * scale + 1.0
            for o in range(n_obs):
                acc_obs[o] = acc_obs[o] * scale + obs[o]
            mx = lw
        else:
            w = math.exp(lw - mx)
            acc += w
            for o in range(n_obs):
                acc_obs[o] += w * obs[o]
    return mx, acc, acc_obs


@dataclass(frozen=True)
class ExactResult:
    """``log_z`` is the log of the summed model weights, ``log_moment`` adds the normalization."""

    log_z: float
    log_moment: float
    observables: np.ndarray
    n_enumerated: int
    symmetry_dim: int


def _check_observables(model: SMModel, observables):
    out = []
    for flavor, spins in observables or ():
        if not 0 <= flavor < model.n_flavors:
            raise ModelError(f"observable flavor {flavor} out of range")
        mask = np.zeros(model.n_spins, dtype=np.uint8)
        for s in np.asarray(spins, dtype=np.int64):
            mask[s] ^= 1
        out.append((flavor, mask))
    return out


def partition_exact(model: SMModel, observables: Sequence[tuple[int, Sequence[int]]] | None = None) -> ExactResult:
    """Exact log partition sum, optionally with spin-product averages.

    Each observable is ``(flavor, spin indices)`` and contributes the average
    of the product of those spins.  Configurations differing by a symmetry of
    the bond structure have equal weight, so only coset representatives are
    visited; observables that are odd under a symmetry average to zero.
    """
    F, n_sp = model.n_flavors, model.n_spins
    inc = model.incidence()
    K = kernel_f2(inc)
    ksym = K.shape[0]
    pivots = rref_f2(K)[1] if ksym else []
    free = np.array([s for s in range(n_sp) if s not in set(pivots)], dtype=np.int64)
    n_bits = F * free.size
    if n_bits > MAX_ENUMERATION_BITS:
        raise OracleError(f"exact enumeration needs 2^{n_bits} states; limit is 2^{MAX_ENUMERATION_BITS}")

    obs = _check_observables(model, observables)
    vanish = np.zeros(len(obs), dtype=bool)
    for o, (_, mask) in enumerate(obs):
        if ksym and np.any((K.astype(np.int64) @ mask) % 2):
            vanish[o] = True

    bit_flavor = np.repeat(np.arange(F), free.size).astype(np.int64)
    bit_spin = np.tile(free, F)
    spin_bonds = [np.nonzero(inc[:, s])[0] for s in range(n_sp)]
    lists = [spin_bonds[s] for s in bit_spin]
    bit_ptr = np.concatenate([[0], np.cumsum([len(x) for x in lists])]).astype(np.int64)
    bit_bonds = np.concatenate(lists).astype(np.int64) if lists else np.zeros(0, dtype=np.int64)
    bit_obs = np.zeros((n_bits, len(obs)), dtype=np.bool_)
    for o, (flavor, mask) in enumerate(obs):
        bit_obs[:, o] = (bit_flavor == flavor) & (mask[bit_spin] == 1)

    Kb = np.asarray(model.coupling, dtype=float)
    finite = np.isfinite(Kb)
    vals = np.unique(Kb[finite & (Kb != 0)])
    bond_class = np.full(model.n_bonds, -1, dtype=np.int64)
    for c, v in enumerate(vals):
        bond_class[finite & (Kb == v)] = c
    hard = (~finite) | np.asarray(model.pinned, dtype=bool)

    mx, acc, acc_obs = _gray_enumerate(
        n_bits,
        bit_flavor,
        bit_ptr,
        bit_bonds,
        np.asarray(model.signs, dtype=np.int64),
        bool(model.replica_product),
        bond_class,
        vals.astype(float),
        hard,
        bit_obs,
    )
    if acc == 0.0:
        log_z = -math.inf
        means = np.full(len(obs), np.nan)
    else:
        log_z = mx + math.log(acc) + F * ksym * LOG2
        means = np.where(vanish, 0.0, acc_obs / acc)
    return ExactResult(log_z, model.log_norm + log_z, means, 1 << n_bits, ksym)


def partition_bruteforce(model: SMModel, max_bits: int = 20) -> float:
    """Log partition sum by visiting every configuration; a slow cross-check."""
    F, n_sp = model.n_flavors, model.n_spins
    if F * n_sp > max_bits:
        raise OracleError(f"brute force over {F * n_sp} bits exceeds {max_bits}")
    bits = all_f2_vectors(F * n_sp)
    spins = (1 - 2 * bits.astype(np.int64)).reshape(-1, F, n_sp)
    lw = model.log_weight(spins)
    m = lw.max()
    if not np.isfinite(m):
        return -math.inf
    return float(m + math.log(np.exp(lw - m).sum()))


def renyi_entropy_sm(model: SMModel) -> float:
    """Renyi entropy ``S^(n)`` of the code state from its replica model."""
    return partition_exact(model).log_moment / (1 - model.n)


# --------------------------------------------------------------------------
# Walsh-Hadamard stabilizer sum


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along the last axis."""
    out = np.array(a, dtype=float, copy=True)
    n = out.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        v = out.reshape(*out.shape[:-1], -1, 2, h)
        x, y = v[..., 0, :].copy(), v[..., 1, :].copy()
        v[..., 0, :] = x + y
        v[..., 1, :] = x - y
        h *= 2
    return out


def _independent_stabilizers(code: CodeSpec, t: Torus) -> np.ndarray:
    S = stabilizer_matrix(code, t)
    return S[independent_rows_f2(S)]


def _channel_instances(channel: ChannelSpec, t: Torus) -> tuple[np.ndarray, np.ndarray]:
    """Instantiated Pauli of every (cell, generator) error and its probability."""
    vecs, probs = [], []
    for u in t.coords:
        for g in channel.generators:
            vecs.append(instantiate_vector(g.pattern, t, u))
            probs.append(g.p)
    return np.array(vecs, dtype=np.uint8), np.array(probs)


def moment_stabilizer_sum(code: CodeSpec, channel: ChannelSpec, t: Torus | int, n: int) -> float:
    """``log tr rho^n`` from the stabilizer expansion of the decohered state.

    Writing ``rho = 2^-N sum_c f(c) g(c)`` over products ``g(c)`` of independent
    generators, each error multiplies ``f`` by ``(1 - 2p)`` when it
    anticommutes with ``g(c)``; the n-fold convolution at zero is a sum of
    ``n``-th powers in the Walsh-Hadamard domain.
    """
    t = code.torus(t) if isinstance(t, int) else t.with_l(code.l)
    gens = _independent_stabilizers(code, t)
    r = gens.shape[0]
    errs, probs = _channel_instances(channel, t)
    A = symplectic_product(gens, errs, code.l)
    basis = rref_f2(A)[0]
    rp = basis.shape[0]
    if rp > 26:
        raise OracleError(f"stabilizer sum over 2^{rp} syndromes is too large")
    c = all_f2_vectors(rp).astype(np.int64)
    synd = (c @ basis.astype(np.int64)) % 2
    with np.errstate(divide="ignore"):
        f = np.prod(np.power(1.0 - 2.0 * probs[None, :], synd), axis=1)
    F = fwht(f)
    N = t.n_qubits
    total = np.sum(F**n)
    return float(-(n - 1) * N * LOG2 + (r - rp) * (n - 1) * LOG2 - rp * LOG2 + math.log(total))


# --------------------------------------------------------------------------
# dense density matrices


def _pauli_masks(vec: np.ndarray, l: int) -> tuple[int, int, int]:
    z, x = split_zx(np.asarray(vec, dtype=np.uint8)[None, :], l)
    zb = sum(1 << int(q) for q in np.nonzero(z[0])[0])
    xb = sum(1 << int(q) for q in np.nonzero(x[0])[0])
    return zb, xb, int(np.count_nonzero(z[0] & x[0]))


def _parity(idx: np.ndarray, mask: int) -> np.ndarray:
    v = idx & mask
    out = np.zeros_like(v)
    while np.any(v):
        out ^= v & 1
        v >>= 1
    return out


class PauliOp:
    """Hermitian Pauli ``i^{|x.z|} X^x Z^z`` acting on ``n_qubits`` qubits, qubit ``q`` on bit ``q``."""

    def __init__(self, zmask: int, xmask: int, n_qubits: int):
        self.zmask, self.xmask, self.n = int(zmask), int(xmask), n_qubits
        idx = np.arange(1 << n_qubits, dtype=np.int64)
        ny = bin(self.zmask & self.xmask).count("1")
        self.perm = idx ^ self.xmask
        # P|j> = phase[j] |j ^ x>
        self.phase = (1j**ny) * (1 - 2 * _parity(idx, self.zmask))

    def left(self, M: np.ndarray) -> np.ndarray:
        out = np.empty_like(M, dtype=complex)
        out[self.perm] = self.phase[:, None] * M
        return out

    def right(self, M: np.ndarray) -> np.ndarray:
        # (M P)[:, c] = M[:, c ^ x] * phase[c]
        return M[:, self.perm] * self.phase[None, :]

    def conjugate(self, M: np.ndarray) -> np.ndarray:
        return self.right(self.left(M))


def _check_cap(n_qubits: int, cap: int) -> None:
    if n_qubits > cap:
        raise OracleError(f"dense oracle limited to {cap} qubits, requested {n_qubits}")


def _project(rho: np.ndarray, ops: Sequence[PauliOp]) -> np.ndarray:
    for op in ops:
        half = 0.5 * (rho + op.left(rho))
        rho = 0.5 * (half + op.right(half))
    tr = np.trace(rho).real
    if tr <= 1e-12:
        raise OracleError("stabilizer projectors annihilate the state (inconsistent signs)")
    return rho / tr


def _apply_channel(rho: np.ndarray, errs: np.ndarray, probs: np.ndarray, l: int, n_qubits: int) -> np.ndarray:
    for vec, p in zip(errs, probs):
        if p == 0.0:
            continue
        zb, xb, _ = _pauli_masks(vec, l)
        op = PauliOp(zb, xb, n_qubits)
        rho = (1.0 - p) * rho + p * op.conjugate(rho)
    return rho


def dense_rho(code: CodeSpec, channel: ChannelSpec, t: Torus | int, *, cap: int = DEFAULT_QUBIT_CAP) -> np.ndarray:
    """Decohered code state ``N(rho_0)`` with ``rho_0`` the normalized code-space projector."""
    t = code.torus(t) if isinstance(t, int) else t.with_l(code.l)
    N = t.n_qubits
    _check_cap(N, cap)
    gens = _independent_stabilizers(code, t)
    ops = [PauliOp(*_pauli_masks(g, code.l)[:2], N) for g in gens]
    rho = _project(np.eye(1 << N, dtype=complex) / (1 << N), ops)
    errs, probs = _channel_instances(channel, t)
    return _apply_channel(rho, errs, probs, code.l, N)


def dense_moment(rho: np.ndarray, n: int) -> float:
    """``log tr rho^n`` from the spectrum."""
    ev = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    return float(math.log(np.sum(ev**n)))


def renyi_entropy_dense(rho: np.ndarray, n: int) -> float:
    return dense_moment(rho, n) / (1 - n)


def partial_trace(rho: np.ndarray, keep: Sequence[int], n_qubits: int) -> np.ndarray:
    """Reduced matrix on qubits ``keep`` (bit ``q`` of the index is qubit ``q``)."""
    keep = sorted(keep)
    trace_out = [q for q in range(n_qubits) if q not in keep]
    # reshape with axis k <-> qubit n-1-k (most significant first)
    T = rho.reshape([2] * (2 * n_qubits))
    axes_r = [n_qubits - 1 - q for q in trace_out]
    for k, ax in enumerate(sorted(axes_r, reverse=True)):
        cur = T.ndim // 2
        T = np.trace(T, axis1=ax, axis2=ax + cur)
    d = 1 << len(keep)
    return T.reshape(d, d)


def partial_transpose(rho: np.ndarray, region: Sequence[int], n_qubits: int) -> np.ndarray:
    T = rho.reshape([2] * (2 * n_qubits))
    axes = list(range(2 * n_qubits))
    for q in region:
        a = n_qubits - 1 - q
        axes[a], axes[a + n_qubits] = axes[a + n_qubits], axes[a]
    return T.transpose(axes).reshape(rho.shape)


# --------------------------------------------------------------------------
# information quantities


def relative_entropy_2_dense(rho: np.ndarray, pauli: np.ndarray, l: int, n_qubits: int) -> float:
    """``-log(tr(rho P rho P) / tr rho^2)``; infinite when the overlap vanishes."""
    zb, xb, _ = _pauli_masks(pauli, l)
    op = PauliOp(zb, xb, n_qubits)
    num = float(np.real(np.sum(rho.T * op.conjugate(rho))))
    den = float(np.real(np.sum(rho.T * rho)))
    if num <= 1e-300:
        return math.inf
    return -math.log(num / den)


def error_correlator_spins(model: SMModel, pauli: np.ndarray) -> np.ndarray | None:
    """Spins (flavor-local indices) of stabilizers anticommuting with ``pauli``.

    Returns ``None`` when an anticommuting stabilizer is not a model species,
    since its free spin averages the correlator to zero.
    """
    code, t = model.code, model.torus
    S = stabilizer_matrix(code, t)
    anti = np.nonzero(symplectic_product(S, pauli, code.l)[:, 0])[0]
    cols = model.species_cols
    slot = {c: i for i, c in enumerate(cols)}
    out = []
    for row in anti:
        cell, col = divmod(int(row), code.m)
        if col not in slot:
            return None
        out.append(cell * model.n_species + slot[col])
    return np.array(out, dtype=np.int64)


def relative_entropy_2_sm(model: SMModel, pauli: np.ndarray) -> float:
    """Relative entropy from the two-replica correlator of the inserted error."""
    if model.n != 2:
        raise ModelError("the relative entropy uses the n=2 model")
    spins = error_correlator_spins(model, pauli)
    if spins is None:
        return math.inf
    if spins.size == 0:
        return 0.0
    val = partition_exact(model, [(0, spins)]).observables[0]
    if val <= 0:
        return math.inf
    return -math.log(val)


def _logical_selectors(k: int) -> np.ndarray:
    return all_f2_vectors(k)


def coherent_info_2_sm(
    code: CodeSpec, channel: ChannelSpec, t: Torus | int, *, lgs: Sequence[ResolvedLogical] | None = None
) -> float:
    """Renyi-2 coherent information ``log(sum_L Z_L / Z_0) - k log 2``."""
    t = code.torus(t) if isinstance(t, int) else t.with_l(code.l)
    base = replica_model(code, channel, t, 2)
    lgs = list(lgs) if lgs is not None else logicals(code, t)
    k_log = len(lgs) // 2
    log_z0 = partition_exact(base).log_z
    vals = []
    for sel in _logical_selectors(len(lgs)):
        m = defect_model(base, lgs, sel[None, :])
        vals.append(partition_exact(m).log_z - log_z0)
    vals = np.array(vals)
    top = vals.max()
    return float(top + math.log(np.exp(vals - top).sum()) - k_log * LOG2)


def dense_rho_rq(
    code: CodeSpec,
    channel: ChannelSpec,
    t: Torus | int,
    *,
    lgs: Sequence[ResolvedLogical] | None = None,
    cap: int = DEFAULT_QUBIT_CAP,
) -> tuple[np.ndarray, int, int]:
    """Code qubits maximally entangled with one reference qubit per logical pair.

    Returns ``(rho_RQ, N, k)``; reference qubits occupy bits ``N .. N + k - 1``
    and the channel acts on the code qubits only.
    """
    t = code.torus(t) if isinstance(t, int) else t.with_l(code.l)
    lgs = list(lgs) if lgs is not None else logicals(code, t)
    N = t.n_qubits
    k = len(lgs) // 2
    tot = N + k
    _check_cap(tot, cap)
    ops = []
    for g in _independent_stabilizers(code, t):
        zb, xb, _ = _pauli_masks(g, code.l)
        ops.append(PauliOp(zb, xb, tot))
    for j in range(k):
        a, b = lgs[2 * j], lgs[2 * j + 1]
        za, xa, _ = _pauli_masks(a.vector, code.l)
        zb, xb, _ = _pauli_masks(b.vector, code.l)
        r = 1 << (N + j)
        # pair each logical with its partner's conjugate on the reference
        ops.append(PauliOp(za | r, xa, tot))
        ops.append(PauliOp(zb, xb | r, tot))
    rho = _project(np.eye(1 << tot, dtype=complex) / (1 << tot), ops)
    errs, probs = _channel_instances(channel, t)
    rho = _apply_channel(rho, errs, probs, code.l, tot)
    return rho, N, k


def coherent_info_2_dense(code: CodeSpec, channel: ChannelSpec, t: Torus | int, **kw) -> float:
    rho, N, k = dense_rho_rq(code, channel, t, **kw)
    rho_q = partial_trace(rho, range(N), N + k)
    return renyi_entropy_dense(rho_q, 2) - renyi_entropy_dense(rho, 2)


def negativity_dense(rho: np.ndarray, region: Sequence[int], n_qubits: int, n: int = 2) -> float:
    """``1/(2 - 2n) log[tr (rho^T_A)^{2n} / tr rho^{2n}]``."""
    if n < 2:
        raise ValueError("the moment negativity needs n >= 2")
    pt = partial_transpose(rho, region, n_qubits)
    ev_pt = np.linalg.eigvalsh(pt)
    ev = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    return float(math.log(np.sum(ev_pt ** (2 * n)) / np.sum(ev ** (2 * n))) / (2 - 2 * n))


def negativity_sm(code: CodeSpec, channel: ChannelSpec, t: Torus | int, region: Sequence[int], n: int = 2) -> float:
    """Moment negativity from one-flavor model weights dressed with transpose signs.

    The weight of stabilizer product ``g(c)`` comes from the n=2 model with
    every species kept and dependent stabilizer spins fixed up; transposing
    region ``A`` multiplies it by ``(-1)^{#Y in A}``.
    """
    if n < 2:
        raise ValueError("the moment negativity needs n >= 2")
    t = code.torus(t) if isinstance(t, int) else t.with_l(code.l)
    model = replica_model(code, channel, t, 2, species="all")
    S = stabilizer_matrix(code, t)
    ind = independent_rows_f2(S)
    r = len(ind)
    if r > 24:
        raise OracleError(f"negativity sum over 2^{r} stabilizer products is too large")
    c = all_f2_vectors(r)
    bits = np.zeros((c.shape[0], model.n_spins), dtype=np.uint8)
    bits[:, ind] = c
    spins = (1 - 2 * bits.astype(np.int64))[:, None, :]
    # one flavor: K (B - 1) with K = mu/2 per bond; the n=2 model doubles this
    B = model.bond_values(spins)[:, 0, :]
    K = np.asarray(model.coupling)
    with np.errstate(invalid="ignore"):
        lw = np.where(B == 1, 0.0, -2.0 * K).sum(axis=1)
    w = np.exp(lw)
    g = (c.astype(np.int64) @ S[ind].astype(np.int64)) % 2
    z, x = split_zx(g, code.l)
    amask = np.zeros(t.n_qubits, dtype=bool)
    amask[np.asarray(list(region), dtype=np.int64)] = True
    ysign = 1 - 2 * (np.count_nonzero(z & x & amask[None, :], axis=1) % 2)
    N = t.n_qubits
    k = 2 * n
    pt = np.sum(fwht(w * ysign) ** k)
    plain = np.sum(fwht(w) ** k)
    log_pt = -(k - 1) * N * LOG2 - r * LOG2 + math.log(pt)
    log_plain = -(k - 1) * N * LOG2 - r * LOG2 + math.log(plain)
    return float((log_pt - log_plain) / (2 - 2 * n))


# --------------------------------------------------------------------------
# duality check


@dataclass(frozen=True)
class KWCheck:
    betas: tuple[float, ...]
    log_prefactor: tuple[float, ...]
    predicted: float
    dual: KWDual

    @property
    def spread(self) -> float:
        v = np.array(self.log_prefactor)
        return float(v.max() - v.min())

    def constant(self, tol: float = 1e-9) -> bool:
        """Prefactor ratio constant across the grid (relative spread below ``tol``)."""
        return self.spread <= tol

    def matches_prediction(self, tol: float = 1e-9) -> bool:
        return all(abs(v - self.predicted) <= tol for v in self.log_prefactor)


def classical_log_z(S_c, t: Torus, beta: float) -> float:
    m = classical_sm(S_c, t, beta)
    return partition_exact(m).log_z + beta * m.n_bonds


def kw_verify(S_c, t: Torus, betas: Sequence[float], *, dual: KWDual | None = None) -> KWCheck:
    """Compare ``Z(beta)`` with the dual sum at ``beta*`` on the same torus.

    The reported log prefactor is ``log Z(beta) - B log cosh(beta) +
    B beta* - log Z*(beta*)``, which must equal
    ``(spins - generators + rank) log 2`` for every ``beta``.
    """
    dual = dual if dual is not None else kw_dual(S_c, t)
    if dual.degenerate:
        raise ModelError("classical model has no local loop generators; its dual is degenerate")
    B = dual.n_bonds
    out = []
    for beta in betas:
        bs = kw_dual_beta(beta)
        lz = classical_log_z(S_c, t, beta)
        dm = dual.dual_model(bs)
        lz_star = partition_exact(dm).log_z + bs * dm.n_bonds
        out.append(lz - B * math.log(math.cosh(beta)) + B * bs - lz_star)
    predicted = (dual.n_spins - dual.n_generators + dual.rank) * LOG2
    return KWCheck(tuple(float(b) for b in betas), tuple(out), predicted, dual)


# --------------------------------------------------------------------------
# closed form for the periodic 2D Ising model


def ising2d_log_z(K: float, m: int, n: int) -> float:
    """Exact ``log Z`` of the ``m x n`` periodic Ising model ``exp(K sum s s)`` (Kaufman).

    Four Pfaffian terms: cosh/sinh products over odd and even transfer-matrix
    momenta, summed in the log domain.  The sinh product over even momenta
    carries the sign of ``gamma_0``, negative below the critical coupling.
    """
    if K <= 0:
        raise ValueError("the closed form needs a positive coupling")

    def gamma(k: int) -> float:
        if k == 0:
            return 2.0 * K + math.log(math.tanh(K))
        return math.acosh(math.cosh(2 * K) / math.tanh(2 * K) - math.cos(math.pi * k / n))

    odd = [gamma(2 * r + 1) for r in range(n)]
    even = [gamma(2 * r) for r in range(n)]

    def log_cosh_prod(gs):
        # log(2 cosh x) = |x| + log(1 + e^{-2|x|})
        return sum(abs(m * g / 2.0) + math.log1p(math.exp(-abs(m * g))) for g in gs), 1.0

    def log_sinh_prod(gs):
        # a vanishing factor (gamma_0 = 0 exactly at criticality) zeroes the term
        if any(g == 0.0 for g in gs):
            return -math.inf, 1.0
        sign = math.prod(1.0 if g > 0 else -1.0 for g in gs)
        return sum(abs(m * g / 2.0) + math.log(-math.expm1(-abs(m * g))) for g in gs), sign

    terms = [log_cosh_prod(odd), log_sinh_prod(odd), log_cosh_prod(even), log_sinh_prod(even)]
    top = max(t[0] for t in terms)
    total = sum(s * math.exp(v - top) for v, s in terms if v > -math.inf)
    return -LOG2 + 0.5 * m * n * math.log(2.0 * math.sinh(2.0 * K)) + top + math.log(total)


def ising2d_energy(K: float, L: int, h: float = 1e-6) -> float:
    """Exact ``-<sum s s> / L^2`` on the ``L x L`` torus by central differences of :func:`ising2d_log_z`."""
    return -(ising2d_log_z(K + h, L, L) - ising2d_log_z(K - h, L, L)) / (2 * h) / (L * L)
