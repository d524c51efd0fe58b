"""Synthesis of classical replica spin models from a code and a Pauli channel.

Each error generator ``P`` yields one interaction template, the support of
``E . Omega(P)``: a list of ``(species, offset)`` pairs.  Instantiated on a
torus this gives one bond per (cell, generator).  With ``F = n - 1`` spin
flavors the weight of a configuration is ``exp(sum_b K_b (S_b - T))`` where

    S_b = sum_m sign[m, b] B_m(b) + sign[F, b] prod_m B_m(b),

``B_m(b)`` is the product of flavor-``m`` spins on bond ``b``, ``K_b = mu/2``
and ``T`` is the number of terms per bond (``n`` with the replica product,
``n - 1`` without).  The shift by ``T`` keeps the weight finite at
``mu = inf``, where a bond becomes a hard constraint.  ``log_norm`` carries the
dropped constants so that ``tr rho^n = exp(log_norm) * sum(weights)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .channels import ChannelSpec, nishimori_coupling
from .codes import CodeSpec, ResolvedLogical
from .lattice import (
    Torus,
    WrapAroundWarning,
    all_f2_vectors,
    code_parameters,
    independent_rows_f2,
    instantiate,
    kernel_f2,
    rank_f2,
    split_zx,
    symplectic_product,
)
from .polyalg import LaurentPoly, PolyMatrix, antipode, excitation_map

LOG2 = math.log(2.0)
LISTING_VERSION = 1


class ModelError(ValueError):
    """Invalid model construction request."""


class TransparentGeneratorError(ModelError):
    """An error generator commutes with every stabilizer (``E . omega = 0``)."""


Site = tuple[int, tuple[int, ...]]


@dataclass(frozen=True)
class InteractionTerm:
    """Translation-invariant interaction template.

    ``sites`` pairs a species index (a stabilizer column of the code) with
    the cell offset of that spin relative to the bond's cell.
    """

    sites: tuple[Site, ...]
    source: str = ""

    def __post_init__(self) -> None:
        if not self.sites:
            raise ModelError("interaction term needs at least one site")

    @property
    def species_used(self) -> set[int]:
        return {s for s, _ in self.sites}


def interaction_from_error(E: PolyMatrix, omega: Sequence[LaurentPoly], source: str = "") -> InteractionTerm:
    """Read the interaction induced by error pattern ``omega`` off the excitation map."""
    out = E.apply(tuple(omega))
    sites = sorted((row, t) for row, poly in enumerate(out) for t in poly.terms)
    if not sites:
        raise TransparentGeneratorError(
            f"error {source or omega} commutes with every stabilizer and induces no interaction"
        )
    return InteractionTerm(tuple(sites), source)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SMModel:
    """Instantiated replica spin model; arrays are read-only.

    Spin ``cell * n_species + slot`` of each flavor; bond ``cell * n_templates + k``.
    """

    n: int
    torus: Torus
    species: tuple[str, ...]
    templates: tuple[InteractionTerm, ...]
    bond_ptr: np.ndarray
    bond_spins: np.ndarray
    coupling: np.ndarray
    signs: np.ndarray
    pinned: np.ndarray
    log_norm: float = 0.0
    replica_product: bool = True
    label: str = "model"
    code: CodeSpec | None = field(default=None, repr=False)
    error_patterns: tuple[tuple[LaurentPoly, ...], ...] | None = field(default=None, repr=False)
    species_cols: tuple[int, ...] | None = None
    kind: str = "replica"

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ModelError("replica count n must be at least 2")
        B = len(self.bond_ptr) - 1
        if self.coupling.shape != (B,) or self.signs.shape != (self.n, B) or self.pinned.shape != (B,):
            raise ModelError("bond arrays have inconsistent shapes")
        for name in ("bond_ptr", "bond_spins", "coupling", "signs", "pinned"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    # ---- sizes
    @property
    def n_flavors(self) -> int:
        return self.n - 1

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_spins(self) -> int:
        """Spins per flavor."""
        return self.torus.n_cells * self.n_species

    @property
    def n_bonds(self) -> int:
        return len(self.bond_ptr) - 1

    @property
    def n_terms(self) -> int:
        return self.n if self.replica_product else self.n - 1

    @property
    def n_templates(self) -> int:
        return len(self.templates)

    def bond(self, b: int) -> np.ndarray:
        return self.bond_spins[self.bond_ptr[b] : self.bond_ptr[b + 1]]

    def bond_source(self, b: int) -> tuple[int, int]:
        """(cell, template) that produced bond ``b``."""
        return divmod(b, self.n_templates)

    def spin_index(self, species: str | int, coord: Sequence[int]) -> int:
        slot = self.species.index(species) if isinstance(species, str) else species
        return self.torus.cell_index(coord) * self.n_species + slot

    # ---- structure
    def incidence(self) -> np.ndarray:
        """Binary (bonds x spins) matrix with a 1 where a spin enters a bond."""
        M = np.zeros((self.n_bonds, self.n_spins), dtype=np.uint8)
        rows = np.repeat(np.arange(self.n_bonds), np.diff(self.bond_ptr))
        M[rows, self.bond_spins] = 1
        return M

    def symmetry_generators(self) -> np.ndarray:
        """Spin-flip sets (rows) leaving every bond invariant, RREF basis."""
        return kernel_f2(self.incidence())

    # ---- evaluation
    def bond_values(self, spins: np.ndarray) -> np.ndarray:
        """``B_m(b)`` for spins of shape (..., F, n_spins) with entries +-1."""
        s = np.asarray(spins)
        bits = (s < 0).astype(np.int64)
        parity = (bits @ self.incidence().T.astype(np.int64)) % 2
        return 1 - 2 * parity

    def term_sums(self, spins: np.ndarray) -> np.ndarray:
        B = self.bond_values(spins)
        F = self.n_flavors
        S = (B * self.signs[:F]).sum(axis=-2)
        if self.replica_product:
            S = S + self.signs[F] * np.prod(B, axis=-2)
        return S

    def satisfied(self, spins: np.ndarray) -> np.ndarray:
        """Per bond: every flavor term (and product term) at +1."""
        B = self.bond_values(spins)
        F = self.n_flavors
        ok = np.all(B * self.signs[:F] == 1, axis=-2)
        if self.replica_product:
            ok &= self.signs[F] * np.prod(B, axis=-2) == 1
        return ok

    def log_weight(self, spins: np.ndarray) -> np.ndarray:
        """``sum_b K_b (S_b - T)``, ``-inf`` for violated infinite or pinned bonds."""
        S = self.term_sums(spins)
        deficit = S - self.n_terms
        K = self.coupling
        finite = np.isfinite(K)
        Kf = np.where(finite, K, 0.0)
        with np.errstate(invalid="ignore"):
            lw = (deficit * Kf).sum(axis=-1).astype(float)
        hard = (~finite) | self.pinned
        if hard.any():
            ok = self.satisfied(spins)[..., hard].all(axis=-1)
            lw = np.where(ok, lw, -np.inf)
        return lw

    def energy(self, spins: np.ndarray) -> np.ndarray:
        """``-sum_b K_b S_b`` for finite couplings."""
        return -(self.term_sums(spins) * self.coupling).sum(axis=-1)

    # ---- variants
    def with_couplings(self, beta: float | np.ndarray) -> SMModel:
        """Copy with ``K_b = beta/2`` (scalar) or an explicit per-bond array."""
        if np.isscalar(beta):
            K = np.full(self.n_bonds, float(beta) / 2.0)
        else:
            K = np.asarray(beta, dtype=float)
        return replace(self, coupling=K)

    def with_signs(self, signs: np.ndarray) -> SMModel:
        return replace(self, signs=np.asarray(signs, dtype=np.int8))

    def with_pinned(self, pinned: np.ndarray) -> SMModel:
        return replace(self, pinned=np.asarray(pinned, dtype=bool))

    def species_block(self, slot: int) -> np.ndarray:
        """Spin indices of one species, in cell order."""
        return np.arange(self.torus.n_cells) * self.n_species + slot


def _instantiate_templates(
    templates: Sequence[InteractionTerm], slot_of: dict[int, int], t: Torus
) -> tuple[np.ndarray, np.ndarray]:
    ns = len(slot_of)
    C = t.n_cells
    T = len(templates)
    inc = np.zeros((C * T, C * ns), dtype=np.uint8)
    cells = np.arange(C)
    for k, term in enumerate(templates):
        rows = cells * T + k
        for sp, off in term.sites:
            cols = t.shifted_cells(off) * ns + slot_of[sp]
            np.bitwise_xor.at(inc, (rows, cols), 1)
    counts = inc.sum(axis=1)
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    spins = np.nonzero(inc)[1].astype(np.int64)
    return ptr, spins


def build_model(
    templates: Sequence[InteractionTerm],
    species: Sequence[str],
    species_cols: Sequence[int],
    t: Torus,
    n: int,
    template_coupling: Sequence[float],
    *,
    log_norm: float = 0.0,
    replica_product: bool = True,
    label: str = "model",
    code: CodeSpec | None = None,
    error_patterns=None,
    kind: str = "replica",
) -> SMModel:
    slot_of = {c: i for i, c in enumerate(species_cols)}
    ptr, spins = _instantiate_templates(templates, slot_of, t)
    B = len(ptr) - 1
    K = np.tile(np.asarray(template_coupling, dtype=float), t.n_cells)
    return SMModel(
        n=n,
        torus=t,
        species=tuple(species),
        templates=tuple(templates),
        bond_ptr=ptr,
        bond_spins=spins,
        coupling=K,
        signs=np.ones((n, B), dtype=np.int8),
        pinned=np.zeros(B, dtype=bool),
        log_norm=log_norm,
        replica_product=replica_product,
        label=label,
        code=code,
        error_patterns=error_patterns,
        species_cols=tuple(species_cols),
        kind=kind,
    )


def channel_templates(code: CodeSpec, channel: ChannelSpec, *, allow_transparent: bool = False):
    if channel.l != code.l or channel.d != code.d:
        raise ModelError(f"channel cell ({channel.l}, d={channel.d}) does not fit code {code.name}")
    E = excitation_map(code.S)
    terms, gens = [], []
    for g in channel.generators:
        try:
            terms.append(interaction_from_error(E, g.pattern, g.name))
            gens.append(g)
        except TransparentGeneratorError:
            if not allow_transparent:
                raise
    if not terms:
        raise TransparentGeneratorError("every generator of the channel is transparent")
    return terms, gens


def replica_model(
    code: CodeSpec,
    channel: ChannelSpec,
    t: Torus | int,
    n: int = 2,
    *,
    species: str = "coupled",
    allow_transparent: bool = False,
) -> SMModel:
    """Replica model whose partition sum gives ``tr rho^n``.

    Only species touched by some interaction are kept unless ``species="all"``;
    the uncoupled ones are summed out into ``log_norm``.
    """
    if n < 2:
        raise ModelError("replica count n must be at least 2")
    t = code.torus(t) if isinstance(t, int) else t.with_l(code.l)
    terms, gens = channel_templates(code, channel, allow_transparent=allow_transparent)
    used = sorted(set().union(*(term.species_used for term in terms)))
    cols = list(range(code.m)) if species == "all" else used
    params = code_parameters(code, t)
    n_free = (code.m - len(cols)) * t.n_cells
    log_norm = -(n - 1) * (params.N + params.N_c - n_free) * LOG2
    return build_model(
        terms,
        [code.species[c] for c in cols],
        cols,
        t,
        n,
        [g.mu / 2.0 for g in gens],
        log_norm=log_norm,
        label=f"{code.name}/{channel.name}",
        code=code,
        error_patterns=tuple(g.pattern for g in gens),
    )


# --------------------------------------------------------------------------
# species reduction

XCUBE_ACAT_RELATIONS = (("eta", ("sigma", "tau")),)


def preset_relations(code_name: str) -> tuple[tuple[str, tuple[str, ...]], ...]:
    return XCUBE_ACAT_RELATIONS if code_name == "xcube" else ()


def reduce_species(model: SMModel, relations: Iterable[tuple[str, Sequence[str]]]) -> SMModel:
    """Eliminate species using product identities ``elim = prod(others)``.

    The identity is usable only when flipping ``elim`` and all ``others`` in
    a single cell leaves every term unchanged; the sum then factorizes into
    gauge orbits of size ``2^(cells)`` per flavor, recorded in ``log_norm``.
    """
    relations = list(relations)
    if not relations:
        return model
    templates = list(model.templates)
    species = list(model.species)
    cols = list(model.species_cols or range(len(species)))
    log_norm = model.log_norm
    for elim, others in relations:
        if elim not in species or any(o not in species for o in others):
            raise ModelError(f"relation {elim} = {'*'.join(others)} names unknown species")
        e_col = cols[species.index(elim)]
        o_cols = [cols[species.index(o)] for o in others]
        flip = {e_col, *o_cols}
        for term in templates:
            by_off: dict[tuple[int, ...], int] = {}
            for sp, off in term.sites:
                if sp in flip:
                    by_off[off] = by_off.get(off, 0) + 1
            if any(c % 2 for c in by_off.values()):
                raise ModelError(
                    f"relation {elim} = {'*'.join(others)} is not a symmetry of term {term.source}"
                )
        new_templates = []
        for term in templates:
            acc: set[Site] = set()
            for sp, off in term.sites:
                repl = [(o, off) for o in o_cols] if sp == e_col else [(sp, off)]
                for site in repl:
                    acc ^= {site}
            new_templates.append(InteractionTerm(tuple(sorted(acc)), term.source))
        templates = new_templates
        k = species.index(elim)
        species.pop(k)
        cols.pop(k)
        log_norm += model.n_flavors * model.torus.n_cells * LOG2
    return build_model(
        templates,
        species,
        cols,
        model.torus,
        model.n,
        model.coupling[: model.n_templates],
        log_norm=log_norm,
        replica_product=model.replica_product,
        label=model.label + "/reduced",
        code=model.code,
        error_patterns=model.error_patterns,
        kind=model.kind,
    )


# --------------------------------------------------------------------------
# error instances, defects, pinning


def error_instances(model: SMModel) -> np.ndarray:
    """Instantiated Pauli vector (rows, ``2l * cells`` wide) of every bond's error."""
    if model.error_patterns is None or model.code is None:
        raise ModelError("model does not record its error generators")
    t = model.torus
    l = model.code.l
    C, T = t.n_cells, model.n_templates
    out = np.zeros((C * T, C * 2 * l), dtype=np.uint8)
    for k, pat in enumerate(model.error_patterns):
        rows = np.arange(C) * T + k
        for i, poly in enumerate(pat):
            for e in poly.terms:
                np.bitwise_xor.at(out, (rows, t.shifted_cells(e) * 2 * l + i), 1)
    return out


def _qubit_support(vecs: np.ndarray, l: int) -> np.ndarray:
    z, x = split_zx(vecs, l)
    return (z | x).astype(bool)


def defect_model(
    model: SMModel,
    logicals: Sequence[ResolvedLogical],
    selector,
    *,
    rule: str = "commutation",
) -> SMModel:
    """Flip bond signs according to logical operators chosen per flavor.

    ``selector`` has shape ``(n - 1, len(logicals))``; row ``m`` picks the
    logicals multiplied into flavor ``m``.  With ``rule="commutation"`` a bond
    flips when its error anticommutes with that product, which is exactly the
    insertion of the logical into the stabilizer sum.  With ``rule="support"``
    a bond flips when its error lies inside the product's qubit support,
    which draws the defect along the logical itself.
    """
    sel = np.atleast_2d(np.asarray(selector, dtype=np.uint8) % 2)
    F, k = model.n_flavors, len(logicals)
    if sel.shape != (F, k):
        raise ModelError(f"selector shape {sel.shape} does not match (n-1, logicals) = {(F, k)}")
    if not sel.any():
        return model
    if rule not in ("commutation", "support"):
        raise ModelError(f"unknown defect rule {rule!r}")
    l = model.code.l
    errs = error_instances(model)
    V = np.array([lg.vector for lg in logicals], dtype=np.uint8)
    signs = model.signs.astype(np.int8).copy()
    prod_flip = np.zeros(model.n_bonds, dtype=bool)
    for m in range(F):
        if not sel[m].any():
            continue
        L_m = (sel[m].astype(np.int64) @ V.astype(np.int64) % 2).astype(np.uint8)
        if rule == "commutation":
            flip = symplectic_product(errs, L_m, l)[:, 0].astype(bool)
        else:
            sup = _qubit_support(L_m[None, :], l)[0]
            esup = _qubit_support(errs, l)
            flip = ~np.any(esup & ~sup, axis=1)
        signs[m, flip] *= -1
        prod_flip ^= flip
    signs[F, prod_flip] *= -1
    return replace(model, signs=signs, label=model.label + "/defect")


def line_defect(model: SMModel, bonds: Iterable[int]) -> SMModel:
    """Flip the flavor-0 sign (and the product sign) on an explicit bond list."""
    signs = model.signs.astype(np.int8).copy()
    idx = np.fromiter(bonds, dtype=np.int64)
    signs[0, idx] *= -1
    signs[model.n_flavors, idx] *= -1
    return replace(model, signs=signs, label=model.label + "/line")


BOUNDARY_PRESETS = {
    ("toric2d", "Z"): "inplane",
    ("toric2d", "X"): "normal",
    ("toric3d", "Z"): "inplane",
    ("toric3d", "X"): "normal",
    ("xcube", "Z"): "normal",
    ("xcube", "X"): "inplane",
}


def half_space_boundary(
    model: SMModel, axis: int = 0, width: int | None = None, style: str | None = None
) -> np.ndarray:
    """Qubits cut by the two walls of the slab ``0 <= u[axis] < width``.

    ``inplane`` picks edges lying inside the wall planes ``u[axis] in {0, width}``
    (rough cut for phase errors); ``normal`` picks edges along ``axis``
    that cross a wall (smooth cut for bit flips).  The style defaults to the
    preset for the model's code and error type.
    """
    t = model.torus
    L = t.dims[axis]
    width = L // 2 if width is None else width
    if not 0 < width < L:
        raise ModelError(f"region width {width} leaves an empty or full region on L={L}")
    code = model.code
    if style is None:
        kinds = {_pattern_kind(p, code.l) for p in model.error_patterns}
        key = (code.name, next(iter(kinds)))
        if len(kinds) != 1 or key not in BOUNDARY_PRESETS:
            raise ModelError("no boundary preset for this code and channel; pass style explicitly")
        style = BOUNDARY_PRESETS[key]
    if style not in ("inplane", "normal"):
        raise ModelError(f"unknown boundary style {style!r}")
    u = t.coords[:, axis]
    qubits = []
    for cell in range(t.n_cells):
        for q in range(code.l):
            if style == "inplane" and q != axis and u[cell] in (0, width):
                qubits.append(cell * code.l + q)
            if style == "normal" and q == axis and u[cell] in (width - 1, L - 1):
                qubits.append(cell * code.l + q)
    return np.array(qubits, dtype=np.int64)


def _pattern_kind(pattern, l: int) -> str:
    has_z = any(p.terms for p in pattern[:l])
    has_x = any(p.terms for p in pattern[l:])
    return "mixed" if has_z and has_x else ("Z" if has_z else "X")


def pinned_model(model: SMModel, boundary_qubits: Iterable[int]) -> SMModel:
    """Force satisfied every bond whose error touches a boundary qubit."""
    q = np.fromiter(boundary_qubits, dtype=np.int64)
    if q.size == 0:
        raise ModelError("empty boundary: region has no cut")
    mask = np.zeros(model.torus.n_cells * model.code.l, dtype=bool)
    mask[q] = True
    esup = _qubit_support(error_instances(model), model.code.l)
    pinned = model.pinned | np.any(esup & mask, axis=1)
    return replace(model, pinned=pinned, label=model.label + "/pinned")


# --------------------------------------------------------------------------
# error-string (random-bond) picture


def random_bond_model(
    code: CodeSpec,
    channel: ChannelSpec,
    t: Torus | int,
    n: int = 2,
    errors: Iterable[int] | np.ndarray | None = None,
) -> SMModel:
    """Random-bond model for a fixed error configuration.

    Spins sit on the stabilizers that generate equivalent error chains, so
    an X error on a qubit maps to the interaction of a Z on that qubit (and
    vice versa).  Coupling ``J`` obeys ``exp(-2J) = p/(1-p)``; bonds hit by
    ``errors`` (indices ``cell * n_generators + k``, or a boolean mask) get
    sign -1 on every flavor term.  There is no inter-flavor product term.
    """
    t = code.torus(t) if isinstance(t, int) else t.with_l(code.l)
    dual = []
    for g in channel.generators:
        if g.kind == "mixed":
            raise ModelError(f"random-bond picture needs pure X or Z generators, got {g.name}")
        l = g.l
        dual.append(replace(g, pattern=tuple(g.pattern[l:]) + tuple(g.pattern[:l]), name=g.name))
    swapped = ChannelSpec(tuple(dual), channel.name)
    terms, gens = channel_templates(code, swapped)
    used = sorted(set().union(*(term.species_used for term in terms)))
    model = build_model(
        terms,
        [code.species[c] for c in used],
        used,
        t,
        n,
        [nishimori_coupling(g.p) for g in channel.generators],
        replica_product=False,
        label=f"{code.name}/{channel.name}/rb",
        code=code,
        error_patterns=tuple(g.pattern for g in channel.generators),
        kind="random_bond",
    )
    mask = error_mask(model, errors)
    if mask.any():
        signs = model.signs.copy()
        signs[:, mask] = -1
        model = replace(model, signs=signs)
    return model


def error_mask(model: SMModel, errors) -> np.ndarray:
    if errors is None:
        return np.zeros(model.n_bonds, dtype=bool)
    arr = np.asarray(errors if not isinstance(errors, (set, frozenset)) else sorted(errors))
    if arr.dtype == bool:
        if arr.shape != (model.n_bonds,):
            raise ModelError("error mask has the wrong length")
        return arr.copy()
    mask = np.zeros(model.n_bonds, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


def sample_errors(model: SMModel, p: float | np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli error on every bond."""
    pb = np.broadcast_to(np.asarray(p, dtype=float), (model.n_bonds,))
    return rng.random(model.n_bonds) < pb


def error_log_probability(errors: np.ndarray, p: float) -> float:
    """Log of ``p^|C| (1-p)^(M-|C|)`` for a boolean error mask."""
    k = int(np.count_nonzero(errors))
    M = errors.size
    if p in (0.0, 1.0):
        return 0.0 if (k == 0 and p == 0.0) or (k == M and p == 1.0) else -math.inf
    return k * math.log(p) + (M - k) * math.log1p(-p)


# --------------------------------------------------------------------------
# Kramers-Wannier duality


CLASSICAL_MODELS = ("ising1d", "ising2d", "ising3d")


def classical_model_matrix(name: str) -> PolyMatrix:
    """Species x bond-type matrix of a named single-species classical model."""
    d = {"ising1d": 1, "ising2d": 2, "ising3d": 3}.get(name)
    if d is None:
        raise ModelError(f"unknown classical model {name!r}")
    cols = []
    for a in range(d):
        e = [0] * d
        e[a] = 1
        cols.append([LaurentPoly.one(d) + LaurentPoly.monomial(e)])
    return PolyMatrix.from_columns(cols, d)


def model_matrix(model: SMModel) -> PolyMatrix:
    """Species x template polynomial matrix of a model (its classical ``S_c``)."""
    d = model.torus.d
    cols = model.species_cols or tuple(range(model.n_species))
    slot = {c: i for i, c in enumerate(cols)}
    columns = []
    for term in model.templates:
        col = [LaurentPoly.zero(d) for _ in cols]
        for sp, off in term.sites:
            col[slot[sp]] = col[slot[sp]] + LaurentPoly.monomial(off)
        columns.append(col)
    return PolyMatrix.from_columns(columns, d)


def classical_sm(S_c: PolyMatrix, t: Torus, beta: float = 0.0, label: str = "classical") -> SMModel:
    """Single-flavor model with one bond per (cell, column of ``S_c``), coupling ``beta``.

    Weights are ``exp(beta * sum_b B_b)`` up to the constant ``exp(beta * bonds)``.
    """
    d = S_c.d
    templates = []
    for j, col in enumerate(S_c.columns()):
        sites = tuple(sorted((i, e) for i, p in enumerate(col) for e in p.terms))
        templates.append(InteractionTerm(sites, f"b{j}"))
    model = build_model(
        templates,
        [f"s{i}" for i in range(S_c.rows)],
        list(range(S_c.rows)),
        t.with_l(1) if t.d == d else Torus(t.dims, 1),
        2,
        [beta] * len(templates),
        replica_product=False,
        label=label,
        kind="classical",
    )
    return model


def model_from_incidence(inc: np.ndarray, t: Torus, beta: float, label: str) -> SMModel:
    """Single-flavor model given an explicit (terms x spins) incidence matrix."""
    inc = np.asarray(inc, dtype=np.uint8)
    B, Nsp = inc.shape
    ptr = np.concatenate([[0], np.cumsum(inc.sum(axis=1))]).astype(np.int64)
    spins = np.nonzero(inc)[1].astype(np.int64)
    if Nsp < 2:
        raise ModelError("explicit model needs at least two spins")
    return SMModel(
        n=2,
        torus=Torus((Nsp,)),
        species=("g",),
        templates=(InteractionTerm(((0, (0,)),), "explicit"),),
        bond_ptr=ptr,
        bond_spins=spins,
        coupling=np.full(B, float(beta)),
        signs=np.ones((2, B), dtype=np.int8),
        pinned=np.zeros(B, dtype=bool),
        replica_product=False,
        label=label,
        kind="explicit",
    )


def _box_kernel_templates(S_c: PolyMatrix, width: int) -> list[tuple[LaurentPoly, ...]]:
    """Nonzero bond-space polynomial vectors with support in ``[0, width]^d`` killed by ``S_c``."""
    d = S_c.d
    offsets = list(itertools.product(range(width + 1), repeat=d))
    unknowns = [(j, a) for j in range(S_c.cols) for a in offsets]
    rows: dict[tuple[int, tuple[int, ...]], int] = {}
    entries = []
    for u, (j, a) in enumerate(unknowns):
        for i in range(S_c.rows):
            for e in S_c[i, j].terms:
                key = (i, tuple(x + y for x, y in zip(e, a)))
                r = rows.setdefault(key, len(rows))
                entries.append((r, u))
    M = np.zeros((max(len(rows), 1), len(unknowns)), dtype=np.uint8)
    for r, u in entries:
        M[r, u] ^= 1
    K = kernel_f2(M)
    if K.shape[0] == 0:
        return []
    if K.shape[0] > 16:
        raise ModelError("local kernel search space too large; reduce the box width")
    cands = []
    for c in all_f2_vectors(K.shape[0])[1:]:
        v = (c.astype(np.int64) @ K.astype(np.int64)) % 2
        cols = [[] for _ in range(S_c.cols)]
        for u in np.nonzero(v)[0]:
            j, a = unknowns[u]
            cols[j].append(a)
        # translate so the lexicographically smallest monomial sits at the origin
        lo = min(a for col in cols for a in col)
        vec = tuple(
            LaurentPoly.from_terms([tuple(x - y for x, y in zip(a, lo)) for a in col], d) for col in cols
        )
        cands.append((int(v.sum()), tuple(sorted((j, a) for j, col in enumerate(cols) for a in col)), vec))
    cands.sort(key=lambda c: (c[0], c[1]))
    seen, out = set(), []
    for _, _, vec in cands:
        key = tuple(frozenset(p.terms) for p in vec)
        if key not in seen:
            seen.add(key)
            out.append(vec)
    return out


@dataclass
class KWDual:
    """Generators of the loop space of a classical model and the dual model they define."""

    S_c: PolyMatrix
    torus: Torus
    local_templates: tuple[tuple[LaurentPoly, ...], ...]
    generators: np.ndarray  # (n_gen, bonds)
    n_local: int
    rank: int
    kernel_dim: int
    n_spins: int

    @property
    def degenerate(self) -> bool:
        return self.n_local == 0

    @property
    def n_generators(self) -> int:
        return self.generators.shape[0]

    @property
    def n_bonds(self) -> int:
        return self.generators.shape[1]

    def dual_terms(self) -> PolyMatrix:
        """Dual interaction templates: rows are local dual species, columns bond types."""
        if not self.local_templates:
            raise ModelError("dual has no local generators")
        rows = [[antipode(p) for p in tmpl] for tmpl in self.local_templates]
        return PolyMatrix.from_rows(rows, self.S_c.d)

    def dual_model(self, beta_star: float) -> SMModel:
        return model_from_incidence(self.generators.T, self.torus, beta_star, "kw_dual")


def kw_dual(S_c: PolyMatrix, t: Torus, *, width: int = 1) -> KWDual:
    """Kramers-Wannier dual of the classical model ``S_c`` on the torus ``t``.

    Local loop generators come from a box-restricted kernel search on the
    infinite lattice, chosen greedily modulo translations; winding loops of
    the finite torus complete them to a generating set of the full kernel.
    """
    t1 = Torus(t.dims, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WrapAroundWarning)
        M = instantiate(S_c, t1)
        probe = Torus((max(width + 3, 4),) * S_c.d, 1)
        chosen: list[tuple[LaurentPoly, ...]] = []
        span = np.zeros((0, probe.n_cells * S_c.cols), dtype=np.uint8)
        span_rank = 0
        for vec in _box_kernel_templates(S_c, width):
            trans = instantiate(PolyMatrix.from_columns([vec], S_c.d), probe).T
            grown = np.vstack([span, trans])
            r = rank_f2(grown)
            if r > span_rank:
                chosen.append(vec)
                span, span_rank = grown, r
        local = [
            instantiate(PolyMatrix.from_columns([vec], S_c.d), t1).T for vec in chosen
        ]
    # generator rows ordered cell-major within each template
    G_local = np.vstack(local) if local else np.zeros((0, M.shape[1]), dtype=np.uint8)
    kern = kernel_f2(M)
    extra = independent_rows_f2(kern, base=G_local if G_local.size else None)
    G = np.vstack([G_local, kern[extra]]) if extra else G_local
    rank = rank_f2(G) if G.size else 0
    return KWDual(
        S_c=S_c,
        torus=t1,
        local_templates=tuple(chosen),
        generators=G.astype(np.uint8),
        n_local=G_local.shape[0],
        rank=rank,
        kernel_dim=kern.shape[0],
        n_spins=M.shape[0],
    )


# --------------------------------------------------------------------------
# canonical structure and listings


def _normalize_offsets(sites: Iterable[Site]) -> frozenset[Site]:
    sites = list(sites)
    lo = min(off for _, off in sites)
    return frozenset((sp, tuple(a - b for a, b in zip(off, lo))) for sp, off in sites)


def term_shapes(terms: Iterable[Iterable[Site]]) -> list[frozenset[Site]]:
    """Translation-normalized term supports, sorted for comparison."""
    return sorted((_normalize_offsets(t) for t in terms), key=lambda s: sorted(s))


def same_structure(a: Iterable[Iterable[Site]], b: Iterable[Iterable[Site]]) -> bool:
    """Term multisets equal up to translation of each term and species relabelling."""
    a = [list(t) for t in a]
    b = [list(t) for t in b]
    if len(a) != len(b):
        return False
    sa = sorted({sp for t in a for sp, _ in t})
    sb = sorted({sp for t in b for sp, _ in t})
    if len(sa) != len(sb):
        return False
    target = sorted(sorted(s) for s in term_shapes(b))
    for perm in itertools.permutations(sb):
        mp = dict(zip(sa, perm))
        mapped = [[(mp[sp], off) for sp, off in t] for t in a]
        if sorted(sorted(s) for s in term_shapes(mapped)) == target:
            return True
    return False


def polymatrix_terms(M: PolyMatrix) -> list[list[Site]]:
    """Columns of a species x bond-type matrix as site lists."""
    return [[(i, e) for i, p in enumerate(col) for e in p.terms] for col in M.columns()]


def model_terms(model: SMModel) -> list[list[Site]]:
    return [list(t.sites) for t in model.templates]


def _fmt_offset(off: tuple[int, ...]) -> str:
    return "(" + ",".join(str(o) for o in off) + ")"


def _fmt_coupling(K: float) -> str:
    return "inf" if math.isinf(K) else f"{K:.6f}"


def listing(model: SMModel) -> str:
    """Canonical text listing of a model; stable across runs and platforms."""
    lines = [
        f"# stabsm model listing v{LISTING_VERSION}",
        f"model {model.label}",
        f"kind {model.kind}",
        f"n {model.n}",
        f"torus {'x'.join(str(L) for L in model.torus.dims)}",
        f"replica_product {'yes' if model.replica_product else 'no'}",
        "species " + " ".join(model.species),
    ]
    cols = model.species_cols or tuple(range(model.n_species))
    name_of = {c: model.species[i] for i, c in enumerate(cols)}
    for k, term in enumerate(model.templates):
        sites = " ".join(f"{name_of[sp]}@{_fmt_offset(off)}" for sp, off in sorted(term.sites))
        lines.append(f"term {k} {term.source} K={_fmt_coupling(model.coupling[k])} : {sites}")
    neg = [(m, b) for m, b in zip(*np.nonzero(model.signs < 0))]
    lines.append(f"negative_signs {len(neg)}")
    for m, b in neg:
        lines.append(f"  sign flavor={m} bond={b}")
    pins = np.nonzero(model.pinned)[0]
    lines.append(f"pinned {len(pins)}")
    for b in pins:
        lines.append(f"  pin bond={b}")
    return "\n".join(lines) + "\n"


def parse_listing(text: str) -> dict:
    """Read back the structural part of a listing (for comparison and diagnostics)."""
    out: dict = {"terms": [], "negative": [], "pinned": []}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        if head == "term":
            meta, _, sites = rest.partition(" : ")
            parts = meta.split()
            out["terms"].append({"index": int(parts[0]), "source": parts[1], "K": parts[2][2:], "sites": sites.split()})
        elif head == "sign":
            kv = dict(p.split("=") for p in rest.split())
            out["negative"].append((int(kv["flavor"]), int(kv["bond"])))
        elif head == "pin":
            out["pinned"].append(int(rest.split("=")[1]))
        else:
            out[head] = rest
    return out
