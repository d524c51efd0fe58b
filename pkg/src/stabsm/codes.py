"""Built-in translation-invariant stabilizer codes and their logical operators.

Qubit sublabels per unit cell: for the toric codes and X-cube, qubit ``a``
sits on the edge leaving the cell's vertex along axis ``a``.  Stabilizer
columns are listed Z-type first, so the species order of derived models is
stable (toric3d: three plaquette types then the vertex; xcube: the three
vertex flavors then the cube).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    Torus,
    WrapAroundWarning,
    code_parameters,
    independent_rows_f2,
    instantiate,
    join_zx,
    rank_f2,
    split_zx,
    symplectic_product,
)
from .polyalg import PolyMatrix, commute_check


class CodeError(ValueError):
    """Raised for malformed codes or operations a code does not support."""


@dataclass(frozen=True)
class LogicalPattern:
    """A straight Pauli string or membrane on one sublattice qubit.

    ``free_axes`` are the torus directions the pattern extends along; the
    remaining coordinates are held at ``anchor`` (default all zero).  With
    ``sweep`` set the template is translated to every anchor, and the
    resulting raw operators go through independence selection.
    """

    label: str
    pauli: str
    qubit: int
    free_axes: tuple[int, ...]
    partner: str | None = None
    anchor: tuple[int, ...] | None = None
    sweep: bool = False

    def __post_init__(self) -> None:
        if self.pauli not in ("X", "Y", "Z"):
            raise CodeError(f"logical {self.label}: Pauli must be X, Y or Z")

    def _vector(self, t: Torus, fixed: dict[int, int]) -> np.ndarray:
        z = np.zeros(t.n_qubits, dtype=np.uint8)
        x = np.zeros(t.n_qubits, dtype=np.uint8)
        mask = np.ones(t.n_cells, dtype=bool)
        for ax, val in fixed.items():
            mask &= t.coords[:, ax] == val % t.dims[ax]
        q = np.nonzero(mask)[0] * t.l + self.qubit
        if self.pauli in ("Z", "Y"):
            z[q] = 1
        if self.pauli in ("X", "Y"):
            x[q] = 1
        return join_zx(z, x, t.l)

    def instances(self, t: Torus) -> list[tuple[str, np.ndarray]]:
        if self.qubit >= t.l:
            raise CodeError(f"logical {self.label}: qubit {self.qubit} outside cell of {t.l}")
        fixed_axes = [a for a in range(t.d) if a not in self.free_axes]
        if not self.sweep:
            anchor = self.anchor or (0,) * len(fixed_axes)
            return [(self.label, self._vector(t, dict(zip(fixed_axes, anchor))))]
        out = []
        for pos in itertools.product(*[range(t.dims[a]) for a in fixed_axes]):
            tag = ",".join(str(p) for p in pos)
            out.append((f"{self.label}[{tag}]", self._vector(t, dict(zip(fixed_axes, pos)))))
        return out


@dataclass(frozen=True)
class ResolvedLogical:
    label: str
    partner: str
    vector: np.ndarray = field(repr=False, compare=False)
    source: tuple[str, ...] = ()


@dataclass(frozen=True)
class CodeSpec:
    name: str
    d: int
    l: int
    S: PolyMatrix
    logicals: tuple[LogicalPattern, ...] = ()
    species_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.S.rows != 2 * self.l:
            raise CodeError(f"{self.name}: S has {self.S.rows} rows, expected {2 * self.l}")
        if self.S.d != self.d:
            raise CodeError(f"{self.name}: S dimension {self.S.d} differs from d={self.d}")
        if not commute_check(self.S):
            raise CodeError(f"{self.name}: stabilizers do not commute")
        if self.species_names is not None and len(self.species_names) != self.S.cols:
            raise CodeError(f"{self.name}: need one species name per stabilizer column")

    @property
    def m(self) -> int:
        return self.S.cols

    @property
    def type_labels(self) -> tuple[str, ...]:
        out = []
        for col in self.S.columns():
            has_z = any(not p.is_zero() for p in col[: self.l])
            has_x = any(not p.is_zero() for p in col[self.l :])
            out.append("mixed" if has_z and has_x else ("Z" if has_z else "X"))
        return tuple(out)

    @property
    def css(self) -> bool:
        return "mixed" not in self.type_labels

    @property
    def species(self) -> tuple[str, ...]:
        if self.species_names is not None:
            return self.species_names
        return tuple(f"s{j}" for j in range(self.m))

    def torus(self, L: int | tuple[int, ...]) -> Torus:
        dims = (L,) * self.d if isinstance(L, int) else tuple(L)
        return Torus(dims, self.l)


# --------------------------------------------------------------------------
# registry


def _toric2d() -> CodeSpec:
    S = PolyMatrix.from_columns(
        [
            ("1 + y", "1 + x", "0", "0"),
            ("0", "0", "1 + x^-1", "1 + y^-1"),
        ],
        d=2,
    )
    logicals = (
        LogicalPattern("Z1", "Z", 0, (0,), partner="X1"),
        LogicalPattern("X1", "X", 0, (1,), partner="Z1"),
        LogicalPattern("Z2", "Z", 1, (1,), partner="X2"),
        LogicalPattern("X2", "X", 1, (0,), partner="Z2"),
    )
    return CodeSpec("toric2d", 2, 2, S, logicals, ("plaquette", "vertex"))


def _toric3d() -> CodeSpec:
    S = PolyMatrix.from_columns(
        [
            ("1 + y", "1 + x", "0", "0", "0", "0"),
            ("1 + z", "0", "1 + x", "0", "0", "0"),
            ("0", "1 + z", "1 + y", "0", "0", "0"),
            ("0", "0", "0", "1 + x^-1", "1 + y^-1", "1 + z^-1"),
        ],
        d=3,
    )
    logicals = []
    for a, name in enumerate("xyz"):
        membrane = tuple(b for b in range(3) if b != a)
        logicals.append(LogicalPattern(f"Z{name}", "Z", a, (a,), partner=f"X{name}"))
        logicals.append(LogicalPattern(f"X{name}", "X", a, membrane, partner=f"Z{name}"))
    return CodeSpec(
        "toric3d", 3, 3, S, tuple(logicals), ("plaquette_xy", "plaquette_xz", "plaquette_yz", "vertex")
    )


def _xcube() -> CodeSpec:
    S = PolyMatrix.from_columns(
        [
            ("1 + x^-1", "1 + y^-1", "0", "0", "0", "0"),
            ("1 + x^-1", "0", "1 + z^-1", "0", "0", "0"),
            ("0", "1 + y^-1", "1 + z^-1", "0", "0", "0"),
            ("0", "0", "0", "1 + y + z + y*z", "1 + x + z + x*z", "1 + x + y + x*y"),
        ],
        d=3,
    )
    logicals = []
    # Z strings first so that pairing keeps the CSS split
    for mu, nu in itertools.permutations(range(3), 2):
        logicals.append(LogicalPattern(f"Z{'xyz'[mu]}{'xyz'[nu]}", "Z", mu, (nu,), sweep=True))
    for mu in range(3):
        logicals.append(LogicalPattern(f"X{'xyz'[mu]}", "X", mu, (mu,), sweep=True))
    return CodeSpec("xcube", 3, 3, S, tuple(logicals), ("sigma", "tau", "eta", "cube"))


def _cblt() -> CodeSpec:
    S = PolyMatrix.from_columns([("1 + x + z + x*z^-1", "1 + x + y + x*y^-1")], d=3)
    return CodeSpec("cblt", 3, 1, S, (), ("s",))


_BUILTINS = {"toric2d": _toric2d, "toric3d": _toric3d, "xcube": _xcube, "cblt": _cblt}


def builtin_names() -> tuple[str, ...]:
    return tuple(_BUILTINS)


def builtin(name: str) -> CodeSpec:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise CodeError(f"unknown code {name!r}; choose from {', '.join(_BUILTINS)}") from None


# --------------------------------------------------------------------------
# instantiated structure


def stabilizer_matrix(code: CodeSpec, t: Torus) -> np.ndarray:
    """Instantiated stabilizers as rows (``cell * m + j``) of Pauli vectors."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WrapAroundWarning)
        return instantiate(code.S, t.with_l(code.l)).T.copy()


def chain_complex(code: CodeSpec, t: Torus) -> tuple[np.ndarray, np.ndarray]:
    """Parity-check matrices ``(H_X, H_Z)`` with one qubit per column."""
    if not code.css:
        raise CodeError(f"{code.name} is not a CSS code")
    t = t.with_l(code.l)
    stabs = stabilizer_matrix(code, t)
    types = np.tile(np.array(code.type_labels), t.n_cells)
    z, x = split_zx(stabs, code.l)
    H_X = x[types == "X"]
    H_Z = z[types == "Z"]
    overlap = (H_X.astype(np.int64) @ H_Z.T.astype(np.int64)) % 2
    if np.any(overlap):
        raise CodeError(f"{code.name}: H_X H_Z^T is nonzero")
    return H_X, H_Z


def homology_logical_count(code: CodeSpec, t: Torus) -> int:
    H_X, H_Z = chain_complex(code, t)
    return t.with_l(code.l).n_qubits - rank_f2(H_X) - rank_f2(H_Z)


def _raw_candidates(code: CodeSpec, t: Torus) -> list[tuple[str, str | None, np.ndarray]]:
    out = []
    for pat in code.logicals:
        for label, vec in pat.instances(t):
            out.append((label, pat.partner, vec))
    return out


def _symplectic_pairs(vecs: np.ndarray, l: int) -> list[tuple[int, int, np.ndarray, np.ndarray]]:
    """Symplectic Gram-Schmidt; returns (i, j, a, b) with a, b the paired vectors."""
    work = [v.copy() for v in vecs]
    alive = list(range(len(work)))
    pairs = []
    while alive:
        i = alive[0]
        a = work[i]
        js = [j for j in alive[1:] if symplectic_product(a, work[j], l)[0, 0]]
        if not js:
            raise CodeError("logical set is degenerate: an operator commutes with all others")
        j = js[0]
        b = work[j]
        alive = [k for k in alive if k not in (i, j)]
        for k in alive:
            v = work[k]
            ca = symplectic_product(v, a, l)[0, 0]
            cb = symplectic_product(v, b, l)[0, 0]
            if cb:
                v = v ^ a
            if ca:
                v = v ^ b
            work[k] = v
        pairs.append((i, j, a, b))
    return pairs


def logicals(code: CodeSpec, t: Torus) -> list[ResolvedLogical]:
    """Independent, symplectically paired logical operators on ``t``.

    Raw patterns are scanned in declaration order (and anchor order for swept
    templates); a pattern is kept only if it is independent of the stabilizer
    group and of earlier picks.  The survivors are paired by symplectic
    Gram-Schmidt, so operator ``2k`` and ``2k+1`` are partners.
    """
    if not code.logicals:
        raise CodeError(f"{code.name} ships without logical operators")
    t = t.with_l(code.l)
    raw = _raw_candidates(code, t)
    stabs = stabilizer_matrix(code, t)
    keep = independent_rows_f2(np.array([v for _, _, v in raw]), base=stabs)
    chosen = [raw[k] for k in keep]
    vecs = np.array([v for _, _, v in chosen])
    out: list[ResolvedLogical] = []
    for i, j, a, b in _symplectic_pairs(vecs, code.l):
        la, lb = _clean_label(chosen[i][0], a, code.l), _clean_label(chosen[j][0], b, code.l)
        out.append(ResolvedLogical(la, lb, a, (chosen[i][0],)))
        out.append(ResolvedLogical(lb, la, b, (chosen[j][0],)))
    return out


def _clean_label(raw_label: str, vec: np.ndarray, l: int) -> str:
    z, x = split_zx(vec, l)
    kind = "Z" if not x.any() else ("X" if not z.any() else "L")
    return raw_label if raw_label.startswith(kind) else f"{kind}~{raw_label}"


@dataclass
class LogicalReport:
    code: str
    dims: tuple[int, ...]
    logical_count: int
    selected: int
    raw: int
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_logicals(code: CodeSpec, t: Torus, *, strict: bool = False) -> LogicalReport:
    """Check commutation, partner structure and independence of the logicals."""
    t = t.with_l(code.l)
    failures: list[str] = []
    raw = _raw_candidates(code, t)
    stabs = stabilizer_matrix(code, t)
    for label, _, v in raw:
        if symplectic_product(v[None, :], stabs, code.l).any():
            failures.append(f"{label}: anticommutes with a stabilizer")
    # declared partners of unswept templates must anticommute
    fixed = {lab: v for (lab, _, v), pat in zip(raw, _pattern_per_raw(code, t)) if not pat.sweep}
    for pat in code.logicals:
        if pat.sweep or pat.partner is None:
            continue
        if pat.partner not in fixed:
            failures.append(f"{pat.label}: partner {pat.partner} not declared")
        elif not symplectic_product(fixed[pat.label], fixed[pat.partner], code.l)[0, 0]:
            failures.append(f"{pat.label}: commutes with its partner {pat.partner}")
    n_log = code_parameters(code, t).logical_count
    resolved: list[ResolvedLogical] = []
    if not failures:
        try:
            resolved = logicals(code, t)
        except CodeError as exc:
            failures.append(str(exc))
    if resolved:
        V = np.array([r.vector for r in resolved])
        gram = symplectic_product(V, V, code.l)
        target = np.zeros_like(gram)
        for k in range(0, len(resolved), 2):
            target[k, k + 1] = target[k + 1, k] = 1
        for k in np.nonzero((gram != target).any(axis=1))[0]:
            failures.append(f"{resolved[k].label}: wrong commutation with the other logicals")
        if len(resolved) != 2 * n_log:
            failures.append(f"selected {len(resolved)} logicals, expected 2*{n_log}")
    report = LogicalReport(code.name, t.dims, n_log, len(resolved), len(raw), failures)
    if strict and failures:
        raise CodeError("; ".join(failures))
    return report


def _pattern_per_raw(code: CodeSpec, t: Torus) -> list[LogicalPattern]:
    out = []
    for pat in code.logicals:
        out.extend([pat] * len(pat.instances(t)))
    return out
