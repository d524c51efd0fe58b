"""Laurent polynomials over F2 and the symplectic maps built from them.

A translation-invariant Pauli operator on a lattice with ``l`` qubits per unit
cell is encoded as a vector of ``2l`` Laurent polynomials.  Entries ``0..l-1``
hold the Z support of each sublattice qubit and entries ``l..2l-1`` the X
support; a monomial ``x^a y^b z^c`` marks the cell at offset ``(a, b, c)``.
Columns of a stabilizer map are such vectors, one per stabilizer type.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

VARIABLES = ("x", "y", "z")

Exponent = tuple[int, ...]


@dataclass(frozen=True)
class LaurentPoly:
    """Polynomial in ``d`` variables with F2 coefficients and signed exponents.

    Stored as the set of exponent vectors with coefficient 1, so addition is
    symmetric difference and the zero polynomial is the empty set.
    """

    terms: frozenset[Exponent]
    d: int

    def __post_init__(self) -> None:
        for t in self.terms:
            if len(t) != self.d:
                raise ValueError(f"exponent {t} does not have dimension {self.d}")

    @classmethod
    def zero(cls, d: int) -> LaurentPoly:
        return cls(frozenset(), d)

    @classmethod
    def one(cls, d: int) -> LaurentPoly:
        return cls(frozenset({(0,) * d}), d)

    @classmethod
    def monomial(cls, exponent: Sequence[int]) -> LaurentPoly:
        exponent = tuple(int(e) for e in exponent)
        return cls(frozenset({exponent}), len(exponent))

    @classmethod
    def from_terms(cls, terms: Iterable[Sequence[int]], d: int) -> LaurentPoly:
        """Build from a list of exponents; repeated exponents cancel mod 2."""
        out: set[Exponent] = set()
        for t in terms:
            out ^= {tuple(int(e) for e in t)}
        return cls(frozenset(out), d)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: LaurentPoly) -> LaurentPoly:
        return poly_add(self, other)

    __sub__ = __add__

    def __mul__(self, other: LaurentPoly) -> LaurentPoly:
        return poly_mul(self, other)

    def shift(self, offset: Sequence[int]) -> LaurentPoly:
        """Multiply by the monomial with exponent ``offset``."""
        return LaurentPoly(
            frozenset(tuple(a + b for a, b in zip(t, offset)) for t in self.terms), self.d
        )

    def sorted_terms(self) -> list[Exponent]:
        return sorted(self.terms)

    def __str__(self) -> str:
        return format_poly(self)

    def __repr__(self) -> str:
        return f"LaurentPoly({format_poly(self)!r}, d={self.d})"


def _check_dims(a: LaurentPoly, b: LaurentPoly) -> None:
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")


def poly_add(a: LaurentPoly, b: LaurentPoly) -> LaurentPoly:
    _check_dims(a, b)
    return LaurentPoly(a.terms ^ b.terms, a.d)


def poly_mul(a: LaurentPoly, b: LaurentPoly) -> LaurentPoly:
    _check_dims(a, b)
    out: set[Exponent] = set()
    for s in a.terms:
        for t in b.terms:
            out ^= {tuple(i + j for i, j in zip(s, t))}
    return LaurentPoly(frozenset(out), a.d)


def antipode(a: LaurentPoly) -> LaurentPoly:
    """Substitute every variable by its inverse."""
    return LaurentPoly(frozenset(tuple(-e for e in t) for t in a.terms), a.d)


# --------------------------------------------------------------------------
# text syntax

_MONO_FACTOR = re.compile(r"^([a-z]\d*)(?:\^\(?([+-]?\d+)\)?)?$")


def _variable_index(name: str, d: int) -> int:
    if name in VARIABLES[:d]:
        return VARIABLES.index(name)
    m = re.fullmatch(r"x(\d+)", name)
    if m and 1 <= int(m.group(1)) <= d:
        return int(m.group(1)) - 1
    raise ValueError(f"unknown variable {name!r} for dimension {d}")


def parse_poly(text: str, d: int) -> LaurentPoly:
    """Parse ``"1 + x^-1*y + z^2"`` style text into a polynomial.

    Monomials are ``*``-separated powers of ``x``, ``y``, ``z`` (or ``x1``,
    ``x2``, ... for any dimension), negative exponents allowed, terms joined
    by ``+``.  Whitespace is ignored and ``0`` is the zero polynomial.
    """
    s = re.sub(r"\s+", "", text)
    if s in ("", "0"):
        return LaurentPoly.zero(d)
    terms = []
    # a '+' directly after '^' or '(' belongs to an exponent
    for chunk in re.split(r"(?<![\^(])\+", s):
        if not chunk:
            raise ValueError(f"empty term in {text!r}")
        exp = [0] * d
        if chunk != "1":
            for factor in chunk.split("*"):
                m = _MONO_FACTOR.match(factor)
                if not m:
                    raise ValueError(f"cannot parse monomial factor {factor!r} in {text!r}")
                exp[_variable_index(m.group(1), d)] += int(m.group(2) or 1)
        terms.append(exp)
    return LaurentPoly.from_terms(terms, d)


def format_monomial(t: Exponent) -> str:
    names = VARIABLES if len(t) <= len(VARIABLES) else [f"x{i + 1}" for i in range(len(t))]
    parts = []
    for name, e in zip(names, t):
        if e == 1:
            parts.append(name)
        elif e != 0:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def format_poly(a: LaurentPoly) -> str:
    if a.is_zero():
        return "0"
    # constants first, then by total degree, then lexicographic
    order = sorted(a.terms, key=lambda t: (sum(abs(e) for e in t), t))
    return " + ".join(format_monomial(t) for t in order)


# --------------------------------------------------------------------------
# polynomial matrices


@dataclass(frozen=True)
class PolyMatrix:
    """Immutable matrix of Laurent polynomials, stored row-major."""

    entries: tuple[tuple[LaurentPoly, ...], ...]
    d: int

    def __post_init__(self) -> None:
        widths = {len(r) for r in self.entries}
        if len(widths) > 1:
            raise ValueError("ragged polynomial matrix")
        for row in self.entries:
            for p in row:
                if p.d != self.d:
                    raise ValueError("entry dimension mismatch")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[LaurentPoly | str]], d: int) -> PolyMatrix:
        conv = tuple(
            tuple(parse_poly(p, d) if isinstance(p, str) else p for p in row) for row in rows
        )
        return cls(conv, d)

    @classmethod
    def from_columns(cls, cols: Sequence[Sequence[LaurentPoly | str]], d: int) -> PolyMatrix:
        if not cols:
            raise ValueError("need at least one column")
        nrows = len(cols[0])
        if any(len(c) != nrows for c in cols):
            raise ValueError("columns of unequal length")
        return cls.from_rows([[c[i] for c in cols] for i in range(nrows)], d)

    @classmethod
    def zeros(cls, rows: int, cols: int, d: int) -> PolyMatrix:
        z = LaurentPoly.zero(d)
        return cls(tuple(tuple(z for _ in range(cols)) for _ in range(rows)), d)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, idx: tuple[int, int]) -> LaurentPoly:
        i, j = idx
        return self.entries[i][j]

    def column(self, j: int) -> tuple[LaurentPoly, ...]:
        return tuple(row[j] for row in self.entries)

    def columns(self) -> list[tuple[LaurentPoly, ...]]:
        return [self.column(j) for j in range(self.cols)]

    def transpose(self) -> PolyMatrix:
        return PolyMatrix(tuple(self.column(j) for j in range(self.cols)), self.d)

    def antipode(self) -> PolyMatrix:
        return PolyMatrix(tuple(tuple(antipode(p) for p in row) for row in self.entries), self.d)

    def dagger(self) -> PolyMatrix:
        return self.antipode().transpose()

    def __add__(self, other: PolyMatrix) -> PolyMatrix:
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return PolyMatrix(
            tuple(
                tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(self.entries, other.entries)
            ),
            self.d,
        )

    def __matmul__(self, other: PolyMatrix) -> PolyMatrix:
        return mat_mul(self, other)

    def apply(self, vec: Sequence[LaurentPoly]) -> tuple[LaurentPoly, ...]:
        """Matrix-vector product."""
        if len(vec) != self.cols:
            raise ValueError(f"vector length {len(vec)} does not match {self.cols} columns")
        zero = LaurentPoly.zero(self.d)
        return tuple(
            reduce(poly_add, (a * b for a, b in zip(row, vec)), zero) for row in self.entries
        )

    def is_zero(self) -> bool:
        return all(p.is_zero() for row in self.entries for p in row)

    def __str__(self) -> str:
        return "\n".join("[" + ", ".join(str(p) for p in row) + "]" for row in self.entries)


def mat_mul(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    if a.cols != b.rows:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    zero = LaurentPoly.zero(a.d)
    out = tuple(
        tuple(
            reduce(poly_add, (a[i, k] * b[k, j] for k in range(a.cols)), zero)
            for j in range(b.cols)
        )
        for i in range(a.rows)
    )
    return PolyMatrix(out, a.d)


def lambda_matrix(l: int, d: int) -> PolyMatrix:
    """Block swap ``[[0, I], [I, 0]]`` exchanging Z and X components."""
    one, zero = LaurentPoly.one(d), LaurentPoly.zero(d)
    rows = []
    for i in range(2 * l):
        partner = (i + l) % (2 * l)
        rows.append(tuple(one if j == partner else zero for j in range(2 * l)))
    return PolyMatrix(tuple(rows), d)


def excitation_map(S: PolyMatrix, l: int | None = None) -> PolyMatrix:
    """Return ``S^dagger . lambda_l``, mapping error patterns to violated stabilizers.

    Row ``t`` of the result corresponds to stabilizer type ``t`` (column ``t``
    of ``S``); column ``i`` to component ``i`` of the error's Pauli vector.
    """
    if S.rows % 2:
        raise ValueError(f"stabilizer map needs an even number of rows, got {S.rows}")
    if l is None:
        l = S.rows // 2
    if S.rows != 2 * l:
        raise ValueError(f"stabilizer map has {S.rows} rows, expected 2l = {2 * l}")
    return S.dagger() @ lambda_matrix(l, S.d)


def commute_check(S: PolyMatrix) -> bool:
    """True iff all stabilizers commute under every relative translation."""
    return (excitation_map(S) @ S).is_zero()


def pauli_vector(z: Sequence[LaurentPoly | str], x: Sequence[LaurentPoly | str], d: int) -> tuple[LaurentPoly, ...]:
    """Assemble a ``2l`` Pauli vector from its Z block and X block."""
    if len(z) != len(x):
        raise ValueError("Z and X blocks must have the same length")
    conv = [parse_poly(p, d) if isinstance(p, str) else p for p in (*z, *x)]
    return tuple(conv)
