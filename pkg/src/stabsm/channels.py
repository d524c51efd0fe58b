"""Pauli error channels and the elementary couplings derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .polyalg import LaurentPoly, parse_poly


class ChannelError(ValueError):
    pass


def mu(p: float) -> float:
    """Coupling ``-ln(1 - 2p)``; returns ``math.inf`` at ``p = 1/2``."""
    p = float(p)
    if not 0.0 <= p <= 0.5:
        raise ChannelError(f"error probability must lie in [0, 1/2], got {p}")
    if p == 0.5:
        return math.inf
    return -math.log1p(-2.0 * p)


def p_from_mu(m: float) -> float:
    """Inverse of :func:`mu`."""
    if m < 0:
        raise ChannelError("coupling must be nonnegative")
    return 0.5 if math.isinf(m) else -0.5 * math.expm1(-m)


def nishimori_coupling(p: float) -> float:
    """Random-bond coupling ``J`` with ``exp(-2J) = p / (1 - p)``."""
    if not 0.0 <= p <= 0.5:
        raise ChannelError(f"error probability must lie in [0, 1/2], got {p}")
    if p == 0.0:
        return math.inf
    return 0.5 * math.log((1.0 - p) / p)


def threshold_from_beta(beta_c: float) -> float:
    """Critical error rate for a replica model whose transition sits at ``beta_c``.

    The n=2 model carries coupling ``mu`` on every term, and the literature
    couplings are quoted for ``H = -beta * sum(term)``, so ``mu_c = beta_c``.
    """
    return p_from_mu(beta_c)


def kw_dual_beta(beta: float) -> float:
    """Kramers-Wannier dual coupling, ``exp(-2 beta*) = tanh(beta)``."""
    return -0.5 * math.log(math.tanh(beta))


@dataclass(frozen=True)
class ErrorGenerator:
    """A Pauli applied with probability ``p`` independently at every unit cell."""

    pattern: tuple[LaurentPoly, ...]
    p: float
    name: str = ""
    secondary: bool = False

    def __post_init__(self) -> None:
        if len(self.pattern) % 2:
            raise ChannelError("pattern must have 2l entries")
        if all(q.is_zero() for q in self.pattern):
            raise ChannelError(f"generator {self.name!r} has an empty pattern")
        if not 0.0 <= self.p <= 0.5:
            raise ChannelError(f"generator {self.name!r}: p={self.p} outside [0, 1/2]")
        ds = {q.d for q in self.pattern}
        if len(ds) != 1:
            raise ChannelError("pattern entries have mixed dimensions")

    @property
    def l(self) -> int:
        return len(self.pattern) // 2

    @property
    def d(self) -> int:
        return self.pattern[0].d

    @property
    def mu(self) -> float:
        return mu(self.p)

    @property
    def kind(self) -> str:
        """``"X"``, ``"Z"`` or ``"mixed"`` depending on which blocks are populated."""
        has_z = any(not q.is_zero() for q in self.pattern[: self.l])
        has_x = any(not q.is_zero() for q in self.pattern[self.l :])
        return "mixed" if has_z and has_x else ("Z" if has_z else "X")


@dataclass(frozen=True)
class ChannelSpec:
    generators: tuple[ErrorGenerator, ...]
    name: str = "custom"

    def __post_init__(self) -> None:
        if not self.generators:
            raise ChannelError("a channel needs at least one generator")
        shapes = {(g.l, g.d) for g in self.generators}
        if len(shapes) != 1:
            raise ChannelError("generators disagree on cell size or dimension")

    @property
    def l(self) -> int:
        return self.generators[0].l

    @property
    def d(self) -> int:
        return self.generators[0].d

    def with_p(self, p: float, p2: float | None = None) -> ChannelSpec:
        """Copy with every generator at ``p``; ``p2`` overrides the secondary family.

        The secondary family is the Z errors of ``both`` and the correlated pair
        of ``xx``.
        """
        gens = [
            replace(g, p=p2 if (g.secondary and p2 is not None) else p) for g in self.generators
        ]
        return replace(self, generators=tuple(gens))

    @property
    def kinds(self) -> set[str]:
        return {g.kind for g in self.generators}


def _poly_vector(l: int, d: int, z: dict[int, str] = None, x: dict[int, str] = None):
    z = z or {}
    x = x or {}
    return tuple(parse_poly(z.get(i, "0"), d) for i in range(l)) + tuple(
        parse_poly(x.get(i, "0"), d) for i in range(l)
    )


def scalar_commutator(
    a: Sequence[LaurentPoly], b: Sequence[LaurentPoly], offset: Sequence[int] | None = None
) -> int:
    """The sign ``+1`` or ``-1`` by which ``a`` and ``b`` (translated by ``offset``) commute."""
    if len(a) != len(b) or len(a) % 2:
        raise ChannelError("vectors must have equal, even length")
    l = len(a) // 2
    d = a[0].d
    off = tuple(offset) if offset is not None else (0,) * d
    bs = [q.shift(off) for q in b]
    overlap = 0
    for i in range(l):
        overlap += len(a[i].terms & bs[l + i].terms) + len(a[l + i].terms & bs[i].terms)
    return -1 if overlap % 2 else 1


CHANNEL_NAMES = ("bitflip", "phase", "both", "y", "xx", "psi")


def builtin_channel(
    name: str, p: float = 0.1, *, l: int = 1, d: int = 1, p2: float | None = None
) -> ChannelSpec:
    """Named channels on a lattice with ``l`` qubits per cell in ``d`` dimensions.

    ``bitflip``, ``phase`` and ``y`` put one generator on each sublattice qubit.
    ``both`` adds independent X (rate ``p``) and Z (rate ``p2``, default ``p``).
    ``xx`` adds to the bit flips a correlated X pair on qubits 0 and 1 of the
    same cell at rate ``p2``.  ``psi`` is defined for the 2D toric-code cell
    and pairs a Z on one edge with an X on a neighbouring edge.
    """
    gens: list[ErrorGenerator] = []
    if name in ("bitflip", "phase", "both", "y"):
        for q in range(l):
            if name in ("bitflip", "both"):
                gens.append(ErrorGenerator(_poly_vector(l, d, x={q: "1"}), p, f"X{q}"))
            if name == "phase":
                gens.append(ErrorGenerator(_poly_vector(l, d, z={q: "1"}), p, f"Z{q}"))
            if name == "y":
                gens.append(ErrorGenerator(_poly_vector(l, d, z={q: "1"}, x={q: "1"}), p, f"Y{q}"))
        if name == "both":
            pz = p if p2 is None else p2
            for q in range(l):
                gens.append(ErrorGenerator(_poly_vector(l, d, z={q: "1"}), pz, f"Z{q}", True))
    elif name == "xx":
        if l < 2:
            raise ChannelError("xx channel needs at least two qubits per cell")
        for q in range(l):
            gens.append(ErrorGenerator(_poly_vector(l, d, x={q: "1"}), p, f"X{q}"))
        pxx = p if p2 is None else p2
        gens.append(ErrorGenerator(_poly_vector(l, d, x={0: "1", 1: "1"}), pxx, "XX01", True))
    elif name == "psi":
        if (l, d) != (2, 2):
            raise ChannelError("psi channel is defined on the 2D toric-code cell (l=2, d=2)")
        gens.append(ErrorGenerator(_poly_vector(2, 2, z={0: "1"}, x={1: "1"}), p, "Z0X1"))
        gens.append(
            ErrorGenerator(_poly_vector(2, 2, z={1: "1"}, x={0: "x^-1*y"}), p, "Z1X0")
        )
    else:
        raise ChannelError(f"unknown channel {name!r}; choose from {', '.join(CHANNEL_NAMES)}")
    return ChannelSpec(tuple(gens), name)


def inline_channel(text: str, p: float, *, l: int, d: int) -> ChannelSpec:
    """Parse ``"z_1,...,z_l|x_1,...,x_l; ..."``: one error generator per ``;`` group."""
    gens = []
    for k, group in enumerate(g for g in text.split(";") if g.strip()):
        if group.count("|") != 1:
            raise ChannelError(f"inline generator {group!r} needs exactly one '|' between Z and X blocks")
        zs, xs = (part.split(",") for part in group.split("|"))
        if len(zs) != l or len(xs) != l:
            raise ChannelError(f"inline generator {group!r} needs {l} Z and {l} X entries")
        try:
            pattern = tuple(parse_poly(q, d) for q in zs + xs)
        except ValueError as exc:
            raise ChannelError(str(exc)) from exc
        gens.append(ErrorGenerator(pattern, p, f"G{k}"))
    if not gens:
        raise ChannelError("inline channel has no generators")
    return ChannelSpec(tuple(gens), "inline")


def channel_for_code(name: str, code, p: float = 0.1, p2: float | None = None) -> ChannelSpec:
    """Builtin channel by name, or an inline definition prefixed with ``inline:``."""
    if name.startswith("inline:"):
        return inline_channel(name[len("inline:") :], p, l=code.l, d=code.d)
    return builtin_channel(name, p, l=code.l, d=code.d, p2=p2)
