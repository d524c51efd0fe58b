"""Measurements on spin states: magnetizations, fuki-nuke layers, dipoles, Wilson loops.

States are ``(F, n_spins)`` int8 arrays in the model's spin order,
``cell * n_species + slot``.
"""

from __future__ import annotations

import numpy as np

from ..smgen import SMModel


class ObservableError(ValueError):
    """Observable is not defined for this model's species layout."""


# product species per axis for the plane-resolved magnetizations
FUKINUKE_LAYOUTS = {
    "pim": (("cube",), ("cube",), ("cube",)),
    "acat": (("sigma", "tau"), ("tau",), ("sigma",)),
}


def model_family(model: SMModel) -> str:
    """Coarse classification used to pick a default order parameter."""
    sizes = {len(t.sites) for t in model.templates}
    if model.n_species == 1 and sizes == {2}:
        return "ising"
    if model.species == ("cube",):
        return "pim"
    if set(model.species) == {"sigma", "tau"}:
        return "acat"
    if model.n_species == 1 and sizes == {4} and model.torus.d == 2:
        return "plaquette2d"
    return "gauge"


ORDER_PARAMETERS = {
    "ising": "magnetization",
    "pim": "fukinuke",
    "acat": "fukinuke",
    "plaquette2d": "specific_heat",
    "gauge": "specific_heat",
}


def default_order_parameter(model: SMModel) -> str:
    return ORDER_PARAMETERS[model_family(model)]


def _grid(state: np.ndarray, model: SMModel, species: str, flavor: int = 0) -> np.ndarray:
    slot = model.species.index(species)
    return state[flavor, slot :: model.n_species].reshape(model.torus.dims).astype(np.int64)


def magnetization(state: np.ndarray, model: SMModel, flavor: int = 0) -> float:
    """Mean spin of one flavor."""
    return float(state[flavor].mean())


def fukinuke_layers(state: np.ndarray, model: SMModel, layout=None, flavor: int = 0) -> list[np.ndarray]:
    """Per axis ``a``, the normalized layer sums of the species-product dipole along ``a``."""
    if model.torus.d != 3:
        raise ObservableError("fuki-nuke magnetizations need a 3D model")
    if layout is None:
        fam = model_family(model)
        if fam not in FUKINUKE_LAYOUTS:
            raise ObservableError(f"no fuki-nuke layout for a {fam} model")
        layout = FUKINUKE_LAYOUTS[fam]
    dims = model.torus.dims
    out = []
    for axis, names in enumerate(layout):
        dip = np.ones(dims, dtype=np.int64)
        for name in names:
            g = _grid(state, model, name, flavor)
            dip *= g * np.roll(g, -1, axis=axis)
        other = tuple(a for a in range(3) if a != axis)
        layer = dip.sum(axis=other) / np.prod([dims[a] for a in other])
        out.append(layer)
    return out


def measure_fukinuke(state: np.ndarray, model: SMModel, layout=None, flavor: int = 0) -> tuple[float, float, float]:
    """``(m_x, m_y, m_z)``: mean absolute layer magnetizations of the dipole products."""
    return tuple(float(np.abs(l).mean()) for l in fukinuke_layers(state, model, layout, flavor))


def measure_dipole(
    state: np.ndarray,
    model: SMModel,
    axis: int,
    layer: int,
    first: tuple[int, int],
    second: tuple[int, int],
    species: str | None = None,
    flavor: int = 0,
) -> float:
    """Product of two dipoles ``s(u) s(u + e_axis)`` placed in the same layer.

    ``first`` and ``second`` are the in-layer coordinates, in the order of
    the remaining axes.
    """
    species = species or model.species[0]
    g = _grid(state, model, species, flavor)
    dims = model.torus.dims
    other = [a for a in range(3) if a != axis]
    val = 1
    for pt in (first, second):
        u = [0, 0, 0]
        u[axis] = layer
        u[other[0]], u[other[1]] = pt
        v = list(u)
        v[axis] = (layer + 1) % dims[axis]
        val *= g[tuple(np.mod(u, dims))] * g[tuple(np.mod(v, dims))]
    return float(val)


def measure_wilson(state: np.ndarray, spins: np.ndarray, flavor: int = 0) -> float:
    """Product of the given spins; for a gauge model pass the spins excited by an X string."""
    return float(np.prod(state[flavor, np.asarray(spins, dtype=np.int64)].astype(np.int64)))


def energy_density(term_sum: float, model: SMModel) -> float:
    """``-sum_b S_b`` per spin per interaction term; -2 per spin for an aligned 2D Ising state."""
    return -term_sum / (model.n_terms * model.n_spins)
