"""Disorder-averaged Monte Carlo of random-bond models on a grid of error rates."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ..smgen import SMModel, sample_errors
from .sampler import MIN_BINS, MCError, MetropolisSampler

# stand-in for the infinite Nishimori coupling at p = 0
J_MAX = 20.0


def apply_errors(model: SMModel, mask: np.ndarray) -> SMModel:
    """Flip every flavor sign on the bonds in ``mask``."""
    signs = model.signs.copy()
    signs[:, np.asarray(mask, dtype=bool)] *= -1
    return replace(model, signs=signs)


def disorder_rng(seed: int, p_index: int, realization: int) -> np.random.Generator:
    """Error-configuration stream, independent of the Metropolis streams."""
    return np.random.default_rng(np.random.SeedSequence([seed, 1, p_index, realization]))


class DisorderScan(BaseEstimator):
    """Quenched average over error configurations at each ``p``.

    ``fit(builder)`` calls ``builder(p)`` for the clean random-bond model at
    rate ``p``, draws ``realizations`` error sets and runs one chain on each.
    Couplings follow the Nishimori line unless ``coupling`` fixes the
    per-bond ``K`` (the same chain as ``MetropolisSampler(beta=2K)``).
    ``records_`` holds one row per (p, observable) with the disorder mean,
    the thermal error (mean jackknife error over realizations), the
    disorder error (spread between realizations) and their combination.
    """

    def __init__(
        self,
        p_grid=(0.05, 0.10),
        realizations=8,
        sweeps=4000,
        thermalization=1000,
        seed=0,
        n_bins=MIN_BINS,
        observable="auto",
        coupling=None,
        start="cold",
    ):
        self.p_grid = p_grid
        self.realizations = realizations
        self.sweeps = sweeps
        self.thermalization = thermalization
        self.seed = seed
        self.n_bins = n_bins
        self.observable = observable
        self.coupling = coupling
        self.start = start

    def _couplings(self, model: SMModel) -> np.ndarray:
        if self.coupling is not None:
            return np.full(model.n_bonds, float(self.coupling))
        return np.minimum(np.asarray(model.coupling, dtype=float), J_MAX)

    def fit(self, builder: Callable[[float], SMModel], y=None):
        if self.realizations < 1:
            raise MCError("need at least one disorder realization")
        self.records_, self.runs_, self.flip_fraction_ = [], {}, {}
        chain = 0
        for i, p in enumerate(self.p_grid):
            clean = builder(float(p))
            clean = clean.with_couplings(self._couplings(clean))
            per = {}
            flips = []
            runs = []
            for r in range(self.realizations):
                mask = sample_errors(clean, float(p), disorder_rng(self.seed, i, r))
                flips.append(mask.mean())
                s = MetropolisSampler(
                    sweeps=self.sweeps,
                    thermalization=self.thermalization,
                    seed=self.seed,
                    chain=chain,
                    n_bins=self.n_bins,
                    observable=self.observable,
                    start=self.start,
                ).fit(apply_errors(clean, mask))
                chain += 1
                runs.append(s.record_)
                for k, v in s.record_.values.items():
                    per.setdefault(k, []).append(v)
            self.runs_[float(p)] = runs
            self.flip_fraction_[float(p)] = (float(np.mean(flips)), float(np.std(flips)))
            for k in sorted(per):
                vals = np.array([v[0] for v in per[k]])
                errs = np.array([v[1] for v in per[k]])
                R = len(vals)
                thermal = float(math.sqrt(np.mean(errs**2) / R))
                disorder = float(vals.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
                self.records_.append(
                    {
                        "model": clean.label,
                        "L": int(clean.torus.dims[0]),
                        "p": float(p),
                        "observable": k,
                        "value": float(vals.mean()),
                        "error": max(thermal, disorder),
                        "error_thermal": thermal,
                        "error_disorder": disorder,
                        "realizations": R,
                        "config_hash": runs[0].config_hash,
                    }
                )
        return self

    def value(self, p: float, observable: str) -> tuple[float, float]:
        for row in self.records_:
            if row["p"] == float(p) and row["observable"] == observable:
                return row["value"], row["error"]
        raise KeyError((p, observable))


def disorder_scan(builder: Callable[[float], SMModel], p_grid: Sequence[float], realizations: int, **kw) -> list[dict]:
    """Functional form of :class:`DisorderScan`; returns its records."""
    return DisorderScan(p_grid=tuple(p_grid), realizations=realizations, **kw).fit(builder).records_
