"""Critical couplings from finite-size crossings and specific-heat peaks."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ..channels import p_from_mu
from ..smgen import SMModel
from .sampler import MIN_BINS, MCError, MetropolisSampler


def _first_crossing(betas: np.ndarray, diff: np.ndarray) -> float:
    """Linear interpolation at the first sign change of ``diff``; NaN if none."""
    for i in range(len(betas) - 1):
        a, b = diff[i], diff[i + 1]
        if a == 0.0:
            return float(betas[i])
        if a * b < 0:
            return float(betas[i] + (betas[i + 1] - betas[i]) * a / (a - b))
    return math.nan


def crossing_point(betas, u_small, u_large) -> float:
    """Coupling where two Binder curves intersect."""
    return _first_crossing(np.asarray(betas, dtype=float), np.asarray(u_large) - np.asarray(u_small))


class BinderCrossingEstimator(BaseEstimator):
    """Binder-cumulant crossing of a model family over sizes and a coupling grid.

    ``fit(builder)`` calls ``builder(L)`` for each size and samples it at
    every ``beta``.  Each chain gets ``chain = index`` under the root
    ``seed``; pairwise crossings carry jackknife errors from the bins.
    """

    def __init__(
        self,
        betas=(0.40, 0.42, 0.44, 0.46, 0.48),
        sizes=(8, 16),
        sweeps=10000,
        thermalization=1000,
        seed=0,
        n_bins=MIN_BINS,
        observable="auto",
        start="cold",
    ):
        self.betas = betas
        self.sizes = sizes
        self.sweeps = sweeps
        self.thermalization = thermalization
        self.seed = seed
        self.n_bins = n_bins
        self.observable = observable
        self.start = start

    def fit(self, builder: Callable[[int], SMModel], y=None):
        betas = np.asarray(sorted(self.betas), dtype=float)
        sizes = sorted(self.sizes)
        if len(sizes) < 2:
            raise MCError("a crossing needs at least two sizes")
        self.curves_, self.replicates_, self.records_ = {}, {}, []
        sweeps = self.sweeps if isinstance(self.sweeps, dict) else {L: self.sweeps for L in sizes}
        chain = 0
        for L in sizes:
            model = builder(L)
            U, E, R = [], [], []
            for beta in betas:
                s = MetropolisSampler(
                    beta=float(beta),
                    sweeps=sweeps[L],
                    thermalization=self.thermalization,
                    seed=self.seed,
                    chain=chain,
                    n_bins=self.n_bins,
                    observable=self.observable,
                    start=self.start,
                ).fit(model)
                chain += 1
                if "m2" not in s.samples_:
                    raise MCError(f"observable {s.observable_!r} has no Binder cumulant")
                u, e, reps = s.binder()
                U.append(u)
                E.append(e)
                R.append(reps)
                self.records_.append(s.record_)
            self.curves_[L] = (np.array(U), np.array(E))
            self.replicates_[L] = np.array(R)  # (betas, bins)
        self.betas_ = betas
        pairs = {}
        for i, a in enumerate(sizes):
            for b in sizes[i + 1 :]:
                est = crossing_point(betas, self.curves_[a][0], self.curves_[b][0])
                reps = np.array(
                    [
                        crossing_point(betas, self.replicates_[a][:, k], self.replicates_[b][:, k])
                        for k in range(self.n_bins)
                    ]
                )
                ok = np.isfinite(reps)
                if ok.sum() >= 2:
                    nb = ok.sum()
                    err = math.sqrt((nb - 1) / nb * np.sum((reps[ok] - reps[ok].mean()) ** 2))
                else:
                    err = math.nan
                pairs[(a, b)] = (est, err)
        self.pair_crossings_ = pairs
        vals = np.array([v[0] for v in pairs.values()])
        errs = np.array([v[1] for v in pairs.values()])
        good = np.isfinite(vals)
        if not good.any():
            self.crossing_ = math.nan
            self.crossing_err_ = math.nan
            self.diagnostics_ = "no crossing inside the coupling grid"
        else:
            self.crossing_ = float(vals[good].mean())
            spread = float(vals[good].std()) if good.sum() > 1 else 0.0
            e = errs[good & np.isfinite(errs)]
            self.crossing_err_ = float(max(spread, math.sqrt(np.mean(e**2)) if e.size else 0.0))
            self.diagnostics_ = ""
        return self

    @property
    def threshold_(self) -> float:
        """Error rate at the crossing, via ``mu_c = beta_c``."""
        return p_from_mu(self.crossing_) if np.isfinite(self.crossing_) else math.nan


class SpecificHeatPeakEstimator(BaseEstimator):
    """Location of the specific-heat maximum, refined by a parabola through the top three points."""

    def __init__(self, betas=(0.7, 0.75, 0.8), sizes=(4, 6), sweeps=10000, thermalization=1000, seed=0, n_bins=MIN_BINS, start="cold"):
        self.betas = betas
        self.sizes = sizes
        self.sweeps = sweeps
        self.thermalization = thermalization
        self.seed = seed
        self.n_bins = n_bins
        self.start = start

    def fit(self, builder: Callable[[int], SMModel], y=None):
        betas = np.asarray(sorted(self.betas), dtype=float)
        self.curves_, self.peaks_ = {}, {}
        chain = 0
        for L in sorted(self.sizes):
            model = builder(L)
            C, E = [], []
            for beta in betas:
                s = MetropolisSampler(
                    beta=float(beta),
                    sweeps=self.sweeps,
                    thermalization=self.thermalization,
                    seed=self.seed,
                    chain=chain,
                    n_bins=self.n_bins,
                    observable="specific_heat",
                    start=self.start,
                ).fit(model)
                chain += 1
                c, e, _ = s.specific_heat(model)
                C.append(c)
                E.append(e)
            C = np.array(C)
            self.curves_[L] = (C, np.array(E))
            self.peaks_[L] = _parabola_peak(betas, C)
        self.betas_ = betas
        self.peak_ = self.peaks_[max(self.sizes)]
        return self

    @property
    def threshold_(self) -> float:
        return p_from_mu(self.peak_)


def _parabola_peak(x: np.ndarray, y: np.ndarray) -> float:
    i = int(np.argmax(y))
    if i == 0 or i == len(x) - 1:
        return float(x[i])
    a, b, _ = np.polyfit(x[i - 1 : i + 2], y[i - 1 : i + 2], 2)
    return float(-b / (2 * a)) if a < 0 else float(x[i])


def estimate_beta_c(builder: Callable[[int], SMModel], sizes: Sequence[int], betas: Sequence[float], **kw) -> tuple[float, float, object]:
    """Dispatch on the family's designated order parameter; returns ``(beta_c, error, estimator)``."""
    from .observables import default_order_parameter

    obs = kw.pop("observable", None) or default_order_parameter(builder(min(sizes)))
    if obs == "specific_heat":
        est = SpecificHeatPeakEstimator(betas=betas, sizes=sizes, **kw).fit(builder)
        return est.peak_, math.nan, est
    est = BinderCrossingEstimator(betas=betas, sizes=sizes, observable=obs, **kw).fit(builder)
    return est.crossing_, est.crossing_err_, est
