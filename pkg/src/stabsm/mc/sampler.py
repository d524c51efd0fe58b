"""Metropolis sampling of derived spin models behind a scikit-learn style estimator."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ..smgen import SMModel
from . import kernels
from .observables import (
    default_order_parameter,
    energy_density,
    fukinuke_layers,
    magnetization,
)

MIN_BINS = 16


class MCError(ValueError):
    pass


@dataclass(frozen=True)
class MCConfig:
    """Chain parameters; ``sweeps`` counts all sweeps including thermalization."""

    sweeps: int = 20000
    thermalization: int = 2000
    interval: int = 1
    seed: int = 0
    chain: int = 0
    n_bins: int = MIN_BINS
    start: str = "cold"
    pin_strength: float = 20.0
    audit_interval: int = 0

    def __post_init__(self) -> None:
        if self.sweeps <= self.thermalization:
            raise MCError("sweeps must exceed thermalization sweeps")
        if self.interval < 1:
            raise MCError("measurement interval must be positive")
        if self.n_bins < MIN_BINS:
            raise MCError(f"error bars need at least {MIN_BINS} bins")
        if (self.sweeps - self.thermalization) // self.interval < self.n_bins:
            raise MCError("fewer measurements than bins")
        if self.start not in ("cold", "hot"):
            raise MCError("start must be 'cold' or 'hot'")

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def rng(self) -> np.random.Generator:
        """Chain generator from ``SeedSequence([seed, chain])``."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.chain]))


def coefficients(model: SMModel, pin_strength: float = 0.0) -> tuple[np.ndarray, np.ndarray, bool]:
    """Per-term couplings ``(Kf, Kp, use_prod)`` of the kernel log-weight.

    Pinned bonds get ``pin_strength`` added to every term coupling, a soft
    version of the hard constraint used in exact enumeration.  For ``n = 2``
    the product term equals the single flavor term and is merged into it.
    """
    F = model.n_flavors
    K = np.asarray(model.coupling, dtype=float).copy()
    if pin_strength:
        K = K + pin_strength * np.asarray(model.pinned, dtype=float)
    signs = np.asarray(model.signs, dtype=float)
    Kf = K[None, :] * signs[:F]
    Kp = K * signs[F] if model.replica_product else np.zeros_like(K)
    use_prod = bool(model.replica_product)
    if F == 1 and use_prod:
        Kf = Kf + Kp[None, :]
        Kp = np.zeros_like(K)
        use_prod = False
    return np.ascontiguousarray(Kf), np.ascontiguousarray(Kp), use_prod


def spin_adjacency(model: SMModel) -> tuple[np.ndarray, np.ndarray]:
    """CSR lists of bonds containing each spin."""
    rows = np.repeat(np.arange(model.n_bonds), np.diff(model.bond_ptr))
    order = np.argsort(model.bond_spins, kind="stable")
    spin_bonds = rows[order].astype(np.int64)
    counts = np.bincount(model.bond_spins, minlength=model.n_spins)
    spin_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return spin_ptr, spin_bonds


@dataclass
class SpinState:
    spins: np.ndarray
    Bv: np.ndarray
    prod: np.ndarray

    @classmethod
    def initial(cls, model: SMModel, start: str, rng: np.random.Generator) -> SpinState:
        shape = (model.n_flavors, model.n_spins)
        if start == "hot":
            spins = np.where(rng.random(shape) < 0.5, -1, 1).astype(np.int8)
        else:
            spins = np.ones(shape, dtype=np.int8)
        Bv, prod = kernels.bond_values(spins, model.bond_ptr, model.bond_spins)
        return cls(spins, Bv, prod)

    def audit(self, model: SMModel) -> bool:
        """Tracked bond values equal a recomputation from the spins."""
        Bv, prod = kernels.bond_values(self.spins, model.bond_ptr, model.bond_spins)
        return bool(np.array_equal(Bv, self.Bv) and np.array_equal(prod, self.prod))

    def copy(self) -> SpinState:
        return SpinState(self.spins.copy(), self.Bv.copy(), self.prod.copy())


def metropolis_sweep(state: SpinState, model: SMModel, beta: float | None, rng: np.random.Generator, n: int = 1) -> int:
    """``n`` sweeps in place at ``K = beta/2`` per term (model couplings if ``beta`` is None)."""
    if beta is not None and beta < 0:
        raise MCError("beta must be nonnegative")
    m = model if beta is None else model.with_couplings(beta)
    Kf, Kp, use_prod = coefficients(m)
    ptr, bonds = spin_adjacency(model)
    u = rng.random((n, 2, model.n_flavors, model.n_spins))
    return int(kernels.sweeps(state.spins, state.Bv, state.prod, Kf, Kp, use_prod, ptr, bonds, u))


def term_sum(state: SpinState, model: SMModel) -> float:
    F = model.n_flavors
    s = float((state.Bv.astype(np.int64) * model.signs[:F]).sum())
    if model.replica_product:
        s += float((state.prod.astype(np.int64) * model.signs[F]).sum())
    return s


# --------------------------------------------------------------------------
# binning analysis


def bin_series(x: np.ndarray, n_bins: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    per = x.shape[0] // n_bins
    if per == 0:
        raise MCError("series shorter than the number of bins")
    return x[: per * n_bins].reshape(n_bins, per, *x.shape[1:]).mean(axis=1)


def jackknife(series: dict[str, np.ndarray], func, n_bins: int = MIN_BINS) -> tuple[float, float, np.ndarray]:
    """Jackknife estimate of ``func(means)`` over ``n_bins`` blocks.

    ``func`` receives a dict of block-mean arrays (one entry per series) and
    returns a scalar.  Returns ``(estimate, error, leave-one-out replicates)``.
    """
    binned = {k: bin_series(v, n_bins) for k, v in series.items()}
    full = func({k: v.mean(axis=0) for k, v in binned.items()})
    reps = np.empty(n_bins)
    for i in range(n_bins):
        reps[i] = func({k: (v.sum(axis=0) - v[i]) / (n_bins - 1) for k, v in binned.items()})
    err = math.sqrt((n_bins - 1) / n_bins * np.sum((reps - reps.mean()) ** 2))
    return float(full), float(err), reps


def binder_from_moments(m: dict) -> float:
    m2, m4 = m["m2"], m["m4"]
    return float(1.0 - m4 / (3.0 * m2**2)) if m2 > 0 else 0.0


# --------------------------------------------------------------------------


@dataclass
class MeasurementRecord:
    model_id: str
    L: int
    beta: float | None
    seed: int
    chain: int
    config_hash: str
    values: dict[str, tuple[float, float]] = field(default_factory=dict)
    n_samples: int = 0
    acceptance: float = 0.0

    def rows(self) -> list[dict]:
        return [
            {
                "model": self.model_id,
                "L": self.L,
                "beta": self.beta,
                "seed": self.seed,
                "chain": self.chain,
                "observable": k,
                "value": v[0],
                "error": v[1],
                "config_hash": self.config_hash,
            }
            for k, v in sorted(self.values.items())
        ]


class MetropolisSampler(BaseEstimator):
    """Single-chain Metropolis estimator.

    ``fit(model)`` runs the chain and stores per-measurement series in
    ``samples_``; ``record_`` holds binned means and errors.  With ``beta``
    set every term coupling becomes ``beta/2`` (so an n=2 Ising model samples
    ``exp(beta sum s s)``); otherwise the model's own couplings are used.
    ``coef`` overrides both with explicit kernel couplings ``(Kf, Kp, use_prod)``,
    and ``derivative = (dKf, dKp)`` records ``sum dKf B + dKp prod`` per sample.
    """

    def __init__(
        self,
        beta=None,
        sweeps=20000,
        thermalization=2000,
        interval=1,
        seed=0,
        chain=0,
        n_bins=MIN_BINS,
        observable="auto",
        start="cold",
        pin_strength=20.0,
        audit_interval=0,
        derivative=None,
        coef=None,
    ):
        self.beta = beta
        self.sweeps = sweeps
        self.thermalization = thermalization
        self.interval = interval
        self.seed = seed
        self.chain = chain
        self.n_bins = n_bins
        self.observable = observable
        self.start = start
        self.pin_strength = pin_strength
        self.audit_interval = audit_interval
        self.derivative = derivative
        self.coef = coef

    def config(self) -> MCConfig:
        return MCConfig(
            sweeps=self.sweeps,
            thermalization=self.thermalization,
            interval=self.interval,
            seed=self.seed,
            chain=self.chain,
            n_bins=self.n_bins,
            start=self.start,
            pin_strength=self.pin_strength,
            audit_interval=self.audit_interval,
        )

    def _measure(self, state: SpinState, model: SMModel, obs: str, out: dict) -> None:
        ts = term_sum(state, model)
        out["energy"].append(energy_density(ts, model))
        out["log_weight"].append(kernels.log_weight(state.Bv, state.prod, self._Kf, self._Kp, self._use_prod))
        if self.derivative is not None:
            dKf, dKp = self.derivative
            d = float((state.Bv * dKf).sum())
            if dKp is not None:
                d += float((state.prod * dKp).sum())
            out["dlogw"].append(d)
        if obs == "magnetization":
            m = magnetization(state.spins, model)
            out["m"].append(m)
            out["abs_m"].append(abs(m))
            out["m2"].append(m * m)
            out["m4"].append(m**4)
        elif obs == "fukinuke":
            layers = fukinuke_layers(state.spins, model)
            allv = np.concatenate(layers)
            for name, l in zip(("m_x", "m_y", "m_z"), layers):
                out[name].append(float(np.abs(l).mean()))
            out["m2"].append(float(np.mean(allv**2)))
            out["m4"].append(float(np.mean(allv**4)))

    def fit(self, model: SMModel, y=None):
        cfg = self.config()
        rng = cfg.rng()
        if self.coef is not None:
            self._Kf, self._Kp, self._use_prod = self.coef
        else:
            m = model if self.beta is None else model.with_couplings(self.beta)
            self._Kf, self._Kp, self._use_prod = coefficients(m, cfg.pin_strength)
        ptr, bonds = spin_adjacency(model)
        state = SpinState.initial(model, cfg.start, rng)
        obs = default_order_parameter(model) if self.observable == "auto" else self.observable
        if obs not in ("magnetization", "fukinuke", "specific_heat", "none"):
            raise MCError(f"unknown observable {obs!r}")
        series: dict[str, list[float]] = {
            k: [] for k in ("energy", "log_weight", "m", "abs_m", "m2", "m4", "m_x", "m_y", "m_z", "dlogw")
        }
        F, nsp = model.n_flavors, model.n_spins
        accepted = 0
        audits_ok = True
        block = max(1, min(self.sweeps, 4096 // max(1, F * nsp // 256 + 1)))
        done = 0
        pending = 0
        while done < cfg.sweeps:
            todo = min(block, cfg.sweeps - done)
            u = rng.random((todo, 2, F, nsp))
            for i in range(todo):
                accepted += kernels.sweeps(
                    state.spins, state.Bv, state.prod, self._Kf, self._Kp, self._use_prod, ptr, bonds, u[i : i + 1]
                )
                done += 1
                if done > cfg.thermalization:
                    pending += 1
                    if pending == cfg.interval:
                        pending = 0
                        self._measure(state, model, obs, series)
                if cfg.audit_interval and done % cfg.audit_interval == 0:
                    audits_ok &= state.audit(model)
        self.samples_ = {k: np.array(v) for k, v in series.items() if v}
        self.acceptance_ = accepted / (cfg.sweeps * F * nsp)
        self.audits_ok_ = audits_ok
        self.state_ = state
        self.observable_ = obs
        self.record_ = self._record(model, cfg)
        return self

    def _record(self, model: SMModel, cfg: MCConfig) -> MeasurementRecord:
        rec = MeasurementRecord(
            model_id=model.label,
            L=int(model.torus.dims[0]),
            beta=self.beta,
            seed=cfg.seed,
            chain=cfg.chain,
            config_hash=cfg.hash(),
            n_samples=len(self.samples_["energy"]),
            acceptance=self.acceptance_,
        )
        nb = cfg.n_bins
        for k, v in self.samples_.items():
            est, err, _ = jackknife({k: v}, lambda d, k=k: d[k], nb)
            rec.values[k] = (est, err)
        if "m2" in self.samples_:
            est, err, _ = jackknife({k: self.samples_[k] for k in ("m2", "m4")}, binder_from_moments, nb)
            rec.values["binder"] = (est, err)
        c, ce, _ = self.specific_heat(model)
        rec.values["specific_heat"] = (c, ce)
        return rec

    def specific_heat(self, model: SMModel) -> tuple[float, float, np.ndarray]:
        """Variance of the log-weight per spin, ``var(beta H) / N``."""
        lw = self.samples_["log_weight"]
        n = model.n_spins * model.n_flavors
        return jackknife(
            {"a": lw, "b": lw**2}, lambda d: (d["b"] - d["a"] ** 2) / n, self.n_bins
        )

    def binder(self) -> tuple[float, float, np.ndarray]:
        return jackknife({k: self.samples_[k] for k in ("m2", "m4")}, binder_from_moments, self.n_bins)

    def mean(self, name: str) -> tuple[float, float]:
        est, err, _ = jackknife({name: self.samples_[name]}, lambda d: d[name], self.n_bins)
        return est, err
