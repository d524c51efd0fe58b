import itertools
import math

import numpy as np
import pytest
from sklearn.base import clone

from stabsm import oracle
from stabsm.channels import channel_for_code, nishimori_coupling
from stabsm.codes import builtin
from stabsm.mc import (
    BinderCrossingEstimator,
    DisorderScan,
    MCConfig,
    MCError,
    MetropolisSampler,
    SpecificHeatPeakEstimator,
    SpinState,
    ThermodynamicIntegration,
    estimate_beta_c,
    measure_dipole,
    measure_fukinuke,
    measure_wilson,
    metropolis_sweep,
    model_family,
)
from stabsm.lattice import Torus
from stabsm.mc import kernels
from stabsm.mc.sampler import bin_series, coefficients, jackknife, spin_adjacency, term_sum
from stabsm.oracle import error_correlator_spins
from stabsm.smgen import (
    classical_model_matrix,
    classical_sm,
    line_defect,
    preset_relations,
    random_bond_model,
    reduce_species,
    replica_model,
)


def model(code_name, channel, L, n=2, p=0.1):
    code = builtin(code_name)
    return replica_model(code, channel_for_code(channel, code, p), L, n)


def exact_term_sum(m, beta, h=1e-5):
    """Boltzmann average of the signed term sum at ``K = beta/2`` from exact ``log Z`` derivatives."""
    lz = lambda b: oracle.partition_exact(m.with_couplings(b)).log_z
    # log w = K (S - n_terms) summed over bonds, so dlogZ/dbeta = (<S> - n_terms B) / 2
    return 2 * (lz(beta + h) - lz(beta - h)) / (2 * h) + m.n_terms * m.n_bonds


# ---- detailed balance against enumeration


@pytest.mark.parametrize(
    "n, beta, defect",
    [(2, 0.4, False), (2, 0.9, True), (3, 0.5, False), (3, 0.5, True)],
)
def test_mean_energy_matches_enumeration(n, beta, defect):
    m = model("toric2d", "phase", 3, n=n)
    if defect:
        m = line_defect(m, [0, 4, 7])
    want = -exact_term_sum(m, beta) / (m.n_terms * m.n_spins)
    s = MetropolisSampler(beta=beta, sweeps=40000, thermalization=2000, n_bins=32, observable="none").fit(m)
    est, err = s.record_.values["energy"]
    assert abs(est - want) < 5 * err + 1e-4


def test_kw_gauge_model_energy_matches_enumeration():
    m = model("toric3d", "bitflip", 2)
    want = -exact_term_sum(m, 1.2) / (m.n_terms * m.n_spins)
    s = MetropolisSampler(beta=1.2, sweeps=40000, thermalization=2000, n_bins=32, observable="none").fit(m)
    est, err = s.record_.values["energy"]
    assert abs(est - want) < 5 * err + 1e-4


def test_energy_against_closed_form_ising():
    L, beta = 8, 0.35
    m = model("toric2d", "phase", L)
    s = MetropolisSampler(beta=beta, sweeps=30000, thermalization=2000, n_bins=32).fit(m)
    est, err = s.record_.values["energy"]
    # one term per spin, so the model energy is already per site
    assert abs(est - oracle.ising2d_energy(beta, L)) < 5 * err


def test_stationary_distribution_of_frustrated_triangle():
    """Empirical state frequencies over 10^6 sweeps match exp(-H)/Z within 3 sigma."""
    m = line_defect(classical_sm(classical_model_matrix("ising1d"), Torus((3,)), 0.6), [1])
    states = np.array(list(itertools.product([1, -1], repeat=3)))
    lw = m.log_weight(states[:, None, :])
    pi = np.exp(lw - lw.max())
    pi /= pi.sum()
    rng = np.random.default_rng(np.random.SeedSequence([0, 0]))
    st = SpinState.initial(m, "cold", rng)
    Kf, Kp, use_prod = coefficients(m)
    ptr, bonds = spin_adjacency(m)
    index = {tuple(s): i for i, s in enumerate(states)}
    counts = np.zeros(len(states))
    n_sweeps, chunk = 10**6, 10**5
    for _ in range(n_sweeps // chunk):
        u = rng.random((chunk, 2, 1, 3))
        for i in range(chunk):
            kernels.sweeps(st.spins, st.Bv, st.prod, Kf, Kp, use_prod, ptr, bonds, u[i : i + 1])
            counts[index[tuple(st.spins[0])]] += 1
    freq = counts / n_sweeps
    # successive sweeps are correlated; a generous effective-sample factor of 4
    sigma = np.sqrt(4 * pi * (1 - pi) / n_sweeps)
    assert np.all(np.abs(freq - pi) < 3 * sigma)


def test_aligned_ising_freezes_at_large_coupling():
    m = model("toric3d", "phase", 4)
    s = MetropolisSampler(beta=40.0, sweeps=200, thermalization=50, observable="none").fit(m)
    assert s.acceptance_ == 0.0 and np.all(s.state_.spins == 1)


# ---- chain mechanics


def test_runs_are_reproducible_and_chains_independent():
    m = model("toric2d", "phase", 4)
    kw = dict(beta=0.4, sweeps=600, thermalization=100, observable="magnetization")
    a = MetropolisSampler(**kw).fit(m)
    b = MetropolisSampler(**kw).fit(m)
    c = MetropolisSampler(chain=1, **kw).fit(m)
    assert np.array_equal(a.samples_["m"], b.samples_["m"])
    assert a.record_.config_hash == b.record_.config_hash != c.record_.config_hash
    assert not np.array_equal(a.samples_["m"], c.samples_["m"])


def test_infinite_temperature_accepts_everything():
    m = model("xcube", "phase", 3)
    s = MetropolisSampler(beta=0.0, sweeps=100, thermalization=10, observable="none", start="hot").fit(m)
    assert s.acceptance_ == 1.0


def test_tracked_bond_values_survive_audit():
    m = model("toric3d", "phase", 3, n=3)
    s = MetropolisSampler(beta=0.3, sweeps=500, thermalization=50, audit_interval=7, start="hot").fit(m)
    assert s.audits_ok_ and s.state_.audit(m)


def test_metropolis_sweep_in_place():
    m = model("toric2d", "phase", 4)
    rng = np.random.default_rng(5)
    st = SpinState.initial(m, "hot", rng)
    before = st.copy()
    acc = metropolis_sweep(st, m, 0.2, rng, n=3)
    assert 0 < acc <= 3 * m.n_spins
    assert st.audit(m) and not np.array_equal(st.spins, before.spins)
    assert term_sum(st, m) == m.term_sums(st.spins.astype(np.int64)).sum()
    with pytest.raises(MCError):
        metropolis_sweep(st, m, -1.0, rng)


@pytest.mark.parametrize(
    "kw",
    [
        dict(sweeps=100, thermalization=100),
        dict(interval=0),
        dict(n_bins=4),
        dict(sweeps=120, thermalization=110),
        dict(start="warm"),
    ],
)
def test_config_validation(kw):
    with pytest.raises(MCError):
        MCConfig(**kw)


def test_unknown_observable():
    with pytest.raises(MCError):
        MetropolisSampler(observable="chirality", sweeps=100, thermalization=10).fit(model("toric2d", "phase", 3))


def test_estimators_clone():
    s = MetropolisSampler(beta=0.3, sweeps=123)
    c = clone(s)
    assert c.get_params() == s.get_params()
    assert clone(ThermodynamicIntegration(n_points=5)).n_points == 5


def test_jackknife_of_mean_is_standard_error():
    x = np.random.default_rng(2).normal(size=3200)
    est, err, reps = jackknife({"x": x}, lambda d: d["x"], 32)
    blocks = bin_series(x, 32)
    assert est == pytest.approx(x.mean())
    assert err == pytest.approx(blocks.std(ddof=1) / math.sqrt(32))
    assert reps.shape == (32,)


# ---- observables


def test_family_classification():
    assert model_family(model("toric3d", "phase", 3)) == "ising"
    assert model_family(model("xcube", "phase", 3)) == "pim"
    acat = reduce_species(model("xcube", "bitflip", 3), preset_relations("xcube"))
    assert model_family(acat) == "acat"
    assert model_family(model("toric3d", "bitflip", 3)) == "gauge"


def test_fukinuke_of_aligned_and_plane_flipped_states():
    m = model("xcube", "phase", 4)
    spins = np.ones((1, m.n_spins), dtype=np.int8)
    assert measure_fukinuke(spins, m) == (1.0, 1.0, 1.0)
    flipped = spins.copy()
    flipped[0, m.torus.coords[:, 2] == 1] = -1
    assert measure_fukinuke(flipped, m) == (1.0, 1.0, 1.0)
    # layer magnetizations of a random state are small
    rnd = np.where(np.random.default_rng(0).random((1, m.n_spins)) < 0.5, -1, 1)
    assert max(measure_fukinuke(rnd, m)) < 0.6


def test_dipole_is_invariant_under_plane_flips():
    m = model("xcube", "phase", 4)
    rng = np.random.default_rng(8)
    spins = np.where(rng.random((1, m.n_spins)) < 0.5, -1, 1)
    v = measure_dipole(spins, m, axis=0, layer=1, first=(0, 0), second=(2, 3))
    for axis in range(3):
        s = spins.copy()
        s[0, m.torus.coords[:, axis] == 2] *= -1
        assert measure_dipole(s, m, axis=0, layer=1, first=(0, 0), second=(2, 3)) == v


def test_pim_orders_at_large_coupling():
    m = model("xcube", "phase", 4)
    s = MetropolisSampler(beta=1.2, sweeps=1500, thermalization=300).fit(m)
    assert s.observable_ == "fukinuke"
    assert s.record_.values["m_x"][0] > 0.95


def test_small_wilson_loop():
    code = builtin("toric3d")
    m = model("toric3d", "bitflip", 4)
    x = np.zeros(2 * code.l * m.torus.n_cells, dtype=np.uint8)
    x[code.l] = 1
    loop = error_correlator_spins(m, x)
    assert loop.size == 4
    cold = MetropolisSampler(beta=2.0, sweeps=2000, thermalization=100, observable="none").fit(m)
    assert measure_wilson(cold.state_.spins, loop) == 1.0


# ---- free energies


def test_gauge_equivalent_defect_costs_nothing():
    m = model("toric2d", "phase", 6)
    around = [b for b in range(m.n_bonds) if 0 in m.bond(b)]
    assert len(around) == 4
    ti = ThermodynamicIntegration(beta=0.5, n_points=5, sweeps=3000, thermalization=500).fit((m, line_defect(m, around)))
    assert abs(ti.delta_f_) < 5 * ti.delta_f_err_ + 0.02


def test_identical_models_give_zero():
    m = model("toric2d", "phase", 4)
    ti = ThermodynamicIntegration(beta=0.4, n_points=3, sweeps=400, thermalization=100).fit((m, m))
    assert ti.delta_f_ == 0.0
    assert ti.weights_.sum() == pytest.approx(1.0)


def test_integration_matches_exact_free_energy():
    m = model("toric2d", "phase", 3).with_couplings(0.6)
    d = line_defect(m, [0, 1, 2])
    want = oracle.partition_exact(m).log_z - oracle.partition_exact(d).log_z
    ti = ThermodynamicIntegration(n_points=9, sweeps=8000, thermalization=1000).fit((m, d))
    assert abs(ti.delta_f_ - want) < 5 * ti.delta_f_err_ + 0.02


def test_mismatched_models_rejected():
    with pytest.raises(MCError):
        ThermodynamicIntegration().fit((model("toric2d", "phase", 3), model("toric2d", "phase", 4)))


# ---- quenched disorder


def rbim(L):
    code = builtin("toric2d")
    return lambda p: random_bond_model(code, channel_for_code("bitflip", code, p), L, 2)


def test_zero_error_rate_reproduces_clean_chain():
    scan = DisorderScan(p_grid=(0.0,), realizations=2, sweeps=800, thermalization=100, coupling=0.3).fit(rbim(4))
    # a fixed per-bond coupling K corresponds to beta = 2K
    clean = MetropolisSampler(beta=0.6, sweeps=800, thermalization=100).fit(rbim(4)(0.0))
    assert scan.runs_[0.0][0].values == clean.record_.values
    assert scan.flip_fraction_[0.0] == (0.0, 0.0)


def test_nishimori_rbim_orders_at_low_p():
    scan = DisorderScan(p_grid=(0.1,), realizations=4, sweeps=2000, thermalization=400).fit(rbim(8))
    value, err = scan.value(0.1, "abs_m")
    assert value > 0.7
    row = next(r for r in scan.records_ if r["observable"] == "abs_m")
    assert row["error"] == max(row["error_thermal"], row["error_disorder"])
    assert row["realizations"] == 4
    assert abs(scan.flip_fraction_[0.1][0] - 0.1) < 0.05
    assert rbim(8)(0.1).coupling[0] == pytest.approx(nishimori_coupling(0.1))


def test_disorder_needs_realizations():
    with pytest.raises(MCError):
        DisorderScan(realizations=0).fit(rbim(4))


# ---- critical points


def test_binder_crossing_2d_ising():
    build = lambda L: model("toric2d", "phase", L)
    est = BinderCrossingEstimator(
        betas=(0.38, 0.41, 0.44, 0.47, 0.50), sizes=(6, 12), sweeps=6000, thermalization=600
    ).fit(build)
    assert abs(est.crossing_ - 0.4407) < 0.03
    assert est.threshold_ == pytest.approx((1 - math.exp(-est.crossing_)) / 2)
    with pytest.raises(MCError):
        BinderCrossingEstimator(sizes=(4,)).fit(build)


def test_specific_heat_peak_dispatch():
    build = lambda L: model("toric3d", "bitflip", L)
    bc, err, est = estimate_beta_c(build, (3,), (0.5, 0.7, 0.9, 1.1), sweeps=1500, thermalization=300)
    assert isinstance(est, SpecificHeatPeakEstimator)
    assert 0.5 <= bc <= 1.1 and math.isnan(err)


@pytest.mark.slow
def test_critical_energy_on_sixteen_torus():
    """At beta=0.44 and L=16 the energy matches the finite-torus closed form, about -1.448 rather than -sqrt 2."""
    m = model("toric2d", "phase", 16)
    s = MetropolisSampler(beta=0.44, sweeps=60000, thermalization=5000, n_bins=32).fit(m)
    est, err = s.record_.values["energy"]
    exact = oracle.ising2d_energy(0.44, 16)
    assert abs(est - exact) < 5 * err
    assert abs(oracle.ising2d_energy(0.4406868, 2048) + math.sqrt(2)) < 2e-3
