import math

import numpy as np
import pytest

from stabsm import oracle
from stabsm.channels import channel_for_code
from stabsm.codes import builtin, logicals
from stabsm.lattice import Torus
from stabsm.smgen import classical_model_matrix, defect_model, line_defect, pinned_model, replica_model

LOG2 = math.log(2)


def z_on(t, l, qubits):
    v = np.zeros(2 * l * t.n_cells, dtype=np.uint8)
    for q in qubits:
        cell, i = divmod(q, l)
        v[cell * 2 * l + i] = 1
    return v


@pytest.fixture(scope="module")
def toric2():
    code = builtin("toric2d")
    return code, code.torus(2)


# ---- enumeration


@pytest.mark.parametrize("n", [2, 3])
def test_gray_code_matches_brute_force(n):
    code = builtin("toric2d")
    m = replica_model(code, channel_for_code("both", code, 0.17), 2, n)
    m = pinned_model(line_defect(m, [0, 5]), [2])
    assert oracle.partition_exact(m).log_z == pytest.approx(oracle.partition_bruteforce(m), rel=1e-12)


def test_observable_averages_match_brute_force():
    code = builtin("toric2d")
    m = line_defect(replica_model(code, channel_for_code("phase", code, 0.2), 2, 2), [1])
    # a single spin is odd under the global flip; a bond-shaped pair is not
    pair = list(m.bond(3))
    res = oracle.partition_exact(m, [(0, [0]), (0, pair)])
    bits = np.array([[(c >> j) & 1 for j in range(m.n_spins)] for c in range(1 << m.n_spins)])
    spins = (1 - 2 * bits)[:, None, :]
    w = np.exp(m.log_weight(spins))
    want = float((w * spins[:, 0, pair[0]] * spins[:, 0, pair[1]]).sum() / w.sum())
    assert res.observables[0] == 0.0
    assert res.observables[1] == pytest.approx(want, rel=1e-12)
    assert res.symmetry_dim == 1


def test_enumeration_limit():
    code = builtin("toric3d")
    m = replica_model(code, channel_for_code("phase", code, 0.1), 4, 2)
    with pytest.raises(oracle.OracleError):
        oracle.partition_exact(m)


# ---- three routes to tr rho^n


@pytest.mark.parametrize("channel", ["bitflip", "y", "both"])
@pytest.mark.parametrize("p", [0.0, 0.08, 0.3])
def test_moments_agree_on_toric2d(toric2, channel, p):
    code, t = toric2
    chan = channel_for_code(channel, code, p)
    rho = oracle.dense_rho(code, chan, t)
    for n in (2, 3, 4):
        dense = oracle.dense_moment(rho, n)
        assert oracle.partition_exact(replica_model(code, chan, t, n)).log_moment == pytest.approx(dense, abs=1e-10)
        assert oracle.moment_stabilizer_sum(code, chan, t, n) == pytest.approx(dense, abs=1e-10)


def test_moments_agree_on_non_css_code():
    code = builtin("cblt")
    t = code.torus(2)
    chan = channel_for_code("both", code, 0.12)
    rho = oracle.dense_rho(code, chan, t)
    m = replica_model(code, chan, t, 2)
    assert oracle.renyi_entropy_sm(m) == pytest.approx(oracle.renyi_entropy_dense(rho, 2), abs=1e-10)


def test_clean_state_entropy_counts_logicals(toric2):
    code, t = toric2
    chan = channel_for_code("phase", code, 0.0)
    k = len(logicals(code, t)) // 2
    assert oracle.renyi_entropy_sm(replica_model(code, chan, t, 2)) == pytest.approx(k * LOG2)


def test_dense_state_is_a_density_matrix(toric2):
    code, t = toric2
    rho = oracle.dense_rho(code, channel_for_code("y", code, 0.2), t)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_dense_cap():
    code = builtin("toric2d")
    with pytest.raises(oracle.OracleError):
        oracle.dense_rho(code, channel_for_code("phase", code, 0.1), 3)


# ---- linear algebra helpers


def test_fwht_is_an_involution_up_to_scale():
    a = np.random.default_rng(0).normal(size=16)
    assert np.allclose(oracle.fwht(oracle.fwht(a)), 16 * a)
    H = np.array([[1, 1], [1, -1]])
    assert np.allclose(oracle.fwht(np.eye(4)), np.kron(H, H))


def test_partial_trace_and_transpose_of_product_state():
    a = np.array([[0.7, 0.2], [0.2, 0.3]])
    b = np.array([[0.4, 0.1j], [-0.1j, 0.6]])
    # qubit 0 is the least significant bit
    rho = np.kron(b, a)
    assert np.allclose(oracle.partial_trace(rho, [0], 2), a)
    assert np.allclose(oracle.partial_trace(rho, [1], 2), b)
    assert np.allclose(oracle.partial_transpose(rho, [1], 2), np.kron(b.T, a))


# ---- information quantities


@pytest.mark.parametrize("p", [0.0, 0.1, 0.25])
def test_relative_entropy_routes_agree(toric2, p):
    code, t = toric2
    chan = channel_for_code("phase", code, p)
    rho = oracle.dense_rho(code, chan, t)
    m = replica_model(code, chan, t, 2)
    for qubits in [(0,), (0, 3), (1, 2, 5)]:
        pauli = z_on(t, code.l, qubits)
        a = oracle.relative_entropy_2_sm(m, pauli)
        b = oracle.relative_entropy_2_dense(rho, pauli, code.l, t.n_qubits)
        if math.isinf(b):
            assert math.isinf(a)
        else:
            assert a == pytest.approx(b, abs=1e-10)


def test_relative_entropy_of_detected_error_at_zero_noise(toric2):
    code, t = toric2
    m = replica_model(code, channel_for_code("phase", code, 0.0), t, 2)
    assert oracle.relative_entropy_2_sm(m, z_on(t, code.l, (0,))) == math.inf


@pytest.mark.parametrize("channel", ["phase", "both"])
@pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
def test_coherent_info_routes_agree(toric2, channel, p):
    code, t = toric2
    chan = channel_for_code(channel, code, p)
    assert oracle.coherent_info_2_sm(code, chan, t) == pytest.approx(
        oracle.coherent_info_2_dense(code, chan, t), abs=1e-9
    )


def test_coherent_info_endpoints(toric2):
    code, t = toric2
    k = len(logicals(code, t)) // 2
    assert oracle.coherent_info_2_sm(code, channel_for_code("both", code, 0.0), t) == pytest.approx(k * LOG2)
    assert oracle.coherent_info_2_sm(code, channel_for_code("both", code, 0.5), t) == pytest.approx(-k * LOG2)


@pytest.mark.parametrize("region", [(0,), (0, 1, 2, 3), (1, 4, 6)])
@pytest.mark.parametrize("channel", ["y", "both"])
def test_negativity_routes_agree(toric2, region, channel):
    code, t = toric2
    chan = channel_for_code(channel, code, 0.1)
    rho = oracle.dense_rho(code, chan, t)
    assert oracle.negativity_sm(code, chan, t, region) == pytest.approx(
        oracle.negativity_dense(rho, region, t.n_qubits), abs=1e-9
    )


def test_negativity_rejects_n1(toric2):
    code, t = toric2
    with pytest.raises(ValueError):
        oracle.negativity_sm(code, channel_for_code("y", code, 0.1), t, (0,), n=1)


def test_logical_defect_lowers_partition_sum(toric2):
    code, t = toric2
    base = replica_model(code, channel_for_code("both", code, 0.2), t, 2)
    lg = logicals(code, t)
    sel = np.eye(len(lg), dtype=int)[:1]
    z = oracle.partition_exact(defect_model(base, lg, sel)).log_z
    assert z < oracle.partition_exact(base).log_z


# ---- Kramers-Wannier


@pytest.mark.parametrize("name, dims", [("ising2d", (4, 4)), ("ising2d", (3, 5)), ("ising3d", (2, 2, 2))])
def test_kw_prefactor_is_constant_and_predicted(name, dims):
    chk = oracle.kw_verify(classical_model_matrix(name), Torus(dims), [0.15, 0.3, 0.44, 0.7])
    assert chk.constant(1e-9)
    assert chk.matches_prediction(1e-9)


def test_classical_log_z_high_temperature_limit():
    S_c = classical_model_matrix("ising2d")
    t = Torus((3, 3))
    assert oracle.classical_log_z(S_c, t, 0.0) == pytest.approx(9 * LOG2)


@pytest.mark.parametrize("K, dims", [(0.2, (2, 3)), (0.3, (4, 4)), (0.4406868, (3, 5)), (0.9, (4, 4))])
def test_closed_form_ising_matches_enumeration(K, dims):
    exact = oracle.classical_log_z(classical_model_matrix("ising2d"), Torus(dims), K)
    assert oracle.ising2d_log_z(K, *dims) == pytest.approx(exact, rel=1e-12)
    assert oracle.ising2d_log_z(K, *dims[::-1]) == pytest.approx(exact, rel=1e-12)
