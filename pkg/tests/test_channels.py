import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stabsm.channels import (
    ChannelError,
    builtin_channel,
    channel_for_code,
    inline_channel,
    kw_dual_beta,
    mu,
    nishimori_coupling,
    p_from_mu,
    scalar_commutator,
    threshold_from_beta,
)
from stabsm.codes import builtin
from stabsm.polyalg import parse_poly


@given(st.floats(0.0, 0.4999))
def test_mu_inverse(p):
    assert p_from_mu(mu(p)) == pytest.approx(p, abs=1e-12)


def test_mu_endpoints():
    assert mu(0.0) == 0.0
    assert math.isinf(mu(0.5))
    assert p_from_mu(math.inf) == 0.5
    with pytest.raises(ChannelError):
        mu(0.6)


@pytest.mark.parametrize("beta, p", [(0.2217, 0.099), (0.7613, 0.266), (0.554, 0.213), (0.4407, 0.178)])
def test_threshold_table(beta, p):
    assert threshold_from_beta(beta) == pytest.approx(p, abs=1e-3)


def test_kw_dual_beta_is_involution():
    for b in (0.1, 0.4407, 1.0):
        assert kw_dual_beta(kw_dual_beta(b)) == pytest.approx(b)
    assert kw_dual_beta(0.5 * math.log(1 + math.sqrt(2))) == pytest.approx(0.5 * math.log(1 + math.sqrt(2)))
    assert kw_dual_beta(0.2217) == pytest.approx(0.7613, abs=1e-3)


@given(st.floats(0.001, 0.4999))
def test_nishimori_relation(p):
    J = nishimori_coupling(p)
    assert math.exp(-2 * J) == pytest.approx(p / (1 - p))


def test_scalar_commutator():
    z = [parse_poly("1", 1), parse_poly("0", 1)]
    x = [parse_poly("0", 1), parse_poly("1 + x", 1)]
    assert scalar_commutator(z, x) == -1
    assert scalar_commutator(z, x, offset=(5,)) == 1
    assert scalar_commutator(z, x, offset=(-1,)) == -1


def test_builtin_channel_shapes():
    code = builtin("toric2d")
    both = channel_for_code("both", code, 0.1, p2=0.2)
    assert [g.name for g in both.generators] == ["X0", "X1", "Z0", "Z1"]
    assert [g.p for g in both.generators] == [0.1, 0.1, 0.2, 0.2]
    assert both.kinds == {"X", "Z"}
    assert channel_for_code("y", code).kinds == {"mixed"}
    assert [g.p for g in both.with_p(0.3, 0.05).generators] == [0.3, 0.3, 0.05, 0.05]
    with pytest.raises(ChannelError):
        builtin_channel("psi", l=1, d=3)
    with pytest.raises(ChannelError):
        builtin_channel("depolarizing")


def test_inline_channel():
    ch = inline_channel("1,0|0,0; 0,0|0,1+x", 0.1, l=2, d=2)
    assert [g.kind for g in ch.generators] == ["Z", "X"]
    with pytest.raises(ChannelError):
        inline_channel("1,0", 0.1, l=2, d=2)
    with pytest.raises(ChannelError):
        inline_channel("1|0", 0.1, l=2, d=2)


def test_generator_validation():
    with pytest.raises(ChannelError):
        inline_channel("0,0|0,0", 0.1, l=2, d=2)
    with pytest.raises(ChannelError):
        inline_channel("1,0|0,0", 0.7, l=2, d=2)
