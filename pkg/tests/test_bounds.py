import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from smw import bounds
from smw.bounds import BoundInputs, GhadiriBoundInputs
from smw.constructions import BackwardConstructionParams, build_backward_instance
from smw.core import capacitance
from smw.linalg import invert, rng, singular_values, two_norm
from smw.perturbation import PerturbationSpec, make_update_pair, perturb_instance

from oracles import exact, naive_matmul


def inputs(**kw):
    base = dict(eps1=0.0, eps2=0.0, lam=1.0, alpha=1.0, beta=1.0, norm_a=1.0, norm_a_inv=1.0)
    return BoundInputs(**(base | kw))


def forward_oracle(e1, e2, lam, al, ai):
    e1, e2, lam, al, ai = map(exact, (e1, e2, lam, al, ai))
    return e1 + e1 * lam * al * (2 * ai + e1) + lam * (ai + e1) ** 2 * (e2 + 2 * e1 * lam * al**2)


def backward_oracle(e1, e2, lam, beta, na):
    e1, e2, lam, beta, na = map(exact, (e1, e2, lam, beta, na))
    return 2 * e1 * na**2 + 4 * lam * e2 * (beta + lam * e1) ** 2


# -- formula values -----------------------------------------------------------


def test_forward_bound_zero_error_is_zero():
    assert bounds.forward_bound(inputs(lam=3.0, alpha=7.0, norm_a_inv=5.0)).value == 0.0


def test_forward_bound_no_update():
    assert bounds.forward_bound(inputs(eps1=1e-3, eps2=1e-2, lam=0.0)).value == 1e-3


def test_forward_bound_matches_rational_oracle():
    rep = bounds.forward_bound(inputs(eps1=1e-4, eps2=1e-4, lam=0.5, alpha=2.0, norm_a_inv=10.0))
    expected = forward_oracle(1e-4, 1e-4, 0.5, 2.0, 10.0)
    assert abs(Fraction(rep.value) - expected) <= Fraction(1, 10**15) * expected


def test_forward_detail_terms_sum_to_bound_pieces():
    inp = inputs(eps1=1e-4, eps2=3e-5, lam=0.7, alpha=3.0, norm_a_inv=4.0)
    rep = bounds.forward_bound(inp)
    d = rep.detail
    assert d["t3"] + d["t4"] == pytest.approx(rep.terms["alpha_terms"], rel=1e-14)
    assert d["t1"] + d["t2"] == pytest.approx(rep.terms["capacitance_terms"], rel=1e-14)


def test_backward_bound_examples():
    assert bounds.backward_bound(inputs(beta=4.0, norm_a=9.0)).value == 0.0
    assert bounds.backward_bound(inputs(eps1=1e-3, eps2=1.0, lam=0.0, norm_a=3.0)).value == pytest.approx(2e-3 * 9)
    rep = bounds.backward_bound(inputs(eps1=1e-6, eps2=1e-6, lam=1.0, beta=3.0, norm_a=10.0))
    expected = backward_oracle(1e-6, 1e-6, 1.0, 3.0, 10.0)
    assert abs(Fraction(rep.value) - expected) <= Fraction(1, 10**15) * expected
    assert rep.detail["perturbed_beta"] == 3.0 + 1e-6


def test_simplified_bounds():
    assert bounds.forward_bound_simplified(inputs()).value == 0.0
    rep = bounds.forward_bound_simplified(inputs(eps1=1e-6, eps2=1e-6, norm_a_inv=100.0))
    assert rep.value == pytest.approx(2e-4 + 1.2e-5, rel=1e-15)
    assert bounds.backward_bound_simplified(inputs()).value == 0.0
    assert bounds.backward_bound_simplified(inputs(eps2=1e-5)).value == pytest.approx(8e-5, rel=1e-15)


def test_large_capacitance_corollaries():
    rep = bounds.forward_bound_alpha_large(inputs(eps1=1e-3, eps2=1e-3, lam=2.0, norm_a_inv=1.0, alpha=10.0))
    assert rep.value == pytest.approx(6.4, rel=1e-14)
    doubled = bounds.forward_bound_alpha_large(inputs(eps1=1e-3, eps2=1e-3, lam=2.0, alpha=20.0))
    assert doubled.value == pytest.approx(4 * rep.value, rel=1e-14)
    assert bounds.forward_bound_alpha_large(inputs(lam=2.0, alpha=10.0)).value == 0.0

    rep = bounds.backward_bound_beta_large(inputs(eps1=1e-6, eps2=1e-6, lam=2.0, beta=100.0))
    assert rep.value == pytest.approx(0.36, rel=1e-14)
    doubled = bounds.backward_bound_beta_large(inputs(eps1=1e-6, eps2=1e-6, lam=2.0, beta=200.0))
    assert doubled.value == pytest.approx(4 * rep.value, rel=1e-14)
    assert bounds.backward_bound_beta_large(inputs(lam=2.0, beta=100.0)).value == 0.0


def test_large_capacitance_flags():
    ok = bounds.forward_bound_alpha_large(inputs(eps1=1e-9, eps2=1e-9, lam=0.5, alpha=3.0, norm_a_inv=2.0))
    assert ok.assumptions_ok["alpha_large"]
    low = bounds.forward_bound_alpha_large(inputs(eps1=1e-9, eps2=1e-9, lam=0.5, alpha=1.5, norm_a_inv=2.0))
    assert not low.assumptions_ok["alpha_large"]
    assert not bounds.forward_bound_alpha_large(inputs(eps1=1e-9, eps2=2e-9)).assumptions_ok["eps_equal"]
    rep = bounds.backward_bound_beta_large(inputs(lam=4.0, beta=5.0, norm_a=10.0))
    assert rep.assumptions_ok["beta_large"] and rep.assumption_margins["beta_large"] == 0.0


def test_kappa_v_substitution():
    inp = inputs(eps1=1e-4, eps2=2e-4, lam=0.3, alpha=2.0, beta=3.0, norm_a=4.0, norm_a_inv=5.0,
                 kappa_v=2.5, norm_binv_a=1.2, norm_ainv_b=2.0)
    f = bounds.forward_bound_kappa_v(inp)
    assert f.value == bounds.forward_bound(inputs(eps1=1e-4, eps2=2e-4, lam=0.3, alpha=3.0, norm_a_inv=5.0)).value
    b = bounds.backward_bound_kappa_v(inp)
    assert b.value == bounds.backward_bound(inputs(eps1=1e-4, eps2=2e-4, lam=0.3, beta=5.0, norm_a=4.0)).value
    zero = inp.with_eps(0.0)
    assert bounds.forward_bound_kappa_v(zero).value == 0.0
    assert bounds.backward_bound_kappa_v(zero).value == 0.0


# -- flags and margins ---------------------------------------------------------


def test_forward_threshold_flag_and_margin():
    inp = inputs(lam=0.5, alpha=2.0)
    assert bounds.forward_bound(inp.with_eps(0.49)).assumptions_ok["eps1_small"]
    rep = bounds.forward_bound(inp.with_eps(0.5))
    assert not rep.assumptions_ok["eps1_small"]  # strict inequality
    assert rep.assumption_margins["eps1_small"] == 0.0
    assert bounds.forward_bound(inp.with_eps(2.0)).value > 0  # evaluated past validity


def test_backward_flags():
    inp = inputs(lam=1.0, beta=1.0, norm_a=1.0)
    rep = bounds.backward_bound(inp.with_eps(0.1))
    assert rep.all_ok
    assert set(rep.assumptions_ok) == {"eps1_small", "eps2_small", "eps2_squared_small"}
    rep = bounds.backward_bound(inp.with_eps(0.1), {"a_approx_invertible": -1.0})
    assert not rep.all_ok and rep.assumption_margins["a_approx_invertible"] == -1.0
    assert not bounds.backward_bound(inp.with_eps(0.5)).assumptions_ok["eps1_small"]


def test_simplified_flags():
    good = inputs(eps1=1e-3, eps2=1e-3, lam=0.5, norm_a_inv=1.0)
    assert bounds.forward_bound_simplified(good).all_ok
    big_update = bounds.forward_bound_simplified(inputs(eps1=1e-3, eps2=1e-3, lam=0.6, norm_a_inv=1.0))
    assert not big_update.assumptions_ok["small_update"]
    wide = bounds.backward_bound_simplified(inputs(eps1=1e-3, eps2=1e-3, lam=0.01, norm_a_inv=0.5))
    assert not wide.assumptions_ok["sigma_min_le_1"]


def test_every_assumption_has_flag_and_margin():
    inp = inputs(eps1=1e-3, eps2=1e-3, lam=0.3, alpha=2.0, beta=2.0, norm_a=2.0, norm_a_inv=2.0,
                 kappa_v=1.0, norm_binv_a=2.0, norm_ainv_b=2.0)
    for fn in (bounds.forward_bound, bounds.forward_bound_simplified, bounds.forward_bound_alpha_large,
               bounds.forward_bound_kappa_v, bounds.backward_bound, bounds.backward_bound_simplified,
               bounds.backward_bound_beta_large, bounds.backward_bound_kappa_v):
        rep = fn(inp)
        assert set(rep.assumptions_ok) == set(rep.assumption_margins)
        assert rep.value == pytest.approx(math.fsum(rep.terms.values()), rel=1e-12)


@pytest.mark.parametrize("field", ["eps1", "lam", "norm_a"])
@pytest.mark.parametrize("bad", [math.nan, math.inf, -1.0])
def test_rejects_nonfinite_or_negative(field, bad):
    with pytest.raises(ValueError):
        bounds.forward_bound(inputs(**{field: bad}))


# -- properties ----------------------------------------------------------------

pos = st.floats(1e-8, 1e3)
small = st.floats(0.0, 1.0)


@given(e1=small, e2=small, d=st.floats(1e-6, 1.0), lam=pos, al=pos, be=pos, na=pos, ai=pos)
def test_bounds_monotone_in_each_error(e1, e2, d, lam, al, be, na, ai):
    inp = inputs(eps1=e1, eps2=e2, lam=lam, alpha=al, beta=be, norm_a=na, norm_a_inv=ai)
    for fn in (bounds.forward_bound, bounds.backward_bound):
        v = fn(inp).value
        assert fn(inp.with_eps(e1 + d, e2)).value >= v
        assert fn(inp.with_eps(e1, e2 + d)).value >= v


@given(e1=small, e2=small, lam=pos, al=pos, be=pos, na=pos, ai=pos)
def test_value_is_sum_of_terms(e1, e2, lam, al, be, na, ai):
    inp = inputs(eps1=e1, eps2=e2, lam=lam, alpha=al, beta=be, norm_a=na, norm_a_inv=ai)
    for rep in (bounds.forward_bound(inp), bounds.backward_bound(inp)):
        assert rep.value == pytest.approx(sum(rep.terms.values()), rel=1e-12)


@given(e1=st.floats(1e-10, 1e-2), e2=st.floats(1e-10, 1e-2), lam=pos, al=pos, ai=pos)
def test_forward_value_matches_oracle(e1, e2, lam, al, ai):
    value = bounds.forward_bound(inputs(eps1=e1, eps2=e2, lam=lam, alpha=al, norm_a_inv=ai)).value
    expected = forward_oracle(e1, e2, lam, al, ai)
    assert abs(Fraction(value) - expected) <= Fraction(1, 10**14) * expected


# -- measurement ------------------------------------------------------------------


def test_measure_inputs_examples():
    e1 = np.eye(4)[:, :1]
    inp = bounds.measure_inputs(np.eye(4), e1, e1)
    assert inp.alpha == pytest.approx(0.5) and inp.beta == pytest.approx(2.0)
    inp = bounds.measure_inputs(np.eye(4) * 2, np.zeros((4, 2)), np.ones((4, 2)))
    assert inp.alpha == 1.0 and inp.beta == 1.0 and inp.lam == 0.0


def test_measure_inputs_against_naive_capacitance():
    g = rng(21)
    a = g.standard_normal((6, 6)) + 2 * np.eye(6)
    u, v = g.standard_normal((6, 2)), g.standard_normal((6, 2))
    c = np.eye(2) + naive_matmul(naive_matmul(v.T, invert(a)), u)
    s = singular_values(c)
    inp = bounds.measure_inputs(a, u, v, PerturbationSpec(1e-3, 2e-3))
    assert inp.alpha * s[-1] == pytest.approx(1.0, rel=1e-12)
    assert inp.beta == pytest.approx(s[0], rel=1e-12)
    assert (inp.eps1, inp.eps2) == (1e-3, 2e-3)
    # the surrogates dominate what they replace
    assert inp.kappa_v * inp.norm_binv_a >= inp.alpha
    assert inp.kappa_v * inp.norm_ainv_b >= inp.beta


def test_measure_inputs_singular_capacitance():
    e1 = np.eye(3)[:, :1]
    inp = bounds.measure_inputs(np.eye(3), e1, -e1)
    assert inp.alpha == math.inf
    with pytest.raises(ValueError):
        bounds.forward_bound(inp)


# -- lemma 1, prior-work and conditioning bounds -------------------------------


def test_lemma1_bound_values():
    assert bounds.lemma1_bound(2.0, 0.0) == (0.0, 4.0)
    assert bounds.lemma1_bound(3.0, 0.1) == pytest.approx((1.8, 6.0))
    assert bounds.lemma1_applicable(1.0, 0.5)  # boundary is admissible
    assert not bounds.lemma1_applicable(1.0, 0.5000001)
    with pytest.raises(ValueError):
        bounds.lemma1_bound(0.0, 0.1)


def test_lemma1_scalar_tightness():
    m, big_n = 0.5 * np.eye(2), np.eye(2)
    diff = two_norm(invert(m) - invert(big_n))
    assert diff == bounds.lemma1_bound(1.0, 0.5)[0] == 1.0


def test_ghadiri_bound():
    zero = bounds.ghadiri_two_norm_bound(GhadiriBoundInputs(1.0, 1.0, 0.0, 0.0))
    assert zero.value == 0.0
    rep = bounds.ghadiri_two_norm_bound(GhadiriBoundInputs(1.0, 1.0, 3e-7, 1e-6))
    assert rep.detail["schur_intermediate"] == pytest.approx(5.12e-4, rel=1e-14)
    assert rep.value == pytest.approx(512e-6 + 3e-7, rel=1e-14)
    assert rep.assumptions_ok["eps2_small"]
    assert not bounds.ghadiri_two_norm_bound(GhadiriBoundInputs(1.0, 1.0, 0.0, 1e-2)).assumptions_ok["eps2_small"]
    assert not bounds.ghadiri_two_norm_bound(GhadiriBoundInputs(2.0, 3.0, 0.0, 0.0)).assumptions_ok["gamma_le_rho"]


def test_ghadiri_measurement():
    g = rng(30)
    a = g.standard_normal((6, 6)) + 4 * np.eye(6)
    u, v = make_update_pair(6, 2, 0.3, 1)
    inst = perturb_instance(a, u, v, PerturbationSpec(1e-6, 1e-7, 2))
    gi = bounds.measure_ghadiri_inputs(inst)
    assert gi.rho >= max(1.0, two_norm(a), two_norm(invert(a)), two_norm(a + u @ v.T))
    assert gi.eps1 == pytest.approx(two_norm(invert(inst.a_inv_approx) - a))
    assert gi.gamma == pytest.approx(max(two_norm(u), two_norm(v)))


def test_yip_identity_case():
    e1 = 0.5 * np.eye(5)[:, :1]
    rep = bounds.yip_capacitance_diagnostics(np.eye(5), e1, e1)
    assert rep.detail["kappa_capacitance"] == pytest.approx(1.0)
    assert rep.assumption_margins["general"] >= 0 and rep.assumption_margins["structured"] >= 0
    assert rep.assumptions_ok["structured_applicable"]  # u v^T is supported on one row


def test_yip_gaussian_general_only():
    g = rng(31)
    a = g.standard_normal((8, 8)) + 3 * np.eye(8)
    u, v = g.standard_normal((8, 2)), g.standard_normal((8, 2))
    rep = bounds.yip_capacitance_diagnostics(a, u, v)
    assert rep.detail["kappa_capacitance"] <= rep.detail["general_bound"]
    assert not rep.assumptions_ok["structured_applicable"]


def test_yip_structured_on_row_supported_update():
    a, u, v = build_backward_instance(BackwardConstructionParams(40, 4, 1.0, 12, "large-update", 0))
    rep = bounds.yip_capacitance_diagnostics(a, u, v)
    assert rep.assumptions_ok["structured_applicable"]
    assert rep.detail["kappa_capacitance"] <= rep.detail["structured_bound"]


# -- actual error decompositions ---------------------------------------------------


def test_forward_terms_respect_their_bounds():
    g = rng(40)
    a = g.standard_normal((30, 30))
    u, v = make_update_pair(30, 3, 0.5, 2)
    inst = perturb_instance(a, u, v, PerturbationSpec(1e-6, 1e-6, 3))
    inp = bounds.measure_inputs(a, u, v, PerturbationSpec(1e-6, 1e-6))
    rep = bounds.forward_bound(inp)
    actual = bounds.forward_error_terms(inst)
    assert rep.all_ok
    assert actual["eps1"] == pytest.approx(1e-6, rel=1e-9)
    for name in ("t1", "t2", "t3", "t4"):
        assert actual[name] <= rep.detail[name] * (1 + 1e-9)
    assert bounds.forward_error(inst) <= rep.value


def test_backward_terms_respect_their_bounds():
    g = rng(41)
    a = g.standard_normal((30, 30))
    u, v = make_update_pair(30, 3, 0.5, 2)
    inst = perturb_instance(a, u, v, PerturbationSpec(1e-7, 1e-7, 3))
    inp = bounds.measure_inputs(a, u, v, PerturbationSpec(1e-7, 1e-7))
    rep = bounds.backward_bound(inp, bounds.invertibility_margins(inst))
    actual = bounds.backward_error_terms(inst)
    assert rep.all_ok
    assert actual["s1"] <= rep.terms["s1"]
    assert actual["s2"] <= rep.terms["s2"]
    assert bounds.backward_error(inst) <= rep.value


def test_invertibility_margins_positive_for_regular_instance():
    a = np.eye(4) * 2
    u, v = make_update_pair(4, 1, 0.1, 0)
    inst = perturb_instance(a, u, v, PerturbationSpec(1e-3, 1e-3, 1))
    m = bounds.invertibility_margins(inst)
    assert m["a_approx_invertible"] > 0 and m["shifted_capacitance_invertible"] > 0
