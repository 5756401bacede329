import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.admissibility import (
    GROWTH_FACTOR, ControlObsTriple, ZDescriptor, audit, build_io_map, control_admissibility, feedback_check,
    fit_power, io_norm, observation_admissibility, plateau_verdict,
)
from semipert.core import OperatorBlock, dirichlet_laplacian
from semipert.library import heat_generator_observation, heat_point_observation
from semipert.spaces import DiscreteSpace


def _bounded_triple(n=16, p=2.0, scale=0.3):
    A = dirichlet_laplacian(n, math.pi, p)
    X = A.space
    rng = np.random.default_rng(0)
    B = OperatorBlock(scale * rng.standard_normal((n, n)) / n, X, X, "B")
    C = OperatorBlock(np.eye(n), X, X, "I")
    return ControlObsTriple(A, B, C, ZDescriptor("full"), "bounded", B_bounded=True, C_bounded=True)


def test_plateau_rules():
    assert plateau_verdict([1.0, 1.1])[0] == "PASS"
    assert plateau_verdict([1.0, 1.0 * GROWTH_FACTOR])[0] == "FAIL"
    assert plateau_verdict([1.0, 1.3])[0] == "SUSPECT"
    assert plateau_verdict([1.0, math.inf])[0] == "FAIL"
    assert plateau_verdict([2.0])[0] == "PASS"


@given(st.floats(0.5, 3.0), st.floats(0.01, 10.0))
def test_fit_power_recovers_power_law(e, M):
    t = np.logspace(-3, 0, 7)
    ee, MM = fit_power(t, M * t**e)
    assert ee == pytest.approx(e, rel=1e-9)
    assert MM == pytest.approx(M, rel=1e-9)


def test_io_map_of_bounded_triple_is_causal_and_small():
    tr = _bounded_triple()
    F = build_io_map(tr, 0.5, 32, 2.0)
    assert F.is_causal()
    br = io_norm(F)
    assert 0 < br.lower <= br.upper
    # ||F_t|| <= t sup||T|| ||B|| ||C|| for a contraction semigroup
    assert br.upper <= 0.5 * np.linalg.norm(tr.B.matrix, 2) * (1 + 1e-6)
    fb = feedback_check(F)
    assert fb.passed


def test_feedback_check_detects_singular_matrix():
    assert not feedback_check(np.eye(3)).passed
    assert feedback_check(0.5 * np.eye(3)).passed


def test_gramian_doubling_matches_quadrature():
    from scipy import integrate

    from semipert.admissibility import _gramian_doubling

    rng = np.random.default_rng(2)
    A = dirichlet_laplacian(12, math.pi, 2.0).matrix + 0.5 * rng.standard_normal((12, 12))
    Q = rng.standard_normal((12, 12))
    Q = Q @ Q.T
    for observe in (True, False):
        W = _gramian_doubling(A, Q, 3.0, observe)
        E = lambda s: __import__("scipy.linalg").linalg.expm(s * A)
        f = (lambda s: E(s).T @ Q @ E(s)) if observe else (lambda s: E(s) @ Q @ E(s).T)
        ref, _ = integrate.quad_vec(f, 0.0, 3.0, epsabs=1e-13, epsrel=1e-12)
        assert np.abs(W - ref).max() / np.abs(ref).max() < 1e-10


def test_point_observation_plateaus_and_generator_observation_grows():
    good = observation_admissibility([(tr.A, tr.C) for tr in map(heat_point_observation, (31, 63, 127))],
                                     1.0, 1.0, probe_count=16)
    assert good.verdict != "FAIL"
    bad = observation_admissibility([(tr.A, tr.C) for tr in map(heat_generator_observation, (32, 64, 128))],
                                    2.0, 1.0, probe_count=8)
    assert bad.verdict == "FAIL"
    c = bad.constants
    assert c[-1] / c[-2] > 1.8


def test_control_admissibility_bounded_is_pass():
    est = control_admissibility([(tr.A, tr.B) for tr in (_bounded_triple(16), _bounded_triple(32))],
                                2.0, 1.0, probe_count=8)
    assert est.verdict == "PASS"


def test_audit_report_keys():
    rep = audit(lambda n: _bounded_triple(n), [16, 32], 2.0, 0.5, probe_count=8, m=16)
    assert set(rep.conditions) == {"compatibility", "control", "observation", "io_norm", "feedback"}
    assert rep.all_pass
    assert rep.as_dict()["sizes"] == [16, 32]
