"""Dictionary construction, evaluation and Jacobian checks."""

import numpy as np
import pytest

from koopctl.dictionary import (
    Dictionary,
    build_dictionary,
    dictionary_size,
    evaluate,
    evaluate_batch,
    jacobian,
)


def monomial_oracle(exps, x):
    """Loop-based product, independent of the vectorized implementation."""
    out = np.empty(exps.shape[0])
    for i, row in enumerate(exps):
        p = 1.0
        for xj, e in zip(x, row):
            for _ in range(int(e)):
                p *= xj
        out[i] = p
    return out


def fd_jacobian(dic, x, h=1e-6):
    """Central finite differences of the lift."""
    n = len(dic)
    d = dic.state_dim
    jac = np.empty((n, d))
    for j in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (evaluate(dic, xp) - evaluate(dic, xm)) / (2 * h)
    return jac


def test_cardinality_vdp_benchmark():
    assert len(build_dictionary(2, 5, True)) == 21


def test_cardinality_henon_benchmark():
    assert len(build_dictionary(2, 2, False)) == 5


def test_cardinality_scalar():
    d = build_dictionary(1, 1, True)
    assert len(d) == 2
    assert d.exponents.tolist() == [[0], [1]]


def test_cardinality_matches_formula():
    for sd in (1, 2, 3):
        for deg in (1, 2, 3, 4, 5):
            for const in (True, False):
                dic = build_dictionary(sd, deg, const)
                assert len(dic) == dictionary_size(sd, deg, const)


def test_rejects_degenerate_arguments():
    with pytest.raises(ValueError):
        build_dictionary(0, 3)
    with pytest.raises(ValueError):
        build_dictionary(2, 0)


def test_ordering_graded_and_distinct():
    dic = build_dictionary(3, 4, True)
    degrees = dic.exponents.sum(axis=1)
    assert (np.diff(degrees) >= 0).all()
    rows = [tuple(r) for r in dic.exponents.tolist()]
    assert len(set(rows)) == len(rows)
    # within one degree: descending lexicographic
    for deg in range(0, 5):
        block = [r for r in rows if sum(r) == deg]
        assert block == sorted(block, reverse=True)


def test_evaluate_origin_and_ones():
    dic = build_dictionary(2, 2, False)
    assert evaluate(dic, np.zeros(2)).tolist() == [0.0] * 5
    assert evaluate(dic, np.ones(2)).tolist() == [1.0] * 5


def test_evaluate_against_loop_oracle():
    dic = build_dictionary(2, 2, False)
    x = np.array([2.0, 3.0])
    expected = monomial_oracle(dic.exponents, x)
    np.testing.assert_array_equal(evaluate(dic, x), expected)


def test_evaluate_batch_matches_pointwise():
    dic = build_dictionary(2, 4, True)
    rng = np.random.default_rng(7)
    X = rng.uniform(-2, 2, size=(40, 2))
    lifted = evaluate_batch(dic, X)
    for r in range(X.shape[0]):
        np.testing.assert_allclose(lifted[r], evaluate(dic, X[r]), rtol=1e-14)


def test_evaluate_dimension_mismatch():
    dic = build_dictionary(2, 2, False)
    with pytest.raises(ValueError):
        evaluate(dic, np.zeros(3))
    with pytest.raises(ValueError):
        jacobian(dic, np.zeros(1))


def test_determinism_bitwise():
    dic = build_dictionary(2, 5, False)
    x = np.array([0.37, -1.42])
    a = evaluate(dic, x)
    b = evaluate(dic, x)
    assert a.tobytes() == b.tobytes()
    assert jacobian(dic, x).tobytes() == jacobian(dic, x).tobytes()


def test_jacobian_scalar_dictionary():
    dic = build_dictionary(1, 1, True)
    jac = jacobian(dic, np.array([1.7]))
    np.testing.assert_array_equal(jac, np.array([[0.0], [1.0]]))


def test_jacobian_identity_pattern_at_origin():
    dic = build_dictionary(2, 2, False)
    jac = jacobian(dic, np.zeros(2))
    expected = np.zeros((5, 2))
    expected[0, 0] = 1.0
    expected[1, 1] = 1.0
    np.testing.assert_array_equal(jac, expected)


def test_jacobian_against_finite_differences():
    rng = np.random.default_rng(11)
    dic = build_dictionary(2, 3, False)
    for _ in range(20):
        x = rng.uniform(-2, 2, size=2)
        err = np.abs(jacobian(dic, x) - fd_jacobian(dic, x)).max()
        assert err <= 1e-6


def test_jacobian_fd_sweep_dims_and_degrees():
    rng = np.random.default_rng(13)
    for sd in (1, 2, 3):
        for deg in (1, 3, 5):
            dic = build_dictionary(sd, deg, sd == 2)
            for _ in range(5):
                x = rng.uniform(-2, 2, size=sd)
                err = np.abs(jacobian(dic, x) - fd_jacobian(dic, x)).max()
                assert err <= 1e-6


def test_json_round_trip_preserves_order():
    dic = build_dictionary(3, 3, True)
    back = Dictionary.from_json_dict(dic.to_json_dict())
    assert back.state_dim == dic.state_dim
    assert back.max_degree == dic.max_degree
    assert back.include_constant == dic.include_constant
    np.testing.assert_array_equal(back.exponents, dic.exponents)
