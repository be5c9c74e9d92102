from __future__ import annotations

import json

import numpy as np
import pytest
from pydantic import ValidationError

from opt.base import DomainEvaluationError, InvalidInputError, InvalidSpecError
from opt.problems import (
    ObjectiveBundle,
    eval_jacobian,
    eval_objectives,
    fd_gradient_check,
    gen_leastsquares,
    gen_logsumexp,
    gen_nonconvex_pair,
    generate_bundle,
    leastsquares_bundle,
    logsumexp_bundle,
    nonconvex_pair_bundle,
    spectral_norm_sq,
    uniform,
    uniform_stream,
)
from opt.schema import ProblemSpec

from conftest import isotropic_quadratics


def test_leastsquares_identity_zero_residual():
    bundle = leastsquares_bundle([np.eye(2), np.eye(2)], [np.zeros(2), np.zeros(2)], 0.0)
    np.testing.assert_array_equal(eval_objectives(bundle, np.zeros(2)), [0.0, 0.0])
    jac = eval_jacobian(bundle, np.array([1.0, 2.0]))
    np.testing.assert_allclose(jac[:, 0], [1.0, 2.0])
    np.testing.assert_allclose(jac[:, 1], [1.0, 2.0])


def test_logsumexp_zero_data_gives_log_p():
    p, n = 7, 3
    A = [np.zeros((p, n))] * 3
    b = [np.zeros(p)] * 3
    bundle = logsumexp_bundle(A, b, 0.0)
    x = np.array([0.3, -1.2, 4.0])
    np.testing.assert_allclose(eval_objectives(bundle, x), np.full(3, np.log(p)))

    bundle = logsumexp_bundle(A, b, 0.5)
    jac = eval_jacobian(bundle, x)
    for j in range(3):
        np.testing.assert_allclose(jac[:, j], 0.5 * x, atol=1e-15)


def test_seeded_logsumexp_matches_naive_sum():
    spec = ProblemSpec(family="logsumexp", seed=7, n=4, p=5, delta=0.05)
    bundle = gen_logsumexp(spec)
    x = uniform(np.random.default_rng(1), -1.0, 1.0, 4)

    expected = []
    for j in range(3):
        A = uniform(uniform_stream(7, "logsumexp", f"A{j}"), -1.0, 1.0, (5, 4))
        b = uniform(uniform_stream(7, "logsumexp", f"b{j}"), -1.0, 1.0, 5)
        expected.append(0.025 * float(x @ x) + np.log(sum(np.exp(A[i] @ x - b[i]) for i in range(5))))
    np.testing.assert_allclose(eval_objectives(bundle, x), expected, rtol=1e-13)


def test_logsumexp_is_stable_for_large_arguments():
    A = [np.array([[1.0], [2.0]])] * 3
    b = [np.zeros(2)] * 3
    bundle = logsumexp_bundle(A, b, 0.0)
    values = eval_objectives(bundle, np.array([1000.0]))
    assert np.all(np.isfinite(values))
    assert values[0] == pytest.approx(2000.0 + np.log1p(np.exp(-1000.0)))


def test_generators_default_spec_matches_setup():
    spec = ProblemSpec(family="logsumexp", seed=1)
    assert (spec.n, spec.p, spec.delta) == (100, 100, 0.05)
    assert gen_logsumexp(spec).mu == pytest.approx(0.05)
    assert gen_logsumexp(ProblemSpec(family="logsumexp", seed=1, n=3, p=2, delta=0.0)).mu == 0.0


@pytest.mark.parametrize(
    "family, m",
    [("logsumexp", 3), ("leastsquares", 2), ("nonconvex_pair", 2)],
)
def test_generators_are_deterministic(family, m):
    spec = ProblemSpec(family=family, seed=11, n=6, p=4, delta=0.1)
    b1, b2 = generate_bundle(spec), generate_bundle(spec)
    assert b1.m == b2.m == m
    gen = np.random.default_rng(5)
    for _ in range(10):
        x = gen.uniform(-2, 2, 6)
        np.testing.assert_array_equal(eval_objectives(b1, x), eval_objectives(b2, x))
        np.testing.assert_array_equal(eval_jacobian(b1, x), eval_jacobian(b2, x))


def test_changing_seed_changes_data():
    x = np.linspace(-1, 1, 6)
    f1 = eval_objectives(generate_bundle(ProblemSpec(family="leastsquares", seed=1, n=6, p=4)), x)
    f2 = eval_objectives(generate_bundle(ProblemSpec(family="leastsquares", seed=2, n=6, p=4)), x)
    assert not np.array_equal(f1, f2)


def test_leastsquares_lipschitz_matches_dense_eigensolve():
    spec = ProblemSpec(family="leastsquares", seed=3, n=10, p=10, delta=0.05)
    bundle = gen_leastsquares(spec)
    dense = 0.0
    for j in range(2):
        A = uniform(uniform_stream(3, "leastsquares", f"A{j}"), 0.0, 1.0, (10, 10))
        dense = max(dense, 0.05 + np.linalg.eigvalsh(A.T @ A).max())
    assert bundle.lipschitz == pytest.approx(dense, rel=1e-6)
    assert bundle.mu == pytest.approx(0.05)


def test_leastsquares_lipschitz_bounds_rayleigh_quotient():
    spec = ProblemSpec(family="leastsquares", seed=4, n=12, p=8, delta=0.05)
    bundle = gen_leastsquares(spec)
    gen = np.random.default_rng(0)
    for j in range(2):
        A = uniform(uniform_stream(4, "leastsquares", f"A{j}"), 0.0, 1.0, (8, 12))
        H = 0.05 * np.eye(12) + A.T @ A
        for _ in range(100):
            g = gen.normal(size=12)
            assert g @ H @ g / (g @ g) <= bundle.lipschitz


def test_leastsquares_zero_data_is_pure_regularizer():
    bundle = leastsquares_bundle([np.zeros((3, 2))] * 2, [np.zeros(3)] * 2, 0.3)
    x = np.array([1.0, -2.0])
    np.testing.assert_allclose(eval_jacobian(bundle, x), np.column_stack([0.3 * x, 0.3 * x]))


def test_spectral_norm_sq_of_diagonal():
    assert spectral_norm_sq(np.diag([3.0, 1.0, 2.0])) == pytest.approx(9.0, rel=1e-8)
    assert spectral_norm_sq(np.zeros((2, 3))) == 0.0


def test_nonconvex_pair_zero_directions_are_constant():
    bundle = nonconvex_pair_bundle(np.zeros(3), np.zeros(3))
    x = np.array([1.0, 5.0, -2.0])
    np.testing.assert_allclose(eval_objectives(bundle, x), [2.0, 2.0])
    np.testing.assert_array_equal(eval_jacobian(bundle, x), np.zeros((3, 2)))


def test_nonconvex_pair_sum_identity():
    bundle = gen_nonconvex_pair(ProblemSpec(family="nonconvex_pair", seed=9, n=5))
    a1 = uniform(uniform_stream(9, "nonconvex_pair", "a1"), 0.0, 1.0, 5)
    a2 = uniform(uniform_stream(9, "nonconvex_pair", "a2"), 0.0, 1.0, 5)
    gen = np.random.default_rng(2)
    for _ in range(5):
        x = gen.uniform(-2, 2, 5)
        s1, s2 = a1 @ x, a2 @ x
        f1, f2 = eval_objectives(bundle, x)
        lhs = f1 + f2 - 2.0 * np.exp(-(s2 ** 2))
        assert lhs == pytest.approx(np.sqrt(1 + s1 ** 2) + np.sqrt(1 + s2 ** 2), rel=1e-12)
    assert bundle.mu == 0.0 and bundle.lipschitz is None


@pytest.mark.parametrize("family", ["logsumexp", "leastsquares", "nonconvex_pair"])
def test_seeded_families_pass_fd_check(family):
    bundle = generate_bundle(ProblemSpec(family=family, seed=21, n=8, p=6, delta=0.05))
    x = np.random.default_rng(3).uniform(-2, 2, 8)
    assert fd_gradient_check(bundle, x, h=1e-5) <= 1e-6


def test_fd_check_is_exact_for_quadratics():
    bundle = isotropic_quadratics([[0.1, -0.2, 0.0], [0.0, 0.3, 0.1]])
    assert fd_gradient_check(bundle, np.array([0.2, 0.1, -0.1]), h=1e-5) <= 1e-9


def test_fd_check_detects_corrupted_gradient():
    base = isotropic_quadratics([[0.0, 0.0], [0.5, 0.0]])

    def bad_gradient(x):
        g = base.gradient_oracle(x).copy()
        g[0, 1] += 1.0
        return g

    bundle = ObjectiveBundle(m=2, n=2, value_oracle=base.value_oracle, gradient_oracle=bad_gradient)
    assert fd_gradient_check(bundle, np.array([0.1, 0.2])) >= 0.1


def test_fd_check_rejects_bad_step():
    bundle = isotropic_quadratics([[0.0]])
    with pytest.raises(InvalidInputError):
        fd_gradient_check(bundle, np.zeros(1), h=0.1)
    with pytest.raises(InvalidInputError):
        fd_gradient_check(bundle, np.zeros(1), h=0.0)


def test_non_finite_value_reports_objective_index():
    bundle = ObjectiveBundle(
        m=2,
        n=1,
        value_oracle=lambda x: np.array([0.0, np.inf]),
        gradient_oracle=lambda x: np.zeros((1, 2)),
    )
    with pytest.raises(DomainEvaluationError) as excinfo:
        eval_objectives(bundle, np.zeros(1))
    assert excinfo.value.index == 1


def test_eval_rejects_non_finite_point():
    bundle = isotropic_quadratics([[0.0, 0.0]])
    with pytest.raises(InvalidInputError):
        eval_objectives(bundle, np.array([np.nan, 0.0]))
    with pytest.raises(InvalidInputError):
        eval_objectives(bundle, np.zeros(3))


@pytest.mark.parametrize(
    "spec, generator",
    [
        (ProblemSpec(family="logsumexp", seed=1, n=0, p=3), gen_logsumexp),
        (ProblemSpec(family="leastsquares", seed=1, n=3, p=0), gen_leastsquares),
        (ProblemSpec(family="leastsquares", seed=1, n=3, p=3), gen_logsumexp),
        (ProblemSpec(family="nonconvex_pair", seed=1, n=0), gen_nonconvex_pair),
    ],
)
def test_invalid_specs_are_rejected(spec, generator):
    with pytest.raises(InvalidSpecError):
        generator(spec)


def test_nonconvex_pair_ignores_p():
    bundle = gen_nonconvex_pair(ProblemSpec(family="nonconvex_pair", seed=1, n=3, p=0))
    assert bundle.m == 2


def test_problem_spec_json_is_order_free_and_strict():
    spec = ProblemSpec.model_validate_json('{"delta": 0.1, "n": 5, "seed": 3, "p": 4, "family": "logsumexp"}')
    assert spec == ProblemSpec(family="logsumexp", seed=3, n=5, p=4, delta=0.1)
    assert ProblemSpec.model_validate(json.loads(spec.model_dump_json())) == spec
    with pytest.raises(ValidationError):
        ProblemSpec.model_validate({"family": "logsumexp", "seed": 3, "extra": 1})
    with pytest.raises(ValidationError):
        ProblemSpec.model_validate({"family": "unknown", "seed": 3})
