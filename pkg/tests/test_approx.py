import io
import math

import numpy as np
import pytest

from minmaxhe.approx import (ELU, RELU, ActivationKind, ChebyshevSeries, activate,
                             error_profile, fit_chebyshev, fit_residual, max_error,
                             monomial_eval, to_monomial, write_profile_csv)
from minmaxhe.errors import DegenerateInterval, InsufficientSamples

from oracles import chebyshev_lstsq, chebyshev_value, relu

# frozen from oracles.chebyshev_lstsq(relu, 2, -1, 1, 10001)
RELU_DEG2_COEFFS = [0.32811094124821955, 0.4999999999999997, 0.23435157187265715]


def identity(x):
    return np.asarray(x, dtype=np.float64)


def test_activate_values():
    assert activate(RELU, -1.0) == 0.0
    assert activate(RELU, 2.5) == 2.5
    assert activate(ELU, 0.0) == 0.0
    assert abs(activate(ELU, -20.0) - (-1.0)) < 1e-8
    assert abs(activate(ActivationKind("elu", 2.0), -20.0) - (-2.0)) < 1e-8


def test_elu_smooth_at_origin():
    h = 1e-7
    left = (activate(ELU, 0.0) - activate(ELU, -h)) / h
    right = (activate(ELU, h) - activate(ELU, 0.0)) / h
    assert left == pytest.approx(1.0, abs=1e-6)
    assert right == pytest.approx(1.0, abs=1e-6)
    assert ELU.derivative(0.0) == 1.0


def test_alpha_must_be_positive():
    with pytest.raises(ValueError):
        ActivationKind("elu", 0.0)


def test_fit_identity_and_constant():
    s = fit_chebyshev(identity, 1, (-1, 1))
    np.testing.assert_allclose(s.coeffs, [0, 1], atol=1e-12)
    s = fit_chebyshev(lambda x: np.ones_like(x), 0, (-1, 1))
    np.testing.assert_allclose(s.coeffs, [1], atol=1e-12)


def test_fit_relu_matches_oracle():
    s = fit_chebyshev(RELU, 2, (-1, 1), 10001)
    np.testing.assert_allclose(s.coeffs, RELU_DEG2_COEFFS, atol=1e-8)
    oracle, _, _ = chebyshev_lstsq(relu, 2, -1, 1, 10001)
    np.testing.assert_allclose(s.coeffs, oracle, atol=1e-8)


@pytest.mark.parametrize("kind", [RELU, ELU])
@pytest.mark.parametrize("degree", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_fit_matches_oracle_grid(kind, degree, r):
    s = fit_chebyshev(kind, degree, (-r, r), 2001)
    oracle, _, _ = chebyshev_lstsq(kind, degree, -r, r, 2001)
    np.testing.assert_allclose(s.coeffs, oracle, atol=1e-8)


def test_fit_errors():
    with pytest.raises(DegenerateInterval):
        fit_chebyshev(RELU, 2, (1, 1))
    with pytest.raises(DegenerateInterval):
        fit_chebyshev(RELU, 2, (2, 1))
    with pytest.raises(InsufficientSamples):
        fit_chebyshev(RELU, 3, (-1, 1), 39)


def test_fit_deterministic():
    a = fit_chebyshev(ELU, 5, (-2, 2))
    b = fit_chebyshev(ELU, 5, (-2, 2))
    assert np.array(a.coeffs).tobytes() == np.array(b.coeffs).tobytes()


def test_eval_examples():
    assert ChebyshevSeries((0, 1), (-1, 1))(0.5) == 0.5
    assert ChebyshevSeries((0, 0, 1), (-1, 1))(0.5) == pytest.approx(-0.5, abs=1e-15)
    assert ChebyshevSeries((0, 1), (0, 4))(3.0) == 0.5


def test_eval_extrapolates_outside_interval(rng):
    c = rng.normal(size=5)
    s = ChebyshevSeries(tuple(c), (-2, 2))
    for x in [-7.0, -2.5, 0.3, 3.0, 10.0]:
        assert s(x) == pytest.approx(chebyshev_value(c, -2, 2, x), rel=1e-10, abs=1e-10)


def test_to_monomial_examples():
    np.testing.assert_allclose(to_monomial(ChebyshevSeries((0, 0, 1))), [-1, 0, 2])
    np.testing.assert_allclose(to_monomial(ChebyshevSeries((1,), (3, 8))), [1])
    np.testing.assert_allclose(to_monomial(ChebyshevSeries((0, 1), (0, 4))), [-1, 0.5])


@pytest.mark.parametrize("degree", range(0, 7))
@pytest.mark.parametrize("interval", [(-1, 1), (-3, 3), (0, 4), (-2, 5)])
def test_monomial_agrees_with_clenshaw(rng, degree, interval):
    s = ChebyshevSeries(tuple(rng.normal(size=degree + 1)), interval)
    x = np.linspace(*interval, 1001)
    np.testing.assert_allclose(monomial_eval(to_monomial(s), x), s(x), rtol=0, atol=1e-9)


def test_derivative_matches_finite_difference(rng):
    s = ChebyshevSeries(tuple(rng.normal(size=6)), (-2, 3))
    d = s.derivative()
    x = np.linspace(-3, 4, 41)
    h = 1e-6
    np.testing.assert_allclose(d(x), (s(x + h) - s(x - h)) / (2 * h), rtol=1e-6, atol=1e-6)


def test_error_profile_identity_exact():
    s = fit_chebyshev(identity, 1, (-1, 1))
    prof = error_profile(s, identity, (-1, 1, 101))
    assert prof.shape == (101, 2)
    assert np.all(np.diff(prof[:, 0]) > 0)
    assert prof[:, 1].max() < 1e-9


def test_error_profile_equals_fit_residuals():
    s = fit_chebyshev(ELU, 3, (-2, 2), 401)
    _, x, resid = chebyshev_lstsq(ELU, 3, -2, 2, 401)
    prof = error_profile(s, ELU, (-2, 2, 401))
    np.testing.assert_allclose(prof[:, 0], x)
    np.testing.assert_allclose(prof[:, 1], np.abs(resid), atol=1e-10)


def test_relu_error_near_origin_exceeds_elu():
    relu_s = fit_chebyshev(RELU, 3, (-3, 3))
    elu_s = fit_chebyshev(ELU, 3, (-3, 3))
    assert max_error(relu_s, RELU, -0.5, 0.5) > max_error(elu_s, ELU, -0.5, 0.5)


@pytest.mark.parametrize("kind", [RELU, ELU, ActivationKind("elu", 0.5)])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_residual_nonincreasing_in_degree(kind, r):
    res = [fit_residual(fit_chebyshev(kind, n, (-r, r)), kind) for n in range(0, 7)]
    assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(res, res[1:]))


@pytest.mark.parametrize("kind", [RELU, ELU])
@pytest.mark.parametrize("degree", range(2, 7))
def test_smaller_interval_never_worse(kind, degree):
    big = fit_chebyshev(kind, degree, (-3, 3))
    small = fit_chebyshev(kind, degree, (-1, 1))
    assert max_error(small, kind, -1, 1) <= max_error(big, kind, -1, 1)


def test_series_validation():
    with pytest.raises(DegenerateInterval):
        ChebyshevSeries((1.0,), (2, 2))
    with pytest.raises(ValueError):
        ChebyshevSeries((float("nan"),))


def test_series_json_roundtrip():
    s = fit_chebyshev(ELU, 4, (-2, 2))
    d = s.to_dict()
    assert d["degree"] == 4 and len(d["coeffs"]) == 5
    assert ChebyshevSeries.from_dict(d) == s


def test_profile_csv_format():
    s = fit_chebyshev(ELU, 2, (-1, 1))
    prof = error_profile(s, ELU, (-1, 1, 5))
    buf = io.StringIO()
    write_profile_csv(prof, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,abs_error"
    assert len(lines) == 6
    x, e = map(float, lines[3].split(","))
    assert x == prof[2, 0] and e == prof[2, 1]
