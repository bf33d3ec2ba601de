"""EM / NSEM / BIM steppers and the trajectory driver."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsem.analysis import expectation_recursion
from nsem.errors import ArgumentError, DomainError, NumericError, UnsupportedError
from nsem.model import GbmModel, SdeModel
from nsem.rng import BrownianPath, SeedSpec, generate_increments, generate_path
from nsem.schemes import (
    BimParams,
    Denominator,
    SchemeSpec,
    bim_step,
    em_step,
    exp_bound,
    integrate,
    integrate_many,
    linear_bound,
    nsem_step,
    write_trajectory_csv,
)

GBM = GbmModel(-1.0, 0.1).to_sde()


def test_em_step_examples():
    assert em_step(GBM, 1.0, 0.5, 0.2)[0] == pytest.approx(0.52, abs=1e-15)
    assert em_step(GBM, 0.7, 0.0, 0.0)[0] == 0.7
    det = GbmModel(-1.0, 0.0).to_sde()
    assert em_step(det, 1.0, 2.5, 0.0)[0] == -1.5


def test_nsem_step_examples():
    d = Denominator(1.0)
    assert d(0.5) == pytest.approx(0.3934693, abs=1e-7)
    assert nsem_step(GBM, 1.0, d, 0.5, 0.2)[0] == pytest.approx(math.exp(-0.5) + 0.02, rel=1e-15)
    assert nsem_step(GBM, 1.0, d, 0.5, 0.2)[0] == pytest.approx(0.6265307, abs=1e-7)
    flat = SdeModel(lambda x: np.zeros(1), lambda x: np.ones((1, 1)), [3.0], 1.0)
    assert nsem_step(flat, 3.0, d, 7.0, 0.0)[0] == 3.0


@pytest.mark.parametrize("h", [0.1, 1.0, 2.0, 10.0])
def test_nsem_one_step_decay_is_exact(h):
    lam = 1.0
    det = GbmModel(-lam, 0.0).to_sde()
    x = nsem_step(det, 1.0, Denominator(lam), h, 0.0)[0]
    assert x == pytest.approx(math.exp(-lam * h), rel=1e-12)


def test_bim_step_examples():
    x = bim_step(GBM, 1.0, BimParams(1.0, 0.1), 0.5, 0.2)[0]
    assert x == pytest.approx(1.04 / 1.52, rel=1e-15)
    assert x == pytest.approx(0.6842105, abs=1e-7)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 10), st.floats(0, 5), st.floats(-3, 3))
def test_bim_without_weights_is_em(x, h, dw):
    assert bim_step(GBM, x, BimParams(0.0, 0.0), h, dw)[0] == em_step(GBM, x, h, dw)[0]


@settings(max_examples=300, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.01, 2), st.floats(1e-6, 100), st.floats(1e-6, 50),
       st.floats(-50, 50))
def test_bim_positive_for_decay(lam, sigma, x, h, dw):
    model = GbmModel.decay(lam, sigma).to_sde()
    assert bim_step(model, x, BimParams(lam, sigma), h, dw)[0] > 0


def test_bim_requires_scalar_model():
    m = SdeModel(lambda x: -x, lambda x: np.eye(2), [1.0, 1.0], 1.0)
    with pytest.raises(UnsupportedError):
        bim_step(m, [1.0, 1.0], BimParams(1, 1), 0.1, [0.0, 0.0])
    path = generate_path(SeedSpec(1), 0.1, 5, dim=2)
    with pytest.raises(UnsupportedError):
        integrate(m, SchemeSpec.bim_scheme(1, 1), path)


def test_bim_params_validation():
    with pytest.raises(ArgumentError):
        BimParams(-1.0, 0.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-6, 10), st.floats(0.1, 5))
def test_denominator_bounds(h, alpha):
    phi = Denominator(alpha)(h)
    assert 0 < phi <= 1 / alpha
    if alpha * h <= 30:  # beyond that exp(-alpha h) is below rounding and phi == 1/alpha
        assert phi < 1 / alpha
    if h <= 1 / alpha:
        assert abs(phi - h) <= alpha * h * h


def test_denominator_generic_bound_and_errors():
    d = Denominator(2.0, lambda x: 1.0 / (1.0 + x))
    assert d(0.5) == pytest.approx((1 - 1 / 2.0) / 2.0)
    with pytest.raises(DomainError):
        Denominator(1.0, lambda x: 2.0)(1.0)
    with pytest.raises(ArgumentError):
        Denominator(0.0)
    with pytest.raises(ArgumentError):
        Denominator(1.0, "exp")
    with pytest.raises(DomainError):
        Denominator(1.0, linear_bound)(1.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 10), st.floats(0, 0.999), st.floats(-3, 3), st.floats(0.1, 3))
def test_linear_bound_recovers_em_bitwise(x, ah, dw, alpha):
    h = ah / alpha
    assert nsem_step(GBM, x, Denominator(alpha, linear_bound), h, dw)[0] == em_step(GBM, x, h, dw)[0]


@pytest.mark.parametrize("h", [0.1, 1.0, 5.0, 50.0])
def test_deterministic_nsem_stays_positive(h):
    model = GbmModel.decay(1.0, 0.0, horizon=50 * h).to_sde()
    path = BrownianPath(h, np.zeros(50))
    states = integrate(model, SchemeSpec.nsem(1.0), path).states[:, 0]
    assert np.all(states >= 0)
    if h <= 5:
        assert np.all(states[:5] > 0)
    else:
        # 1 - phi(h) = exp(-h) is below half an ulp of 1: x - x * 1.0 == 0 exactly
        assert states[1] == 0.0


@settings(max_examples=300, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.01, 2), st.floats(0, 20), st.floats(1e-3, 5), st.floats(-1, 1))
def test_conditional_positivity(lam, sigma, x, h, frac):
    # any increment inside the bound bound(lam h) / sigma keeps the state nonnegative
    dw = frac * float(exp_bound(lam * h)) / sigma
    model = GbmModel.decay(lam, sigma).to_sde()
    assert nsem_step(model, x, Denominator(lam), h, dw)[0] >= -1e-15 * max(x, 1.0)


@pytest.mark.parametrize("h", [0.1, 1.0, 2.0, 10.0])
def test_mean_recursion_is_exact_expectation(h):
    lam = 1.0
    m = expectation_recursion(lam, Denominator(lam), h, 1.0, 20)
    k = np.arange(21)
    exact = np.exp(-lam * h * k)
    eps = np.finfo(float).eps
    assert np.all(np.abs(m - exact) <= 4 * np.maximum(k, 1) * eps * exact)


@pytest.mark.parametrize("h", [0.1, 1.0, 2.0, 10.0])
def test_integrate_deterministic_decay_exact(h):
    model = GbmModel.decay(1.0, 0.0, horizon=10.0).to_sde()
    n = int(round(10.0 / h))
    traj = integrate(model, SchemeSpec.nsem(1.0), BrownianPath(h, np.zeros(n)))
    exact = np.exp(-traj.times)
    assert np.all(np.abs(traj.states[:, 0] - exact) <= 1e-12 * exact)


@pytest.mark.parametrize("h", [0.1, 1.0, 2.0, 5.0, 10.0])
def test_decay_rounding_grows_like_exp_lambda_h(h):
    # x - x * phi(h) cancels: each step loses about eps * exp(lam h) relatively
    model = GbmModel.decay(1.0, 0.0, horizon=20 * h).to_sde()
    traj = integrate(model, SchemeSpec.nsem(1.0), BrownianPath(h, np.zeros(20)))
    exact = np.exp(-traj.times)
    k = np.arange(21)
    bound = 2 * k * np.finfo(float).eps * math.exp(h) + 4 * k * np.finfo(float).eps
    assert np.all(np.abs(traj.states[:, 0] - exact) <= bound * exact)


def test_integrate_zero_path_flat_drift():
    m = SdeModel(lambda x: np.zeros(2), lambda x: np.ones((2, 1)), [1.0, -2.0], 1.0)
    traj = integrate(m, SchemeSpec.em(), BrownianPath(0.1, np.zeros(10)))
    assert np.all(traj.states == np.array([1.0, -2.0]))
    assert traj.states.shape == (11, 2)
    assert traj.times[-1] == pytest.approx(1.0)


def test_em_terminal_value_close_to_exact():
    # T = 1: on T = 10 the deterministic EM bias (1 - h)**256 / exp(-10) alone is ~18 %
    gbm = GbmModel(-1.0, 0.1, horizon=1.0)
    h = 1.0 / 256
    inc = generate_increments(17, range(1000), h, 256)
    states, failed = integrate_many(gbm.to_sde(), SchemeSpec.em(), inc, h)
    w_end = inc[:, :, 0].sum(axis=1)
    y_end = gbm.y0 * np.exp((gbm.mu - 0.5 * gbm.sigma**2) * 1.0 + gbm.sigma * w_end)
    close = np.abs(states[:, -1, 0] - y_end) <= 0.1 * y_end
    assert np.all(failed == -1)
    assert np.count_nonzero(close) >= 950


def test_integrate_errors():
    path = generate_path(SeedSpec(1), 0.1, 10, dim=2)
    with pytest.raises(ArgumentError):
        integrate(GBM, SchemeSpec.em(), path)
    long_path = generate_path(SeedSpec(1), 1.0, 20)
    with pytest.raises(ArgumentError):
        integrate(GBM, SchemeSpec.em(), long_path)  # horizon 10 < 20
    with pytest.raises(ArgumentError):
        em_step(GBM, 1.0, -0.1, 0.0)
    with pytest.raises(ArgumentError):
        em_step(GBM, 1.0, 0.1, [0.0, 0.0])


def test_integrate_reports_failing_step():
    blow = GbmModel(1e300, 0.0, horizon=10.0).to_sde()
    with pytest.raises(NumericError) as info:
        integrate(blow, SchemeSpec.em(), BrownianPath(1.0, np.zeros(5)))
    assert info.value.step == 1


def test_non_finite_coefficients_raise():
    m = SdeModel(lambda x: x / (x - 1.0), lambda x: np.zeros((1, 1)), [0.0], 1.0)
    with np.errstate(divide="ignore"):
        with pytest.raises(NumericError):
            em_step(m, 1.0, 0.1, 0.0)


@pytest.mark.parametrize("scheme", [SchemeSpec.em(), SchemeSpec.nsem(1.0), SchemeSpec.bim_scheme(1.0, 0.5)])
def test_integrate_many_matches_integrate(scheme):
    model = GbmModel(-1.0, 0.5, horizon=2.0).to_sde()
    inc = generate_increments(3, range(5), 0.1, 20)
    states, failed = integrate_many(model, scheme, inc, 0.1)
    assert np.all(failed == -1)
    for p in range(5):
        traj = integrate(model, scheme, BrownianPath(0.1, inc[p]))
        assert np.array_equal(states[p], traj.states)


def test_integrate_many_scalar_loop_path():
    # a non-vectorized model goes through the per-path loop with identical results
    gbm = GbmModel(-1.0, 0.5, horizon=2.0)
    loop = SdeModel(lambda x: -1.0 * np.asarray(x), lambda x: (0.5 * np.asarray(x))[..., None], [1.0], 2.0)
    inc = generate_increments(3, range(4), 0.1, 20)
    a, _ = integrate_many(gbm.to_sde(), SchemeSpec.nsem(1.0), inc, 0.1)
    b, _ = integrate_many(loop, SchemeSpec.nsem(1.0), inc, 0.1)
    assert np.array_equal(a, b)


def test_integrate_many_marks_failures():
    blow = GbmModel(1e300, 0.0, horizon=10.0).to_sde()
    states, failed = integrate_many(blow, SchemeSpec.em(), np.zeros((2, 5, 1)), 1.0)
    assert failed.tolist() == [1, 1]
    assert np.all(np.isnan(states[:, 2:]))


def test_trajectory_csv():
    traj = integrate(GBM, SchemeSpec.em(), BrownianPath(0.5, [0.2, -0.1]))
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,t,x_1"
    assert lines[1] == "0,0,1"
    assert lines[2] == "1,0.5," + format(0.52, ".17g")


def test_scheme_spec_validation():
    with pytest.raises(ArgumentError):
        SchemeSpec("rk4")
    with pytest.raises(ArgumentError):
        SchemeSpec("nsem")
    with pytest.raises(ArgumentError):
        SchemeSpec("bim")
