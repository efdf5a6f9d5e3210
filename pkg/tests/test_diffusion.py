import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffpol.diffusion import (
    ContractError,
    DiffusionBatch,
    add_noise,
    ddpm_step,
    make_schedule,
    sample,
    schedule_from_betas,
    training_loss,
)
from diffpol.nncore import ConfigError, make_rng


class Stub:
    """Noise predictor returning a fixed function of its inputs."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def forward(self, noisy, k, cond):
        self.calls += 1
        return self.fn(noisy, k, cond)

    def backward(self, g):
        return np.zeros((g.shape[0], 1))


@pytest.mark.parametrize("kind", ["linear", "cosine"])
@pytest.mark.parametrize("K", [1, 10, 100, 1000])
def test_schedule_invariants(kind, K):
    s = make_schedule(K, kind)
    assert np.all((s.betas > 0) & (s.betas < 1))
    assert np.all(np.diff(s.alpha_bars) < 0)
    if kind == "linear" and K > 1:
        assert s.betas[0] == 1e-4 and s.betas[-1] == 0.02


def test_schedule_edge_cases():
    np.testing.assert_array_equal(make_schedule(1, "linear").betas, [1e-4])
    np.testing.assert_array_equal(schedule_from_betas([0.5, 0.5]).alpha_bars, [0.5, 0.25])
    for bad in [dict(K=0), dict(K=10, beta_start=0.0), dict(K=10, beta_end=1.0), dict(K=10, kind="adaptive")]:
        with pytest.raises(ConfigError):
            make_schedule(**bad)


def test_cosine_matches_direct_formula():
    K, s = 50, 0.008
    sched = make_schedule(K, "cosine")
    f = [math.cos((t / K + s) / (1 + s) * math.pi / 2) ** 2 for t in range(K + 1)]
    ref = [min(max(1 - f[t + 1] / f[t], 1e-8), 0.999) for t in range(K)]
    np.testing.assert_allclose(sched.betas, ref, rtol=1e-12)


def test_add_noise_examples():
    s = schedule_from_betas([0.5, 0.5])
    assert add_noise(np.array([2.0]), np.array([1.0]), 1, s)[0] == pytest.approx(1.8660254, abs=1e-7)
    tiny = schedule_from_betas([1e-15])
    assert add_noise(np.array([3.0]), np.array([1.0]), 0, tiny)[0] == pytest.approx(3.0, abs=1e-6)
    huge = schedule_from_betas([1 - 1e-15])
    assert add_noise(np.array([3.0]), np.array([1.0]), 0, huge)[0] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(IndexError):
        add_noise(np.zeros(1), np.zeros(1), 2, s)


def test_add_noise_variance_at_quarter_abar():
    s = schedule_from_betas([0.5, 0.5])
    eps = make_rng(3).standard_normal(10_000)
    out = add_noise(np.zeros(10_000), eps, 1, s)
    assert abs(out.var() - 0.75) / 0.75 < 0.03


def test_training_loss_stubs():
    s = make_schedule(10)
    x0 = np.zeros((2, 4, 1))
    batch = DiffusionBatch(x0, np.zeros((2, 1)), np.array([0, 5]), np.ones_like(x0))
    loss, _ = training_loss(Stub(lambda n, k, c: np.ones_like(n)), batch, s)
    assert loss == 0.0
    loss, _ = training_loss(Stub(lambda n, k, c: np.zeros_like(n)), batch, s)
    assert loss == 1.0
    bad = DiffusionBatch(x0 + 1.5, batch.cond, batch.drawn_steps, batch.drawn_noise)
    with pytest.raises(ContractError):
        training_loss(Stub(lambda n, k, c: n), bad, s)


def test_ddpm_step_examples():
    s = schedule_from_betas([0.5, 0.5])
    out = ddpm_step(np.array([1.0]), np.array([1.0]), 1, s, np.zeros(1))
    # (1/sqrt(0.5)) * (1 - 0.5/sqrt(0.75)) = 1.4142136 * 0.4226497
    assert out[0] == pytest.approx(0.5977170, abs=1e-7)
    assert out[0] == pytest.approx((1 / math.sqrt(0.5)) * (1 - 0.5 / math.sqrt(0.75)), abs=1e-12)
    small = schedule_from_betas([1e-12, 1e-12])
    assert ddpm_step(np.array([0.7]), np.zeros(1), 1, small, np.zeros(1))[0] == pytest.approx(0.7, abs=1e-9)
    with pytest.raises(ContractError):
        ddpm_step(np.zeros(1), np.zeros(1), 0, s, np.ones(1))


def test_sample_single_step_closed_form():
    s = make_schedule(1, "linear", beta_start=0.3, beta_end=0.3)
    model = Stub(lambda n, k, c: np.zeros_like(n))
    x_K = make_rng(9).standard_normal((1, 3, 2))
    out = sample(model, np.zeros(1), s, make_rng(9), (3, 2))
    np.testing.assert_allclose(out, np.clip(x_K[0] / math.sqrt(0.7), -1, 1), rtol=1e-12)
    assert model.calls == 1


def test_sample_deterministic_and_bounded():
    s = make_schedule(20)
    model = Stub(lambda n, k, c: 0.1 * n)
    a = sample(model, np.zeros((3, 2)), s, make_rng(4), (5, 2))
    b = sample(model, np.zeros((3, 2)), s, make_rng(4), (5, 2))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (3, 5, 2) and np.all(np.abs(a) <= 1)


def test_sample_row_independent_of_batch_mates():
    s = make_schedule(10)
    model = Stub(lambda n, k, c: 0.2 * n + c[:, None, :1])
    cond = make_rng(1).standard_normal((3, 2))
    full = sample(model, cond, s, [make_rng(i) for i in range(3)], (4, 2))
    alone = sample(model, cond[1:2], s, [make_rng(1)], (4, 2))
    np.testing.assert_array_equal(full[1], alone[0])


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(-1, 1), st.floats(-1, 1))
def test_ddpm_step_inverts_forward_when_eps_is_exact(beta, x0, eps):
    # one-step schedule: x_1 = sqrt(a) x0 + sqrt(1-a) eps, and the step recovers x0 exactly
    s = schedule_from_betas([beta])
    x1 = add_noise(np.array([x0]), np.array([eps]), 0, s)
    back = ddpm_step(x1, np.array([eps]), 0, s, np.zeros(1))
    assert back[0] == pytest.approx(x0, abs=1e-9)
