import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import logsumexp

from cannav.core.errors import ContractError, DimensionError, EmptyBatchError
from cannav.models import bounds as bounds_module
from cannav.models.bounds import diagonal_kl, estimate_cmi, gaussian_kl, kl_bounds
from cannav.models.causal import CausalUnderstandingModule, GaussianPrediction, MixturePrediction, TransitionBatch
from cannav.numeric.optim import Adam, linear_lr
from cannav.numeric.tensor import Tensor


def _gauss(mu, log_var):
    return GaussianPrediction(np.asarray(mu, float), np.asarray(log_var, float))


def _numeric_kl_1d(f, g):
    f_sd = math.exp(0.5 * f.log_var[0])
    g_sd = np.exp(0.5 * g.log_var[:, 0])

    def integrand(x):
        log_p = stats.norm.logpdf(x, f.mu[0], f_sd)
        log_q = logsumexp(stats.norm.logpdf(x, g.mu[:, 0], g_sd)) - math.log(len(g_sd))
        return math.exp(log_p) * (log_p - log_q)

    lo, hi = f.mu[0] - 10 * f_sd, f.mu[0] + 10 * f_sd
    return integrate.quad(integrand, lo, hi, limit=200)[0]


def _train(module, h_o, h_a, h_next, steps=600, lr0=0.05):
    batch = TransitionBatch(Tensor(h_o), Tensor(h_a), Tensor(h_next))
    opt = Adam(module.named_parameters())
    for i in range(steps):
        opt.zero_grad()
        module.causal_loss(batch).backward()
        opt.step(linear_lr(i, steps, lr0))


# ---- KL ------------------------------------------------------------------------

def test_kl_of_identical_gaussians_is_zero():
    f = _gauss([0.3, -1.0], [0.2, -0.5])
    assert gaussian_kl(f, f) == 0.0


def test_kl_unit_shift_example():
    f, g = _gauss([0.0], [0.0]), _gauss([1.0], [0.0])
    assert gaussian_kl(f, g) == pytest.approx(0.5)
    numeric = integrate.quad(lambda x: stats.norm.pdf(x) * (stats.norm.logpdf(x) - stats.norm.logpdf(x, 1.0)), -12, 12)[0]
    assert numeric == pytest.approx(0.5, abs=1e-8)


def test_kl_is_asymmetric():
    f, g = _gauss([0.0], [0.0]), _gauss([0.0], [1.0])
    forward, backward = gaussian_kl(f, g), gaussian_kl(g, f)
    assert forward == pytest.approx(0.5 * math.exp(-1.0), abs=1e-12)
    assert backward == pytest.approx(0.5 * (math.e - 2.0), abs=1e-12)
    assert forward != pytest.approx(backward)


def test_kl_rows_broadcast_and_dimension_check():
    kl = diagonal_kl(np.zeros((3, 2)), np.zeros((3, 2)), np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]), np.zeros((3, 2)))
    np.testing.assert_allclose(kl, [0.0, 0.5, 1.0])
    with pytest.raises(DimensionError):
        diagonal_kl(np.zeros(2), np.zeros(2), np.zeros(3), np.zeros(3))


# ---- mixture bounds ------------------------------------------------------------

@pytest.mark.parametrize("dim", [1, 3, 8])
def test_bounds_when_the_mixture_is_the_prediction(dim):
    rng = np.random.default_rng(dim)
    f = _gauss(rng.normal(size=dim), rng.normal(size=dim))
    bounds = kl_bounds(f, MixturePrediction(f.mu[None, :], f.log_var[None, :]))
    assert bounds.upper == pytest.approx(0.0, abs=1e-12)
    assert bounds.lower == pytest.approx(0.5 * dim * math.log(2.0 / math.e), abs=1e-12)


def test_single_component_upper_bound_is_the_kl(rng):
    f = _gauss(rng.normal(size=3), rng.normal(size=3))
    g = _gauss(rng.normal(size=3), rng.normal(size=3))
    bounds = kl_bounds(f, MixturePrediction(g.mu[None, :], g.log_var[None, :]))
    assert bounds.upper == pytest.approx(gaussian_kl(f, g), rel=1e-12)


def test_bounds_are_ordered_over_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        dim = int(rng.integers(1, 6))
        k = int(rng.integers(1, 6))
        f = _gauss(rng.normal(size=dim), rng.normal(scale=0.5, size=dim))
        g = MixturePrediction(rng.normal(size=(k, dim)), rng.normal(scale=0.5, size=(k, dim)))
        bounds = kl_bounds(f, g)
        assert bounds.lower <= bounds.mid <= bounds.upper
        assert bounds.upper >= 0.0


def test_bounds_contain_the_numerical_divergence():
    rng = np.random.default_rng(8)
    for _ in range(100):
        k = int(rng.integers(1, 5))
        f = _gauss(rng.normal(size=1), rng.normal(scale=0.5, size=1))
        g = MixturePrediction(rng.normal(size=(k, 1)), rng.normal(scale=0.5, size=(k, 1)))
        bounds = kl_bounds(f, g)
        true_kl = _numeric_kl_1d(f, g)
        assert bounds.lower - 1e-6 <= true_kl <= bounds.upper + 1e-6


def test_bounds_dimension_check():
    with pytest.raises(DimensionError):
        kl_bounds(_gauss([0.0, 0.0], [0.0, 0.0]), MixturePrediction(np.zeros((2, 3)), np.zeros((2, 3))))


def test_crossed_bounds_are_a_contract_violation(monkeypatch):
    f = _gauss([0.0, 0.0], [0.0, 0.0])
    g = MixturePrediction(np.array([[1.0, 0.0], [0.0, 1.0]]), np.zeros((2, 2)))
    kl_bounds(f, g)
    monkeypatch.setattr(bounds_module, "gaussian_entropy", lambda log_var: -100.0)
    with pytest.raises(ContractError):
        kl_bounds(f, g)


# ---- conditional mutual information ---------------------------------------------

def test_action_determined_transitions_carry_more_information():
    rng = np.random.default_rng(0)
    dim, n = 4, 64
    actions = rng.normal(size=(4, dim))
    h_o = rng.normal(size=(n, dim))
    h_a = actions[rng.integers(4, size=n)]

    independent = CausalUnderstandingModule(dim, np.random.default_rng(1))
    _train(independent, h_o, h_a, 0.5 * h_o)
    determined = CausalUnderstandingModule(dim, np.random.default_rng(1))
    _train(determined, h_o, h_a, h_a.copy())

    low = estimate_cmi(independent, h_o, h_a, components=4, eval_rows=32, seed=0)
    high = estimate_cmi(determined, h_o, h_a, components=4, eval_rows=32, seed=0)
    assert low.upper < 0.05
    assert high.mid > 0.2
    # the independent estimate is its upper bound; its lower bound sits below zero
    assert high.mid >= 10.0 * low.upper
    assert high.upper >= 10.0 * low.upper


def test_single_action_dataset_has_no_information(rng):
    module = CausalUnderstandingModule(3, rng)
    h_o = rng.normal(size=(10, 3))
    h_a = np.tile(rng.normal(size=3), (10, 1))
    estimate = estimate_cmi(module, h_o, h_a, components=5, eval_rows=10, seed=2)
    assert estimate.upper == pytest.approx(0.0, abs=1e-12)


def test_cmi_argument_checks(rng):
    module = CausalUnderstandingModule(2, rng)
    h = rng.normal(size=(4, 2))
    with pytest.raises(ContractError):
        estimate_cmi(module, h, h, components=5)
    with pytest.raises(ContractError):
        estimate_cmi(module, h, h, components=0)
    with pytest.raises(ContractError):
        estimate_cmi(module, h, h, components=2, eval_rows=0)
    with pytest.raises(EmptyBatchError):
        estimate_cmi(module, np.zeros((0, 2)), np.zeros((0, 2)), components=1)
    with pytest.raises(DimensionError):
        estimate_cmi(module, h, h[:3], components=2)


def test_cmi_is_deterministic_per_seed(rng):
    module = CausalUnderstandingModule(3, rng)
    module.predictor.weight.data = rng.normal(size=(6, 6))
    h_o, h_a = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
    a = estimate_cmi(module, h_o, h_a, components=6, eval_rows=12, seed=4)
    b = estimate_cmi(module, h_o, h_a, components=6, eval_rows=12, seed=4)
    assert a == b
    assert a.rows == 12 and a.components == 6
    assert set(a.to_dict()) == {"lower", "mid", "upper", "rows", "components", "seed"}
    for row in a.per_row:
        assert row.lower <= row.mid <= row.upper
    assert a.lower <= a.mid <= a.upper
