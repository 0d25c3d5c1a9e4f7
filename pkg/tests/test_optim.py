import math

import numpy as np
import pytest

from chocosim.compression import parse_compressor
from chocosim.consensus import consensus_stepsize
from chocosim.optim import (OptimizerConfig, Workers, consensus_bound,
                            effective_contraction, resolve_gamma, run,
                            theoretical_stepsize, tune_stepsize)
from chocosim.problems import make_quadratic
from chocosim.topology import Graph, fully_connected, mixing_matrix, ring


def _point_mass_problem(n=4, eta_scale=1.0):
    # f_i(x) = 1/2 x^2 in one dimension, no noise, identical nodes
    return make_quadratic(n, 1, heterogeneity=0.0, noise_std=0.0, seed=0,
                          mu=1.0, l_smooth=1.0, xstar_scale=0.0)


# ------------------------------------------------------------ configuration

def test_optimizer_config_validation():
    OptimizerConfig()  # defaults are valid
    with pytest.raises(ValueError):
        OptimizerConfig(algorithm="sgd")
    with pytest.raises(ValueError):
        OptimizerConfig(eta=-0.1)
    with pytest.raises(ValueError):
        OptimizerConfig(momentum_factor=1.0)
    with pytest.raises(ValueError):
        OptimizerConfig(gamma=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(gamma="big")
    with pytest.raises(ValueError):
        OptimizerConfig(iterations=0)
    with pytest.raises(ValueError):
        OptimizerConfig(delta_override=1.5)


def test_worker_buffers_per_algorithm():
    x0 = np.arange(3.0)
    plain = Workers.start(x0, 4, "choco")
    assert plain.x.shape == (4, 3)
    assert np.all(plain.xhat == 0.0) and plain.velocity is None
    mom = Workers.start(x0, 4, "choco-momentum")
    assert mom.velocity.shape == (4, 3)
    ef = Workers.start(x0, 4, "choco-errorfeedback")
    assert np.all(ef.memory == 0.0) and np.all(ef.x_prev == 0.0)
    exact = Workers.start(x0, 4, "decentralized-exact")
    assert exact.xhat is None


# ------------------------------------------------------- baseline identities

def test_full_graph_exact_gossip_tracks_centralized():
    problem = make_quadratic(4, 6, heterogeneity=1.0, noise_std=0.5, seed=1)
    cfg_d = OptimizerConfig(algorithm="decentralized-exact", eta=0.1, iterations=60)
    cfg_c = OptimizerConfig(algorithm="centralized", eta=0.1, iterations=60)
    rec_d = run(problem, cfg_d, mixing_matrix(fully_connected(4)), seed=7)
    rec_c = run(problem, cfg_c, seed=7)
    np.testing.assert_allclose(rec_d.final_x_mean, rec_c.final_x_mean, atol=1e-12)
    np.testing.assert_allclose(rec_d.f_avg, rec_c.f_avg, atol=1e-12)
    assert rec_d.consensus[-1] == 0.0  # uniform averaging collapses every step


def test_single_node_gossip_reduces_to_centralized():
    problem = make_quadratic(1, 5, heterogeneity=0.0, noise_std=0.3, seed=2)
    mixing = mixing_matrix(Graph(1, []))
    cfg = OptimizerConfig(algorithm="choco", eta=0.05, gamma=1.0, iterations=50)
    rec = run(problem, cfg, mixing, parse_compressor("identity"), seed=3)
    rec_c = run(problem, OptimizerConfig(algorithm="centralized", eta=0.05,
                                         iterations=50), seed=3)
    np.testing.assert_allclose(rec.final_x_mean, rec_c.final_x_mean, atol=1e-12)


def test_centralized_single_step_hand_example():
    # f(x) = 1/2 x^2, eta = 1, x0 = 2: one step lands exactly on the optimum
    problem = _point_mass_problem()
    cfg = OptimizerConfig(algorithm="centralized", eta=1.0, iterations=2)
    rec = run(problem, cfg, seed=0, x0=np.array([2.0]))
    assert rec.f_avg == [0.0, 0.0]
    np.testing.assert_array_equal(rec.final_x_mean, [0.0])


def test_lossless_gossip_matches_matrix_recursion():
    # identity compression, gamma=1: from the second iteration onward the
    # iterate matrix follows x <- W x - eta * g for the same gradient draws
    problem = make_quadratic(4, 5, heterogeneity=1.0, noise_std=0.4, seed=4)
    mixing = mixing_matrix(ring(4))
    cfg = OptimizerConfig(algorithm="choco", eta=0.1, gamma=1.0, iterations=12)
    rec = run(problem, cfg, mixing, parse_compressor("identity"), seed=5,
              record_iterates=True)

    from chocosim.optim import Streams
    streams = Streams(5, 4)
    for t in range(1, 12):
        x = rec.iterates[t]
        g = np.stack([problem.stochastic_gradient(i, x[i], streams.grad_at(i, t), t)
                      for i in range(4)])
        np.testing.assert_array_equal(rec.iterates[t + 1], mixing.w @ x - 0.1 * g)


# ----------------------------------------------------------------- momentum

def test_momentum_follows_scalar_recurrence():
    problem = _point_mass_problem()
    mixing = mixing_matrix(fully_connected(4))
    cfg = OptimizerConfig(algorithm="choco-momentum", eta=0.1, gamma=1.0,
                          momentum_factor=0.5, weight_decay=0.25, iterations=6)
    rec = run(problem, cfg, mixing, parse_compressor("identity"), seed=0,
              x0=np.array([2.0]), record_iterates=True)

    x, v = 2.0, 0.0
    for t in range(6):
        pull = x + 0.25 * x  # gradient is x itself, plus weight decay
        v = pull + 0.5 * v
        x = x - 0.1 * v
        assert rec.iterates[t + 1][0, 0] == pytest.approx(x, rel=1e-12)


def test_nesterov_differs_from_heavy_ball():
    problem = make_quadratic(4, 4, heterogeneity=0.5, noise_std=0.0, seed=6)
    mixing = mixing_matrix(ring(4))
    base = dict(algorithm="choco-momentum", eta=0.05, gamma=1.0,
                momentum_factor=0.9, iterations=20)
    plain = run(problem, OptimizerConfig(**base), mixing,
                parse_compressor("identity"), seed=1)
    nest = run(problem, OptimizerConfig(nesterov=True, **base), mixing,
               parse_compressor("identity"), seed=1)
    assert not np.allclose(plain.final_x_mean, nest.final_x_mean)


def test_zero_momentum_matches_plain_variant():
    problem = make_quadratic(4, 4, noise_std=0.3, seed=7)
    mixing = mixing_matrix(ring(4))
    comp = parse_compressor("topk:0.5")
    kw = dict(eta=0.05, gamma=0.2, iterations=30)
    plain = run(problem, OptimizerConfig(algorithm="choco", **kw), mixing, comp, seed=2)
    mom = run(problem, OptimizerConfig(algorithm="choco-momentum",
                                       momentum_factor=0.0, **kw), mixing, comp, seed=2)
    np.testing.assert_array_equal(plain.final_x_mean, mom.final_x_mean)


# ---------------------------------------------------------------- stepsizes

def test_tuned_stepsize_formula_cases():
    assert tune_stepsize(1.0, 0.0, 0.0, 4.0, 100) == 0.25
    assert tune_stepsize(1.0, 1.0, 0.0, 1.0, 99) == pytest.approx(0.1)
    assert tune_stepsize(1.0, 0.0, 1000.0, 1.0, 999) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        tune_stepsize(1.0, 0.0, 0.0, math.inf, 10)
    with pytest.raises(ValueError):
        tune_stepsize(-1.0, 1.0, 1.0, 1.0, 10)
    with pytest.raises(ValueError):
        tune_stepsize(1.0, 1.0, 1.0, 1.0, 0)


def test_theoretical_stepsize_recomputation():
    got = theoretical_stepsize(f0=4.0, l_smooth=1.0, sigma_sq=2.0, g_sq=4.0,
                               n=8, rate_c=0.5, horizon=999)
    expected = min(
        math.sqrt(16.0 / (0.5 * 1000)),
        (16.0 / (576.0 * 1000)) ** (1 / 3),
        0.25,
    )
    assert got == pytest.approx(expected, rel=1e-12)


def test_consensus_bound_hand_value():
    assert consensus_bound(0.01, 8, 4.0, 0.5) == pytest.approx(0.1536)


def test_resolve_gamma_paths():
    mixing = mixing_matrix(fully_connected(4))
    comp = parse_compressor("identity")
    for alg in ("decentralized-exact", "centralized"):
        assert resolve_gamma(OptimizerConfig(algorithm=alg), mixing, comp, 10) == 1.0
    assert resolve_gamma(OptimizerConfig(gamma=0.3), mixing, comp, 10) == 0.3
    auto = resolve_gamma(OptimizerConfig(), mixing, comp, 10)
    assert auto == pytest.approx(1 / 15, abs=1e-15)
    override = OptimizerConfig(delta_override=0.5)
    assert resolve_gamma(override, mixing, comp, 10) == pytest.approx(
        consensus_stepsize(mixing, 0.5))


def test_effective_contraction_minimizes_over_blocks():
    sign = parse_compressor("sign")
    assert effective_contraction(sign, 100) == pytest.approx(0.01)
    assert effective_contraction(sign, 110, [0, 10, 110]) == pytest.approx(0.01)
    assert effective_contraction(sign, 110, [0, 100, 110]) == pytest.approx(0.01)
    ident = parse_compressor("identity")
    assert effective_contraction(ident, 110, [0, 10, 110]) == 1.0


# ----------------------------------------------------------------- run loop

def test_divergence_is_detected_and_flagged():
    problem = _point_mass_problem()
    cfg = OptimizerConfig(algorithm="centralized", eta=2.5, iterations=400)
    rec = run(problem, cfg, seed=0, x0=np.array([1.0]))
    assert rec.diverged and rec.diverged_at is not None
    assert rec.rows() < 400
    assert all(np.isfinite(v) for v in rec.f_avg)  # logged rows stay clean


def test_log_every_row_schedule():
    problem = make_quadratic(4, 3, seed=8)
    cfg = OptimizerConfig(eta=0.01, gamma=0.2, iterations=10)
    rec = run(problem, cfg, mixing_matrix(ring(4)), parse_compressor("sign"),
              seed=0, log_every=3)
    assert rec.t == [3, 6, 9, 10]  # final iteration always logged
    with pytest.raises(ValueError):
        run(problem, cfg, mixing_matrix(ring(4)), log_every=0)


def test_recorded_iterates_cover_every_step():
    problem = make_quadratic(4, 3, seed=9)
    cfg = OptimizerConfig(eta=0.01, gamma=0.2, iterations=7)
    rec = run(problem, cfg, mixing_matrix(ring(4)), parse_compressor("sign"),
              seed=0, record_iterates=True)
    assert len(rec.iterates) == 8
    assert rec.iterates[0].shape == (4, 3)


def test_zero_stepsize_preserves_the_mean():
    problem = make_quadratic(8, 6, noise_std=1.0, seed=10)
    cfg = OptimizerConfig(eta=0.0, iterations=40)
    x0 = np.arange(6.0)
    rec = run(problem, cfg, mixing_matrix(ring(8)), parse_compressor("sign"),
              seed=4, x0=x0)
    np.testing.assert_allclose(rec.final_x_mean, x0, atol=1e-12)


def test_mixing_matrix_is_required_and_sized():
    problem = make_quadratic(4, 3, seed=11)
    cfg = OptimizerConfig(iterations=2)
    with pytest.raises(ValueError):
        run(problem, cfg)
    with pytest.raises(ValueError):
        run(problem, cfg, mixing_matrix(ring(6)))


def test_errorfeedback_tracks_plain_variant_closely():
    problem = make_quadratic(4, 5, noise_std=0.2, seed=12)
    mixing = mixing_matrix(ring(4))
    comp = parse_compressor("topk:0.4")
    kw = dict(eta=0.02, gamma=0.3, iterations=80)
    plain = run(problem, OptimizerConfig(algorithm="choco", **kw), mixing, comp, seed=5)
    ef = run(problem, OptimizerConfig(algorithm="choco-errorfeedback", **kw),
             mixing, comp, seed=5)
    np.testing.assert_allclose(ef.final_x_mean, plain.final_x_mean, rtol=1e-8,
                               atol=1e-10)


def test_broadcast_mode_charges_less_traffic_on_a_ring():
    problem = make_quadratic(8, 4, seed=13)
    cfg = OptimizerConfig(eta=0.01, gamma=0.2, iterations=5)
    mixing = mixing_matrix(ring(8))
    comp = parse_compressor("sign")
    pair = run(problem, cfg, mixing, comp, seed=0)
    bcast = run(problem, cfg, mixing, comp, seed=0, broadcast=True)
    assert pair.ledger.busiest() == 2 * bcast.ledger.busiest()
    np.testing.assert_array_equal(pair.final_x_mean, bcast.final_x_mean)
