from __future__ import annotations

import numpy as np
import pytest

from wallid.exceptions import ConfigError, EstimationError
from wallid.optimize import PENALTY, ROSTER, OptimizerConfig, _box_qp, hybrid_optimize


def rastrigin(x):
    x = np.asarray(x)
    return 10 * len(x) + float(np.sum(x**2 - 10 * np.cos(2 * np.pi * x)))


def bowl(x):
    c = np.array([0.3, -1.2, 2.0])
    A = np.diag([1.0, 4.0, 0.5])
    d = np.asarray(x) - c
    return float(d @ A @ d)


def test_convex_bowl_three_dims():
    res = hybrid_optimize(bowl, [0.0, 0.0, 0.0], OptimizerConfig([-5] * 3, [5] * 3, seed=1))
    np.testing.assert_allclose(res.x, [0.3, -1.2, 2.0], atol=1e-6)


def test_rastrigin_2d_reaches_global_basin():
    res = hybrid_optimize(rastrigin, [3.3, -2.7], OptimizerConfig([-5.12] * 2, [5.12] * 2, seed=0))
    assert res.fun < 1e-3


def test_deterministic_under_seed():
    cfg = OptimizerConfig([-5.12] * 2, [5.12] * 2, seed=7, max_iterations=60)
    a = hybrid_optimize(rastrigin, [1.0, 1.0], cfg)
    b = hybrid_optimize(rastrigin, [1.0, 1.0], cfg)
    assert a.x.tolist() == b.x.tolist()
    assert a.trace == b.trace and a.switch_log == b.switch_log


def test_threads_do_not_change_result():
    a = hybrid_optimize(rastrigin, [1.0, 1.0], OptimizerConfig([-5.12] * 2, [5.12] * 2, seed=3,
                                                               max_iterations=40))
    b = hybrid_optimize(rastrigin, [1.0, 1.0], OptimizerConfig([-5.12] * 2, [5.12] * 2, seed=3,
                                                               max_iterations=40, threads=4))
    assert a.trace == b.trace and a.x.tolist() == b.x.tolist()


def test_trace_monotone_and_roster_order():
    res = hybrid_optimize(rastrigin, [2.0, 2.0], OptimizerConfig([-5.12] * 2, [5.12] * 2, seed=0))
    assert np.all(np.diff(res.trace) <= 0)
    names = [s["algorithm"] for s in res.switch_log]
    assert names[0] == "de"
    assert names[: len(ROSTER)] == list(ROSTER)[: len(names)]
    spans = [(s["first_iteration"], s["last_iteration"]) for s in res.switch_log]
    assert all(b[0] == a[1] + 1 for a, b in zip(spans, spans[1:]))


def test_mask_freezes_slots_exactly():
    seen = []

    def f(z):
        seen.append(len(z))
        return float((z[0] - 1.0) ** 2 + (z[1] + 0.5) ** 2)

    x0 = [0.0, 0.123456789, 0.0]
    res = hybrid_optimize(f, x0, OptimizerConfig([-2] * 3, [2] * 3, seed=0), mask=[True, False, True])
    assert res.x[1] == 0.123456789
    assert set(seen) == {2}
    np.testing.assert_allclose(res.x[[0, 2]], [1.0, -0.5], atol=1e-6)


def test_penalized_points_never_reported():
    # the unconstrained minimum sits inside a region that "diverges"
    def f(x):
        if np.linalg.norm(x - 1.0) < 0.3:
            return PENALTY * 2
        return float(np.sum((x - 1.0) ** 2))

    res = hybrid_optimize(f, [-1.0, -1.0], OptimizerConfig([-3] * 2, [3] * 2, seed=0))
    assert res.fun < PENALTY
    assert np.linalg.norm(res.x - 1.0) >= 0.3
    assert res.n_penalties > 0


def test_all_penalties_raise():
    with pytest.raises(EstimationError):
        hybrid_optimize(lambda x: np.inf, [0.0], OptimizerConfig([-1], [1], max_evaluations=200))


def test_stopping_rules():
    cfg = OptimizerConfig([-5.12] * 2, [5.12] * 2, seed=0, max_evaluations=150)
    res = hybrid_optimize(rastrigin, [3.0, 3.0], cfg)
    assert res.stop_reason == "max_evaluations" and res.n_evaluations <= 150
    res = hybrid_optimize(rastrigin, [3.0, 3.0], OptimizerConfig([-5.12] * 2, [5.12] * 2, seed=0,
                                                                 max_iterations=5))
    assert res.stop_reason == "max_iterations" and res.n_iterations == 5
    res = hybrid_optimize(bowl, [0, 0, 0], OptimizerConfig([-5] * 3, [5] * 3, target_cost=1e-2))
    assert res.stop_reason == "target" and res.fun <= 1e-2
    res = hybrid_optimize(bowl, [0, 0, 0], OptimizerConfig([-5] * 3, [5] * 3))
    assert res.stop_reason == "no_progress"


def test_gradient_callback_used():
    calls = {"n": 0}

    def vg(x):
        calls["n"] += 1
        c = np.array([0.3, -1.2, 2.0])
        return bowl(x), 2 * np.diag([1.0, 4.0, 0.5]) @ (np.asarray(x) - c)

    cfg = OptimizerConfig([-5] * 3, [5] * 3, roster=("quasi_newton", "sqp", "dfp"))
    res = hybrid_optimize(bowl, [0.0, 0.0, 0.0], cfg, grad=vg)
    assert calls["n"] > 0
    np.testing.assert_allclose(res.x, [0.3, -1.2, 2.0], atol=1e-6)


def test_minimum_on_the_bound():
    res = hybrid_optimize(lambda x: float(np.sum((x - 3.0) ** 2)), [0.0, 0.0],
                          OptimizerConfig([-1] * 2, [1] * 2, roster=("sqp",)))
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-9)


def test_box_qp_against_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.normal(size=(3, 3))
        B = M @ M.T + 0.1 * np.eye(3)
        g = rng.normal(size=3)
        lo, hi = -rng.uniform(0.1, 1, 3), rng.uniform(0.1, 1, 3)
        d = _box_qp(B, g, lo, hi)
        q = lambda v: g @ v + 0.5 * v @ B @ v  # noqa: E731
        grid = np.stack(np.meshgrid(*[np.linspace(a, b, 25) for a, b in zip(lo, hi)]), -1).reshape(-1, 3)
        best = np.min(grid @ g + 0.5 * np.einsum("ij,jk,ik->i", grid, B, grid))
        assert q(d) <= best + 1e-9


def test_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig([0.0], [0.0])
    with pytest.raises(ConfigError):
        OptimizerConfig([0.0], [np.inf])
    with pytest.raises(ConfigError):
        OptimizerConfig([0.0], [1.0], roster=("newton",))
    with pytest.raises(ConfigError):
        hybrid_optimize(bowl, [0, 0, 0], OptimizerConfig([-1] * 3, [1] * 3), mask=[False] * 3)
