from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from wallid.estimators import ConductivityEstimator, WindowSelector
from wallid.twin import SyntheticTwinSpec, generate_twin


@pytest.fixture(scope="module")
def data(wall, sensors):
    twin = generate_twin(SyntheticTwinSpec(days=20, seed=5), wall, sensors)
    X = np.column_stack([twin.T_out, twin.T_in])
    return X, twin.obs, twin


def test_params_and_clone():
    est = ConductivityEstimator(kind="piecewise", duration_day=2.0)
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(kind="linear")
    assert c.kind == "linear" and est.kind == "piecewise"
    assert "duration_day" in WindowSelector().get_params()


def test_fit_predict(data):
    X, y, twin = data
    est = ConductivityEstimator(kind="piecewise", t_ini_day=8.0, duration_day=3.0, max_iterations=60)
    with pytest.raises(NotFittedError):
        est.predict(X)
    est.fit(X, y)
    assert est.params_.shape == (3,) and est.param_names_ == ["k1", "k2", "k3"]
    assert est.window_hours_ == (192.0, 264.0)
    k = est.conductivity([0.1, 0.3])
    assert k[0] == pytest.approx(est.params_[0] * est.scales_.k_ref)
    pred = est.predict(X)
    assert pred.shape == y.shape
    assert np.mean(np.abs(pred[48:] - twin.obs_clean[48:])) < 0.5
    # inner sensors barely move over 20 days, so score against the noise-free traces
    assert est.score(X, twin.obs_clean) > 0.95


def test_fit_is_reproducible(data):
    X, y, _ = data
    kw = dict(kind="piecewise", t_ini_day=8.0, duration_day=1.0, max_iterations=40, random_state=1)
    a = ConductivityEstimator(**kw).fit(X, y).params_
    b = ConductivityEstimator(**kw).fit(X, y).params_
    np.testing.assert_array_equal(a, b)


def test_input_validation(data):
    X, y, _ = data
    with pytest.raises(ValueError):
        ConductivityEstimator().fit(X[:, :1], y)
    with pytest.raises(ValueError):
        ConductivityEstimator().fit(X, y[:, :2])
    with pytest.raises(ValueError):
        ConductivityEstimator(kind="cubic").fit(X, y)
    with pytest.raises(ValueError):
        ConductivityEstimator().fit(X, y, hours=np.zeros(len(X)))
    Xn = X.copy()
    Xn[3, 0] = np.nan
    with pytest.raises(ValueError):
        ConductivityEstimator().fit(Xn, y)


def test_window_selector(data):
    X, _, _ = data
    sel = WindowSelector(kind="piecewise", duration_day=3.0).fit(X)
    assert len(sel.psi_) == 6
    assert sel.psi_[int(np.argmax(sel.psi_))] == sel.scan_.max_psi
    assert sel.best_plan_.t_ini == sel.t_ini_days_[int(np.argmax(sel.psi_))]
    Xw = sel.transform(X)
    assert Xw.shape == (73, 2)
    start = int(sel.best_plan_.start_hours)
    np.testing.assert_array_equal(Xw, X[start:start + 73])
