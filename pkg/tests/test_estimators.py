import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nesyc.envsim import WorldConfig, gen_dataset, records_to_experiences
from nesyc.estimators import RuleLearner


@pytest.fixture(scope="module")
def transitions():
    xs = records_to_experiences(gen_dataset(WorldConfig(rng_seed=3), 5, seed=1))
    return [tr for _, _, tr in xs.transitions()]


def test_params_and_clone():
    est = RuleLearner(batch_size=4, alpha=0.7)
    assert est.get_params()["batch_size"] == 4
    twin = clone(est)
    assert twin.get_params() == est.get_params() and not hasattr(twin, "knowledge_")
    assert est.set_params(itermax=1).itermax == 1


def test_not_fitted(transitions):
    with pytest.raises(NotFittedError):
        RuleLearner().predict(transitions[:2])


def test_fit_predict_score(transitions):
    y = np.array([t.affordance for t in transitions])
    est = RuleLearner().fit(transitions)
    pred = est.predict(transitions)
    assert pred.shape == y.shape and set(np.unique(pred)) <= {0, 1}
    assert np.all(pred[y == 0] == 0)  # every failure on the training data is explained
    assert est.score(transitions) == pytest.approx(0.5 * (pred[y == 1].mean()))
    assert est.trace_.accepted_hi.value >= est.trace_.first_step_best


def test_fit_is_deterministic(transitions):
    a = RuleLearner().fit(transitions).knowledge_.to_lp()
    b = RuleLearner().fit(transitions).knowledge_.to_lp()
    assert a == b


def test_label_length_mismatch(transitions):
    with pytest.raises(ValueError):
        RuleLearner().fit(transitions, y=[1, 0])
