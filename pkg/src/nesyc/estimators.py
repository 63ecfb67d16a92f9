"""scikit-learn style wrapper around rule reformulation.

``X`` is a sequence of :class:`~nesyc.reformulation.Transition` objects and
``y`` their affordances (taken from the transitions when omitted).
``predict`` says whether the learned preconditions admit each action, and
``score`` reports the HI value of the learned constraints.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .domain import HOUSEHOLD, frame_bk
from .reformulation import (
    ExperienceSet,
    ReformulationConfig,
    Transition,
    reformulate,
    translate_transition,
)
from .scoring import CoverageCache, ScoringParams, score


def _relabel(X, y) -> list:
    X = list(X)
    if y is None:
        return X
    y = np.asarray(y).astype(int).ravel()
    if len(y) != len(X):
        raise ValueError(f"X has {len(X)} transitions but y has {len(y)} labels")
    return [Transition(t.pre_state, t.action, t.post_state, int(v)) for t, v in zip(X, y)]


class RuleLearner(BaseEstimator):
    def __init__(self, batch_size=6, itermax=3, alpha=0.5, lam=0.5, max_body_len=2,
                 max_clauses=8, random_state=0, domain=HOUSEHOLD):
        self.batch_size = batch_size
        self.itermax = itermax
        self.alpha = alpha
        self.lam = lam
        self.max_body_len = max_body_len
        self.max_clauses = max_clauses
        self.random_state = random_state
        self.domain = domain

    def _config(self) -> ReformulationConfig:
        return ReformulationConfig(self.batch_size, self.itermax, None,
                                   ScoringParams(self.alpha, self.lam), self.random_state,
                                   self.max_body_len, self.max_clauses)

    def fit(self, X, y=None, seed_h=None):
        xs = ExperienceSet()
        xs.add("fit", _relabel(X, y))
        trace: list = []
        self.knowledge_ = reformulate(xs, seed_h, self._config(), self.domain, trace_out=trace)
        self.trace_ = trace[0]
        self.bk_ = frame_bk(self.domain)
        return self

    def _examples(self, X, y=None) -> list:
        return [translate_transition(t, i, self.domain, "T", f"x{i}")
                for i, t in enumerate(_relabel(X, y))]

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "knowledge_")
        cache = CoverageCache(self.bk_)
        h = self.knowledge_.constraints
        return np.array([int(cache.is_model(h, e)) for e in self._examples(X)], dtype=int)

    def score(self, X, y=None, sample_weight=None) -> float:
        check_is_fitted(self, "knowledge_")
        return score(self.knowledge_.constraints, self._examples(X, y), self.bk_,
                     ScoringParams(self.alpha, self.lam)).value
