"""Scikit-learn style wrappers around the functional core.

These estimators follow the usual conventions (constructor stores params
verbatim, fitted state in trailing-underscore attributes, ``fit`` returns
``self``), so they work with ``sklearn.base.clone``, ``get_params`` /
``set_params``, and pipeline-style composition.  The inputs are domain
objects rather than arrays: corpora, prediction sets, embedding sets and
similarity matrices.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_choice, check_unit_interval
from .corpus import low_frequency_filter
from .empirical import empirical_matrix
from .gridsearch import SearchConfig, run_search, select_best
from .merge import apply_plan, build_plan, merge_datasets
from .semantic import semantic_matrix

__all__ = [
    "EmpiricalSimilarity",
    "SemanticSimilarity",
    "LabelMerger",
    "MergeGridSearch",
]


def _check_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )


class EmpiricalSimilarity(BaseEstimator):
    """Estimate the asymmetric empirical similarity matrix of a dataset pair.

    Parameters
    ----------
    min_count : labels rarer than this in either schema are dropped before
        the matrix is built.
    """

    def __init__(self, min_count=5):
        self.min_count = min_count

    def fit(self, predictions, gold):
        """``predictions`` is a PredictionSet over the ``gold`` target corpus."""
        retained_source = low_frequency_filter(
            _schema_of_predictions(predictions), self.min_count
        )
        retained_target = low_frequency_filter(gold.schema, self.min_count)
        self.matrix_ = empirical_matrix(predictions, gold, retained_source, retained_target)
        return self

    def fit_transform(self, predictions, gold):
        return self.fit(predictions, gold).matrix_


def _schema_of_predictions(predictions):
    from .corpus import LabelSchema

    counts: dict[str, int] = {}
    for spans in predictions.records.values():
        for span in spans:
            counts[span.label] = counts.get(span.label, 0) + 1
    return LabelSchema(counts)


class SemanticSimilarity(BaseEstimator):
    """Estimate the semantic similarity matrix of two embedding sets."""

    def __init__(self, centering="global"):
        self.centering = centering

    def fit(self, source_embeddings, target_embeddings):
        self.matrix_ = semantic_matrix(
            source_embeddings, target_embeddings, centering=self.centering
        )
        return self

    def fit_transform(self, source_embeddings, target_embeddings):
        return self.fit(source_embeddings, target_embeddings).matrix_


class LabelMerger(BaseEstimator, TransformerMixin):
    """Fuse similarity matrices into a mapping plan and relabel corpora with it.

    ``fit`` consumes the (semantic, empirical) matrix pair; ``transform``
    relabels a source corpus; ``merge`` additionally concatenates it onto
    a target corpus.
    """

    def __init__(
        self,
        lam=0.5,
        tau=0.3,
        fallback=False,
        unmapped_policy="retain",
        equivalence_band=0.85,
    ):
        self.lam = lam
        self.tau = tau
        self.fallback = fallback
        self.unmapped_policy = unmapped_policy
        self.equivalence_band = equivalence_band

    def fit(self, semantic, empirical):
        check_unit_interval(self.lam, "lam")
        check_unit_interval(self.tau, "tau")
        check_choice(self.unmapped_policy, "unmapped_policy", ("retain", "drop_to_O"))
        self.plan_ = build_plan(
            semantic,
            empirical,
            self.lam,
            self.tau,
            fallback=self.fallback,
            equivalence_band=self.equivalence_band,
        )
        return self

    def transform(self, corpus):
        _check_fitted(self, "plan_")
        return apply_plan(corpus, self.plan_, unmapped_policy=self.unmapped_policy)

    def merge(self, source, target, new_name=None):
        _check_fitted(self, "plan_")
        return merge_datasets(
            source, target, self.plan_, new_name=new_name,
            unmapped_policy=self.unmapped_policy,
        )


class MergeGridSearch(BaseEstimator):
    """Sweep (lambda, tau) with an external evaluator and keep the best cell."""

    def __init__(
        self,
        baseline_f1=0.0,
        evaluator=(),
        lambda_grid=(0.3, 0.4, 0.5, 0.6, 0.7),
        tau_grid=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
        f1_tolerance=0.02,
        tolerance_mode="relative",
        jobs=1,
        fallback=False,
        unmapped_policy="retain",
        work_dir="nerfuse-work",
    ):
        self.baseline_f1 = baseline_f1
        self.evaluator = evaluator
        self.lambda_grid = lambda_grid
        self.tau_grid = tau_grid
        self.f1_tolerance = f1_tolerance
        self.tolerance_mode = tolerance_mode
        self.jobs = jobs
        self.fallback = fallback
        self.unmapped_policy = unmapped_policy
        self.work_dir = work_dir

    def _config(self):
        return SearchConfig(
            baseline_f1=self.baseline_f1,
            evaluator=tuple(self.evaluator),
            lambda_grid=tuple(self.lambda_grid),
            tau_grid=tuple(self.tau_grid),
            f1_tolerance=self.f1_tolerance,
            tolerance_mode=self.tolerance_mode,
            jobs=self.jobs,
            fallback=self.fallback,
            unmapped_policy=self.unmapped_policy,
        )

    def fit(self, source, target, semantic, empirical, test_path):
        config = self._config()
        self.trials_ = run_search(
            config, source, target, semantic, empirical, test_path, self.work_dir
        )
        self.selection_ = select_best(
            self.trials_, self.baseline_f1, self.f1_tolerance, mode=self.tolerance_mode
        )
        self.best_ = self.selection_.canonical
        return self
