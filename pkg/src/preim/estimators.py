"""scikit-learn style estimators wrapping the offline/online pipelines.

These adapters expose the learning-shaped pieces of the package through the
fit/transform/predict convention so they compose with sklearn tooling
(`clone`, pipelines, grid search over thresholds). The numerical core lives
in the functional modules; nothing here adds behavior.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bench import get_case, run_pipeline
from .eim import (
    EimApprox,
    EimSelection,
    eim_append,
    interpolate_fields,
    residual_fields,
)
from .pod import GramOperator, pod
from .rom import online_solve, reconstruct


def _as_parameter_vector(x):
    """Accept (n,) or (n, 1) parameter arrays; reject anything wider."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(
            "expected a nonempty 1D parameter array or a single column"
        )
    return arr


class SnapshotPOD(BaseEstimator, TransformerMixin):
    """Orthogonal mode extraction from snapshot rows.

    Parameters
    ----------
    eps : float
        Singular-value truncation threshold.
    mode : {"relative", "absolute"}
    gram : GramOperator or None
        Inner product; None means Euclidean (identity Gram matrix).
    """

    def __init__(self, eps=1e-6, mode="relative", gram=None):
        self.eps = eps
        self.mode = mode
        self.gram = gram

    def _gram(self, n_features):
        if self.gram is not None:
            return self.gram
        import scipy.sparse as sp

        return GramOperator(sp.identity(n_features, format="csr"))

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("expected snapshots as a 2D array (rows)")
        gram = self._gram(X.shape[1])
        basis, sigmas = pod(X, self.eps, gram, mode=self.mode)
        self.basis_ = basis
        self.components_ = basis.vectors.T
        self.singular_values_ = sigmas
        self.n_components_ = basis.size
        self.gram_ = gram
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = np.asarray(X, dtype=float)
        return (self.basis_.vectors.T @ self.gram_.apply(X.T)).T

    def inverse_transform(self, coefficients):
        check_is_fitted(self, "basis_")
        return np.asarray(coefficients, dtype=float) @ self.components_


class EmpiricalInterpolator(BaseEstimator, TransformerMixin):
    """Greedy interpolation basis fitted on field rows.

    ``fit`` runs the magic-point greedy on the training fields until the
    worst sup-norm residual drops to ``eps`` (or ``max_rank`` is hit);
    ``transform`` interpolates new fields from their values at the selected
    points.
    """

    def __init__(self, eps=1e-3, max_rank=None):
        self.eps = eps
        self.max_rank = max_rank

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("expected a nonempty 2D field array")
        cap = X.shape[1] if self.max_rank is None else min(
            int(self.max_rank), X.shape[1])
        eim = EimApprox.empty(X.shape[1])
        while eim.rank < cap:
            res = residual_fields(eim, X)
            norms = np.abs(res).max(axis=1)
            best = int(np.argmax(norms))
            if norms[best] <= self.eps:
                eim.termination_residual = float(norms[best])
                break
            entry = EimSelection(rank=0, parameter=float(best), time_index=0,
                                 point=0, residual_norm=float(norms[best]))
            eim = eim_append(eim, res[best], entry)
        self.eim_ = eim
        self.points_ = eim.points
        self.rank_ = eim.rank
        return self

    def transform(self, X):
        check_is_fitted(self, "eim_")
        return interpolate_fields(self.eim_, np.asarray(X, dtype=float))


class HeatTransferROM(BaseEstimator):
    """Parametric reduced-order surrogate for one benchmark case.

    ``fit(X)`` takes the training parameter values, runs the selected
    offline algorithm and stores the reduced model; ``predict(X)`` returns
    the reconstructed nodal trajectories for new parameter values, with the
    online cost independent of the mesh size.

    Parameters
    ----------
    case : {"a", "b"}
    algo : {"standard", "preim", "preim-nr", "user"}
    refine : int
        Mesh refinement (cells per unit length).
    eps_pod, eps_eim, eps_rb : float or None
        Thresholds; None picks the case defaults.
    rb_criterion : bool
        Enable the reduced-basis stopping criterion as well.
    """

    def __init__(self, case="a", algo="preim", refine=3, eps_pod=None,
                 eps_eim=None, eps_rb=None, rb_criterion=False):
        self.case = case
        self.algo = algo
        self.refine = refine
        self.eps_pod = eps_pod
        self.eps_eim = eps_eim
        self.eps_rb = eps_rb
        self.rb_criterion = rb_criterion

    def fit(self, X, y=None):
        from dataclasses import replace

        mu_train = _as_parameter_vector(X)
        config = get_case(self.case)
        overrides = {"p_train": mu_train}
        if self.eps_pod is not None:
            overrides["eps_pod"] = self.eps_pod
        if self.eps_eim is not None:
            overrides["eps_eim"] = self.eps_eim
        if self.eps_rb is not None:
            overrides["eps_rb"] = self.eps_rb
        config = replace(config, **overrides)
        model = config.build_model(self.refine)
        result = run_pipeline(model, config, self.algo,
                              rb_criterion=self.rb_criterion)
        self.config_ = config
        self.model_ = model
        self.rom_ = result.rom
        self.basis_ = result.basis
        self.eim_ = result.eim
        self.hf_parameters_ = result.hf_parameters
        self.n_hf_solves_ = result.n_hf_solves
        self.state_ = result.state
        return self

    def predict_coefficients(self, X):
        """Reduced coefficient trajectories, shape (n, K+1, N)."""
        check_is_fitted(self, "rom_")
        mus = _as_parameter_vector(X)
        return np.stack([
            online_solve(self.rom_, mu).coefficients for mu in mus
        ])

    def predict(self, X):
        """Nodal trajectories, shape (n, K+1, n_nodes)."""
        check_is_fitted(self, "rom_")
        mus = _as_parameter_vector(X)
        return np.stack([
            reconstruct(self.basis_, online_solve(self.rom_, mu)).fields
            for mu in mus
        ])
