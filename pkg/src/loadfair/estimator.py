"""scikit-learn style estimator wrapping :func:`solve_fmlkc`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .core import Facility, Instance, Point, center_loads
from .solver import SolveConfig, solve_fmlkc

__all__ = ["FairMinLoadKClustering"]


class FairMinLoadKClustering(ClusterMixin, BaseEstimator):
    """Fair minimum-load k-clustering.

    Chooses ``n_clusters`` centers and assigns every sample to one of them
    so that each cluster's share of every group lies in ``[beta, alpha]``,
    minimizing the largest sum of distances within a cluster.

    Parameters
    ----------
    n_clusters : int
        Number of centers.
    alpha, beta : sequence of float or str, optional
        Per-group upper and lower share bounds, ordered like
        ``np.unique(groups)``.  Strings such as ``"1/3"`` are exact.  The
        defaults (1 and 0) impose no fairness constraint.
    epsilon : float
        Approximation parameter in ``(0, 1)``.
    mode : {"exhaustive", "metric", "euclidean"}
        How candidate center sets are generated.  ``"euclidean"`` may place
        centers anywhere in space.
    n_reps : int
        Independent candidate lists merged in the sampled modes.
    metric : {"euclidean", "precomputed"}
        With ``"precomputed"``, ``X`` is a square distance matrix.
    facilities : array-like, optional
        Candidate center coordinates, or row indices of ``X`` when
        ``metric="precomputed"``.  Defaults to the samples themselves.
    random_state : int, RandomState or None
        Seed for the sampled modes.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Index of each sample's center in ``center_ids_``.
    center_ids_ : tuple of str
        Chosen centers, ``"f<index>"`` for facilities.
    center_indices_ : ndarray or None
        Facility indices of the centers (``None`` in euclidean mode).
    cluster_centers_ : ndarray or None
        Center coordinates when the metric is euclidean.
    loads_ : ndarray of shape (n_clusters,)
        Sum of distances per center.
    max_load_ : float
        Largest load, the objective value.
    result_ : SolveResult
        Full solver output including its trace.
    """

    def __init__(self, n_clusters=2, *, alpha=None, beta=None, epsilon=0.5, mode="exhaustive", n_reps=3,
                 metric="euclidean", facilities=None, random_state=None):
        self.n_clusters = n_clusters
        self.alpha = alpha
        self.beta = beta
        self.epsilon = epsilon
        self.mode = mode
        self.n_reps = n_reps
        self.metric = metric
        self.facilities = facilities
        self.random_state = random_state

    def _instance(self, X, groups) -> Instance:
        n = X.shape[0]
        if groups is None:
            codes = np.zeros(n, dtype=int)
            n_groups = 1
        else:
            groups = np.asarray(groups)
            if groups.shape != (n,):
                raise ValueError(f"groups has shape {groups.shape}, expected ({n},)")
            uniq, codes = np.unique(groups, return_inverse=True)
            n_groups = len(uniq)
        alpha = [1] * n_groups if self.alpha is None else list(self.alpha)
        beta = [0] * n_groups if self.beta is None else list(self.beta)
        if len(alpha) != n_groups or len(beta) != n_groups:
            raise ValueError(f"alpha and beta need one entry per group ({n_groups})")
        if self.metric == "precomputed":
            if X.shape[0] != X.shape[1]:
                raise ValueError("precomputed distances must be a square matrix")
            fidx = np.arange(n) if self.facilities is None else np.asarray(self.facilities, dtype=int)
            idx = np.concatenate([np.arange(n), fidx])
            points = [Point(f"p{j}", int(codes[j])) for j in range(n)]
            facs = [Facility(f"f{i}") for i in range(len(fidx))]
            return Instance(points, facs, self.n_clusters, alpha, beta, X[np.ix_(idx, idx)]).validate()
        if self.metric != "euclidean":
            raise ValueError(f"unknown metric {self.metric!r}")
        F = X if self.facilities is None else check_array(self.facilities, dtype=float)
        if F.shape[1] != X.shape[1]:
            raise ValueError("facilities and samples differ in dimension")
        points = [Point(f"p{j}", int(codes[j]), tuple(X[j])) for j in range(n)]
        facs = [Facility(f"f{i}", tuple(F[i])) for i in range(F.shape[0])]
        return Instance(points, facs, self.n_clusters, alpha, beta).validate()

    def fit(self, X, y=None, groups=None):
        """Cluster ``X``; ``groups`` holds each sample's group label."""
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        rs = check_random_state(self.random_state)
        inst = self._instance(X, groups)
        cfg = SolveConfig(epsilon=self.epsilon, mode=self.mode, reps=self.n_reps,
                          seed=int(rs.randint(np.iinfo(np.int32).max)))
        res = solve_fmlkc(inst, cfg)
        a = res.assignment
        self.result_ = res
        self.instance_ = inst
        self.labels_ = np.asarray(a.labels)
        self.center_ids_ = a.center_ids
        if self.mode == "euclidean":
            self.center_indices_ = None
        else:
            self.center_indices_ = np.array([inst.facility_index[c] for c in a.center_ids])
        if inst.metric == "euclidean":
            self.cluster_centers_ = np.array([c.coords for c in a.centers])
        else:
            self.cluster_centers_ = None
        self.loads_ = center_loads(inst, a)
        self.max_load_ = float(res.cost)
        return self

    def fit_predict(self, X, y=None, groups=None):
        return self.fit(X, groups=groups).labels_

    @property
    def fair_(self) -> bool:
        check_is_fitted(self, "labels_")
        return bool(self.result_.report(self.instance_)["fair"])
