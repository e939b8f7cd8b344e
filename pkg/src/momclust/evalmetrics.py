"""Partition agreement and parameter-recovery metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matvar import MixtureModel, normalize_scale


@dataclass(frozen=True)
class MapeReport:
    """Mean absolute percentage errors; covariances scored on diagonals only."""

    mape_mean: float
    mape_phi_diag: float
    mape_sigma_diag: float
    n_excluded_zero: int


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be 1-d and of equal length")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def ari(a, b) -> float:
    """Adjusted Rand Index with the Hubert-Arabie chance correction."""
    table = _contingency(a, b)
    if table.sum() == 0:
        raise ValueError("empty partitions")

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(table.sum())
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def align_clusters(est_labels, true_labels, k: int) -> np.ndarray:
    """Permutation p with p[c] = estimated cluster (0-based) matched to true cluster c.

    Maximizes total contingency-table agreement via optimal assignment.
    Labels are 1-based in 1..k.
    """
    from scipy.optimize import linear_sum_assignment

    est = np.asarray(est_labels, dtype=int)
    true = np.asarray(true_labels, dtype=int)
    if est.shape != true.shape:
        raise ValueError("label vectors must have equal length")
    for v in (est, true):
        if v.min() < 1 or v.max() > k:
            raise ValueError(f"labels must lie in 1..{k}")
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (true - 1, est - 1), 1)
    rows, cols = linear_sum_assignment(-table)
    perm = np.empty(k, dtype=int)
    perm[rows] = cols
    return perm


def mape(true_model: MixtureModel, est_model: MixtureModel,
         perm: np.ndarray) -> MapeReport:
    """MAPE over mean entries and covariance diagonals after cluster alignment.

    Both models are scale-normalized (trace(Phi) = T) before comparison;
    entries with a true value of zero are excluded and counted.
    """
    if true_model.k != est_model.k or len(perm) != true_model.k:
        raise ValueError("models and permutation must agree on K")
    errs_mean, errs_phi, errs_sigma = [], [], []
    n_excluded = 0
    for c in range(true_model.k):
        t_comp, _ = normalize_scale(true_model.components[c])
        e_comp, _ = normalize_scale(est_model.components[int(perm[c])])
        for true_vals, est_vals, sink in (
            (t_comp.mean.ravel(), e_comp.mean.ravel(), errs_mean),
            (np.diag(t_comp.time_cov), np.diag(e_comp.time_cov), errs_phi),
            (np.diag(t_comp.var_cov), np.diag(e_comp.var_cov), errs_sigma),
        ):
            nonzero = true_vals != 0
            n_excluded += int(np.sum(~nonzero))
            sink.extend(np.abs((true_vals[nonzero] - est_vals[nonzero])
                               / true_vals[nonzero]))
    if not (errs_mean or errs_phi or errs_sigma):
        raise ValueError("all true parameter values are zero")
    return MapeReport(
        mape_mean=float(np.mean(errs_mean)) if errs_mean else np.nan,
        mape_phi_diag=float(np.mean(errs_phi)) if errs_phi else np.nan,
        mape_sigma_diag=float(np.mean(errs_sigma)) if errs_sigma else np.nan,
        n_excluded_zero=n_excluded,
    )
