"""Competitor models: continuous matrix-normal mixture (MMN) and a full-covariance GMM.

MMN treats the ordinal levels as real values (no truncation), so its E-step is
exact; the M-step reuses the same update code path as the main model with
point-mass moments, so the two methods differ only in the E-step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import matvar, mom, ordinal
from .matvar import ClusterParams, MixtureModel, safe_cholesky


def _mvn_log_density_batch(x: np.ndarray, mean: np.ndarray,
                           cov: np.ndarray) -> np.ndarray:
    """Log N(x | mean, cov) for rows of x, via Cholesky."""
    l = safe_cholesky(cov)
    y = solve_triangular(l, (x - mean).T, lower=True)
    quad = np.sum(y * y, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(l)))
    d = mean.size
    return -0.5 * (d * matvar.LOG_2PI + logdet + quad)


def _exact_responsibilities(v: np.ndarray, model: MixtureModel):
    n = v.shape[0]
    log_joint = np.empty((n, model.k))
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.weights)
    for k, comp in enumerate(model.components):
        cov = matvar.kron_cov(comp.time_cov, comp.var_cov)
        log_joint[:, k] = log_pi[k] + _mvn_log_density_batch(
            v, matvar.vec(comp.mean), cov)
    lse = mom._logsumexp_rows(log_joint)
    tau = np.exp(log_joint - lse[:, None])
    return tau, float(lse.sum())


def mmn_fit(ds: ordinal.OrdinalDataset, cfg: mom.FitConfig) -> mom.FitResult:
    """EM for the continuous matrix-normal mixture on levels cast to reals."""
    n, j, t = ds.data.shape
    d = j * t
    v = mom._vectorized_data(ds)
    s_base = np.einsum("na,nb->nab", v, v)

    def single(restart: int) -> mom.FitResult:
        model = mom.init_params(ds, cfg.k, cfg.init,
                                mom._rng(cfg.seed, mom._TAG_INIT, restart))
        model = MixtureModel(weights=model.weights, components=model.components,
                             thresholds=None)
        trace = []
        q = None
        converged = False
        n_iter = 0
        for it in range(cfg.max_iter):
            tau, loglik = _exact_responsibilities(v, model)
            active = tau >= cfg.tau_skip
            q = mom.EStepQuantities(
                tau=tau,
                m=np.broadcast_to(v[:, None, :], (n, cfg.k, d)),
                S=np.broadcast_to(s_base[:, None], (n, cfg.k, d, d)),
                log_box=np.zeros((n, cfg.k)),
                active=active,
                loglik=loglik,
            )
            trace.append(loglik)
            n_iter = it + 1
            if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < cfg.tol:
                converged = True
                break
            if it == cfg.max_iter - 1:
                break
            model = mom.m_step(ds, q, model, cfg.min_cluster_mass)
        return mom.FitResult(
            model=model, tau=q.tau, labels=mom.classify(q.tau),
            loglik_trace=np.asarray(trace),
            bic=mom.bic(trace[-1], cfg.k, j, t, n),
            n_iter=n_iter, converged=converged, seed=cfg.seed)

    n_restarts = cfg.n_restarts if cfg.init == "random" else 1
    best = None
    for restart in range(n_restarts):
        res = single(restart)
        if best is None or res.loglik_trace[-1] > best.loglik_trace[-1]:
            best = res
    return best


@dataclass(frozen=True)
class GmmFitResult:
    weights: np.ndarray        # (K,)
    means: np.ndarray          # (K, D)
    covariances: np.ndarray    # (K, D, D)
    tau: np.ndarray
    labels: np.ndarray
    loglik_trace: np.ndarray
    n_iter: int
    converged: bool
    seed: int


def gmm_fit(x: np.ndarray, k: int, cfg: mom.FitConfig) -> GmmFitResult:
    """Textbook full-covariance EM on vectorized data; k-means++ means, identity covs."""
    from sklearn.cluster import KMeans

    x = np.asarray(x, dtype=float)
    n, d = x.shape
    rng = mom._rng(cfg.seed, mom._TAG_INIT, 0)
    km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=10,
                algorithm="lloyd", random_state=int(rng.integers(2**31 - 1)))
    km.fit(x)
    means = km.cluster_centers_.copy()
    covs = np.stack([np.eye(d)] * k)
    weights = np.full(k, 1.0 / k)

    trace = []
    tau = None
    converged = False
    n_iter = 0
    for it in range(cfg.max_iter):
        log_joint = np.empty((n, k))
        for c in range(k):
            log_joint[:, c] = np.log(weights[c]) + _mvn_log_density_batch(
                x, means[c], covs[c])
        lse = mom._logsumexp_rows(log_joint)
        tau = np.exp(log_joint - lse[:, None])
        trace.append(float(lse.sum()))
        n_iter = it + 1
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < cfg.tol:
            converged = True
            break
        if it == cfg.max_iter - 1:
            break
        mass = tau.sum(axis=0)
        if np.any(mass < cfg.min_cluster_mass):
            raise mom.DegenerateClusterError(
                [c for c in range(k) if mass[c] < cfg.min_cluster_mass])
        weights = mass / n
        means = (tau.T @ x) / mass[:, None]
        for c in range(k):
            diff = x - means[c]
            scatter = (tau[:, c, None] * diff).T @ diff / mass[c]
            covs[c] = matvar.ensure_spd(0.5 * (scatter + scatter.T))

    return GmmFitResult(weights=weights, means=means, covariances=covs,
                        tau=tau, labels=mom.classify(tau),
                        loglik_trace=np.asarray(trace),
                        n_iter=n_iter, converged=converged, seed=cfg.seed)
