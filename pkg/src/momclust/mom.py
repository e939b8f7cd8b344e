"""Monte-Carlo EM for the mixture-of-ordinal-matrices model.

Each observed ordinal matrix pins its latent continuous matrix to a box.
The E-step estimates responsibilities from box probabilities (sequential
separation-of-variables estimator) and latent first/second moments from a
Gibbs sampler over the box-truncated MVN.  The M-step applies the weighted
closed-form updates for the mixing weights, mean matrices and the two
separable covariance factors.

Randomness policy: a master seed is expanded into counter-derived substreams
per (restart, unit, cluster).  Box-probability streams exclude the iteration
index (common random numbers, so the observed log-likelihood is a
deterministic function of the parameters and the stopping rule is
meaningful); Gibbs streams include it (fresh MC noise each iteration).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import matvar, ordinal, trunc
from .matvar import ClusterParams, MixtureModel

# substream tags; never reuse across purposes
_TAG_INIT = 7
_TAG_PROB = 11
_TAG_GIBBS = 13
_TAG_RESEED = 17

# cap on uniform-buffer size (doubles) when chunking box-probability batches
_CHUNK_BUDGET = 32_000_000


class DegenerateClusterError(RuntimeError):
    """A cluster's responsibility mass fell below the configured minimum."""

    def __init__(self, clusters, message=None):
        self.clusters = tuple(clusters)
        super().__init__(message or f"degenerate clusters: {self.clusters}")


class UnderflowError(RuntimeError):
    """Every component's box probability underflowed for some unit."""

    def __init__(self, unit: int):
        self.unit = unit
        super().__init__(f"all components underflowed for unit {unit}")


@dataclass(frozen=True)
class FitConfig:
    """EM configuration; defaults match the benchmark_scenario studies."""

    k: int
    tol: float = 1e-3
    max_iter: int = 200
    init: str = "kmeanspp"          # "kmeanspp" | "random"
    n_restarts: int = 5             # used when init == "random"
    gibbs: trunc.GibbsConfig = field(default_factory=trunc.GibbsConfig)
    prob_points: int = 4096
    seed: int = 0
    min_cluster_mass: float = 2.0
    tau_skip: float = 1e-6
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tol <= 0 or self.max_iter < 1 or self.prob_points < 1:
            raise ValueError("invalid fit configuration")
        if self.init not in ("kmeanspp", "random"):
            raise ValueError(f"unknown init method {self.init!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class EStepQuantities:
    """Per-(unit, cluster) E-step output; moments only where active is set."""

    tau: np.ndarray        # (N, K)
    m: np.ndarray          # (N, K, JT)
    S: np.ndarray          # (N, K, JT, JT)
    log_box: np.ndarray    # (N, K) log box probabilities
    active: np.ndarray     # (N, K) bool, pairs with Gibbs moments
    loglik: float          # observed log-likelihood at the current parameters


@dataclass(frozen=True)
class FitResult:
    model: MixtureModel
    tau: np.ndarray
    labels: np.ndarray           # 1-based cluster indices
    loglik_trace: np.ndarray
    bic: float
    n_iter: int
    converged: bool
    seed: int


@dataclass(frozen=True)
class SelectionRow:
    k: int
    bic: float
    loglik: float
    n_params: int
    converged: bool
    failed: bool = False


@dataclass(frozen=True)
class SelectionTable:
    rows: tuple[SelectionRow, ...]

    @property
    def best_k(self) -> int:
        finite = [r for r in self.rows if np.isfinite(r.bic)]
        if not finite:
            raise RuntimeError("no candidate K produced a finite BIC")
        return min(finite, key=lambda r: r.bic).k


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(list(key))


def _vectorized_data(ds: ordinal.OrdinalDataset) -> np.ndarray:
    """(N, JT) float view of the integer data in vec ordering."""
    return ds.data.transpose(0, 2, 1).reshape(ds.n_units, -1).astype(float)


def init_params(ds: ordinal.OrdinalDataset, k: int, method: str,
                rng: np.random.Generator,
                thresholds: ordinal.Thresholds | None = None) -> MixtureModel:
    """Initial mixture: identity covariances, uniform weights, data-driven means."""
    n, j, t = ds.data.shape
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    if thresholds is None:
        thresholds = ordinal.default_thresholds(ds.levels)
    x = _vectorized_data(ds)
    if method == "kmeanspp":
        from sklearn.cluster import KMeans

        km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=10,
                    algorithm="lloyd",
                    random_state=int(rng.integers(2**31 - 1)))
        km.fit(x)
        centers = km.cluster_centers_
    elif method == "random":
        idx = rng.choice(n, size=k, replace=False)
        centers = x[np.sort(idx)]
    else:
        raise ValueError(f"unknown init method {method!r}")
    comps = tuple(
        ClusterParams(mean=matvar.unvec(c, j, t),
                      time_cov=np.eye(t), var_cov=np.eye(j))
        for c in centers
    )
    return MixtureModel(weights=np.full(k, 1.0 / k), components=comps,
                        thresholds=thresholds)


def _cluster_log_box(mean, cov, lower, upper, n_points, seed, restart, k_idx):
    """Log box probabilities for one cluster over all units, CRN streams."""
    n, d = lower.shape
    out = np.empty(n)
    chunk = max(1, _CHUNK_BUDGET // (n_points * max(d - 1, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        u = np.empty((stop - start, n_points, max(d - 1, 0)))
        for i in range(start, stop):
            u[i - start] = _rng(seed, _TAG_PROB, restart, i, k_idx).random(
                (n_points, max(d - 1, 0)))
        logp, _ = trunc.box_probabilities_batch(mean, cov, lower[start:stop],
                                                upper[start:stop], u)
        out[start:stop] = logp
    return out


def _cluster_moments(mean, cov, lower, upper, idx, gibbs_cfg, seed, restart,
                     iteration, k_idx):
    """Gibbs moments for the active units of one cluster."""
    d = mean.size
    n_a = idx.size
    u = np.empty((n_a, gibbs_cfg.n_sweeps, d))
    for pos, i in enumerate(idx):
        u[pos] = _rng(seed, _TAG_GIBBS, restart, iteration, int(i), k_idx).random(
            (gibbs_cfg.n_sweeps, d))
    samples = trunc.gibbs_moments_batch(mean, cov, lower[idx], upper[idx],
                                        gibbs_cfg, u)
    m = samples.mean(axis=1)
    s = np.einsum("nsa,nsb->nab", samples, samples) / gibbs_cfg.n_samples
    s = 0.5 * (s + s.transpose(0, 2, 1))
    return m, s


def e_step(ds: ordinal.OrdinalDataset, model: MixtureModel, cfg: FitConfig,
           restart: int = 0, iteration: int = 0,
           boxes: tuple[np.ndarray, np.ndarray] | None = None,
           with_moments: bool = True) -> EStepQuantities:
    """Responsibilities, box probabilities and truncated moments for one sweep."""
    n, j, t = ds.data.shape
    d = j * t
    kk = model.k
    thresholds = model.thresholds
    if thresholds is None:
        thresholds = ordinal.default_thresholds(ds.levels)
    if boxes is None:
        boxes = ordinal.dataset_boxes(ds, thresholds)
    lower, upper = boxes

    means = [matvar.vec(c.mean) for c in model.components]
    covs = [matvar.kron_cov(c.time_cov, c.var_cov) for c in model.components]

    log_box = np.empty((n, kk))

    def prob_task(k_idx):
        log_box[:, k_idx] = _cluster_log_box(
            means[k_idx], covs[k_idx], lower, upper,
            cfg.prob_points, cfg.seed, restart, k_idx)

    _run_tasks(prob_task, kk, cfg.threads)

    with np.errstate(divide="ignore"):
        log_joint = log_box + np.log(model.weights)[None, :]
    lse = _logsumexp_rows(log_joint)
    bad = np.nonzero(~np.isfinite(lse))[0]
    if bad.size:
        raise UnderflowError(int(bad[0]))
    tau = np.exp(log_joint - lse[:, None])
    loglik = float(lse.sum())

    m = np.zeros((n, kk, d))
    s = np.zeros((n, kk, d, d))
    active = tau >= cfg.tau_skip
    if with_moments:
        def gibbs_task(k_idx):
            idx = np.nonzero(active[:, k_idx])[0]
            if idx.size == 0:
                return
            mk, sk = _cluster_moments(means[k_idx], covs[k_idx], lower, upper,
                                      idx, cfg.gibbs, cfg.seed, restart,
                                      iteration, k_idx)
            m[idx, k_idx] = mk
            s[idx, k_idx] = sk

        _run_tasks(gibbs_task, kk, cfg.threads)

    return EStepQuantities(tau=tau, m=m, S=s, log_box=log_box,
                           active=active, loglik=loglik)


def _run_tasks(task, count, threads):
    if threads <= 1 or count <= 1:
        for k_idx in range(count):
            task(k_idx)
    else:
        with ThreadPoolExecutor(max_workers=min(threads, count)) as pool:
            list(pool.map(task, range(count)))


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = np.max(a, axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    out = safe + np.log(np.sum(np.exp(a - safe[:, None]), axis=1))
    return np.where(np.isfinite(m), out, -np.inf)


def compute_D(s: np.ndarray, phi_inv: np.ndarray, j: int, t: int) -> np.ndarray:
    """E[Z Phi^-1 Z^T] (J x J) from the vectorized second moment S."""
    if s.shape != (j * t, j * t) or phi_inv.shape != (t, t):
        raise ValueError("dimension mismatch in compute_D")
    s4 = s.reshape(t, j, t, j)
    return np.einsum("ghdt,gd->ht", s4, phi_inv)


def compute_C(s: np.ndarray, sigma_inv: np.ndarray, j: int, t: int) -> np.ndarray:
    """E[Z^T Sigma^-1 Z] (T x T) from the vectorized second moment S."""
    if s.shape != (j * t, j * t) or sigma_inv.shape != (j, j):
        raise ValueError("dimension mismatch in compute_C")
    s4 = s.reshape(t, j, t, j)
    return np.einsum("hgtd,gd->ht", s4, sigma_inv)


def m_step(ds: ordinal.OrdinalDataset, q: EStepQuantities, prev: MixtureModel,
           min_cluster_mass: float = 2.0) -> MixtureModel:
    """Closed-form weighted updates, in the order D -> Sigma -> C -> Phi."""
    n, j, t = ds.data.shape
    kk = prev.k
    mass = q.tau.sum(axis=0)
    degenerate = [k for k in range(kk) if mass[k] < min_cluster_mass]
    if degenerate:
        raise DegenerateClusterError(degenerate)
    weights = mass / n

    comps = []
    for k in range(kk):
        idx = np.nonzero(q.active[:, k])[0]
        w = q.tau[idx, k]
        sw = float(w.sum())
        m_bar = (w @ q.m[idx, k]) / sw
        mean_mat = matvar.unvec(m_bar, j, t)
        sum_m = matvar.unvec(w @ q.m[idx, k], j, t)          # = sw * mean_mat
        s_sum = np.einsum("n,nab->ab", w, q.S[idx, k])

        phi_inv = _spd_inv(prev.components[k].time_cov)
        d_sum = compute_D(s_sum, phi_inv, j, t)
        cross = mean_mat @ phi_inv @ sum_m.T
        sigma = (d_sum - cross - cross.T + sw * mean_mat @ phi_inv @ mean_mat.T) / (t * sw)
        sigma = matvar.ensure_spd(0.5 * (sigma + sigma.T))

        sigma_inv = _spd_inv(sigma)
        c_sum = compute_C(s_sum, sigma_inv, j, t)
        cross = mean_mat.T @ sigma_inv @ sum_m
        phi = (c_sum - cross - cross.T + sw * mean_mat.T @ sigma_inv @ mean_mat) / (j * sw)
        phi = matvar.ensure_spd(0.5 * (phi + phi.T))

        comps.append(ClusterParams(mean=mean_mat, time_cov=phi, var_cov=sigma))

    return MixtureModel(weights=weights, components=tuple(comps),
                        thresholds=prev.thresholds)


def _spd_inv(a: np.ndarray) -> np.ndarray:
    from scipy.linalg import cho_solve

    l = matvar.safe_cholesky(a)
    return cho_solve((l, True), np.eye(a.shape[0]))


def observed_loglik(ds: ordinal.OrdinalDataset, model: MixtureModel,
                    cfg: FitConfig, restart: int = 0) -> float:
    """Sum over units of log sum_k pi_k P(box_i | component k), CRN streams."""
    q = e_step(ds, model, cfg, restart=restart, with_moments=False)
    return q.loglik


def bic(loglik: float, k: int, j: int, t: int, n: int) -> float:
    """-2 log L + nu_k log N with nu_k the mixture's free-parameter count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return -2.0 * loglik + matvar.param_count(k, j, t) * np.log(n)


def classify(tau: np.ndarray) -> np.ndarray:
    """MAP labels (1-based); ties break toward the lowest cluster index."""
    tau = np.asarray(tau)
    if tau.ndim != 2:
        raise ValueError("tau must be N x K")
    return np.argmax(tau, axis=1) + 1


def _single_fit(ds, cfg: FitConfig, restart: int, boxes,
                thresholds) -> FitResult:
    n, j, t = ds.data.shape
    model = init_params(ds, cfg.k, cfg.init,
                        _rng(cfg.seed, _TAG_INIT, restart), thresholds)
    trace = []
    reseeded: set[int] = set()
    q = None
    n_iter = 0
    converged = False
    for it in range(cfg.max_iter):
        q = e_step(ds, model, cfg, restart=restart, iteration=it, boxes=boxes)
        trace.append(q.loglik)
        n_iter = it + 1
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < cfg.tol:
            converged = True
            break
        if it == cfg.max_iter - 1:
            break
        try:
            model = m_step(ds, q, model, cfg.min_cluster_mass)
        except DegenerateClusterError as exc:
            fresh = [k for k in exc.clusters if k not in reseeded]
            if len(fresh) < len(exc.clusters):
                raise
            model = _reseed_clusters(ds, model, exc.clusters, cfg, restart, it)
            reseeded.update(exc.clusters)
    labels = classify(q.tau)
    fit_bic = bic(trace[-1], cfg.k, j, t, n)
    return FitResult(model=model, tau=q.tau, labels=labels,
                     loglik_trace=np.asarray(trace), bic=fit_bic,
                     n_iter=n_iter, converged=converged, seed=cfg.seed)


def _reseed_clusters(ds, model, clusters, cfg, restart, iteration):
    """Degeneracy guard: restart dead clusters at observed matrices, identity covs."""
    n, j, t = ds.data.shape
    rng = _rng(cfg.seed, _TAG_RESEED, restart, iteration)
    comps = list(model.components)
    weights = model.weights.copy()
    for k in clusters:
        i = int(rng.integers(n))
        comps[k] = ClusterParams(mean=ds.data[i].astype(float),
                                 time_cov=np.eye(t), var_cov=np.eye(j))
        weights[k] = 1.0 / model.k
    weights = weights / weights.sum()
    return MixtureModel(weights=weights, components=tuple(comps),
                        thresholds=model.thresholds)


def fit(ds: ordinal.OrdinalDataset, cfg: FitConfig) -> FitResult:
    """Run the MCEM; for random init, keep the restart with the highest loglik."""
    if ds.n_units == 0:
        raise ValueError("empty dataset")
    violations = ordinal.validate(ds)
    if violations:
        raise ValueError("invalid dataset: " + "; ".join(violations[:5]))
    thresholds = ordinal.default_thresholds(ds.levels)
    boxes = ordinal.dataset_boxes(ds, thresholds)
    n_restarts = cfg.n_restarts if cfg.init == "random" else 1
    best = None
    for restart in range(n_restarts):
        result = _single_fit(ds, cfg, restart, boxes, thresholds)
        if best is None or result.loglik_trace[-1] > best.loglik_trace[-1]:
            best = result
    return best


def select_k(ds: ordinal.OrdinalDataset, k_min: int, k_max: int,
             cfg: FitConfig) -> tuple[SelectionTable, dict[int, FitResult]]:
    """Fit every K in [k_min, k_max] with the shared seed; lowest BIC wins.

    A K whose fit degenerates is recorded as a failed row (bic = +inf)
    instead of aborting the sweep.
    """
    n, j, t = ds.data.shape
    if not (1 <= k_min <= k_max <= n):
        raise ValueError("need 1 <= k_min <= k_max <= N")
    rows = []
    fits: dict[int, FitResult] = {}
    for k in range(k_min, k_max + 1):
        sub_cfg = replace(cfg, k=k)
        try:
            res = fit(ds, sub_cfg)
        except (DegenerateClusterError, UnderflowError):
            rows.append(SelectionRow(k=k, bic=np.inf, loglik=np.nan,
                                     n_params=matvar.param_count(k, j, t),
                                     converged=False, failed=True))
            continue
        fits[k] = res
        rows.append(SelectionRow(k=k, bic=res.bic,
                                 loglik=float(res.loglik_trace[-1]),
                                 n_params=matvar.param_count(k, j, t),
                                 converged=res.converged))
    return SelectionTable(tuple(rows)), fits
