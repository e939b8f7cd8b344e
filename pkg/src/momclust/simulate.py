"""Synthetic longitudinal ordinal data from a known mixture, with optional noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matvar, mom, ordinal
from .evalmetrics import ari
from .matvar import ClusterParams, MixtureModel


@dataclass(frozen=True)
class Scenario:
    """Ground-truth mixture plus noise contamination level."""

    n: int
    k: int
    j: int
    t: int
    levels: np.ndarray          # (J,)
    weights: np.ndarray         # (K,)
    means: np.ndarray           # (K, J, T)
    time_covs: np.ndarray       # (K, T, T)
    var_covs: np.ndarray        # (K, J, J)
    noise_fraction: float
    seed: int

    def __post_init__(self):
        for name in ("levels", "weights", "means", "time_covs", "var_covs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float)
                               if name != "levels" else np.asarray(self.levels, dtype=int))
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ValueError("noise_fraction must lie in [0, 1)")

    def true_model(self) -> MixtureModel:
        comps = tuple(
            ClusterParams(mean=self.means[k], time_cov=self.time_covs[k],
                          var_cov=self.var_covs[k])
            for k in range(self.k)
        )
        return MixtureModel(weights=self.weights, components=comps,
                            thresholds=ordinal.default_thresholds(self.levels))


@dataclass(frozen=True)
class SimulatedDataset:
    dataset: ordinal.OrdinalDataset
    true_labels: np.ndarray     # (N,), 1-based
    noise_mask: np.ndarray      # (N,) bool
    latent: np.ndarray | None = None


def benchmark_scenario(n: int, noise_fraction: float, seed: int) -> Scenario:
    """Three-cluster setup: J=T=5, 5 levels, constant means 1.75/2.5/3.25, identity covs."""
    if n < 3:
        raise ValueError("n must be >= 3")
    j = t = 5
    k = 3
    ones = np.ones((j, t))
    return Scenario(
        n=n, k=k, j=j, t=t,
        levels=np.full(j, 5, dtype=int),
        weights=np.array([0.3, 0.4, 0.3]),
        means=np.stack([1.75 * ones, 2.5 * ones, 3.25 * ones]),
        time_covs=np.stack([np.eye(t)] * k),
        var_covs=np.stack([np.eye(j)] * k),
        noise_fraction=noise_fraction,
        seed=seed,
    )


def generate(s: Scenario, rng: np.random.Generator | None = None) -> SimulatedDataset:
    """Draw labels ~ pi, latent matrices from the matrix normal, discretize, add noise.

    Noisy units keep their drawn cluster label (allocation proportional to
    cluster sizes) but every entry is redrawn iid uniform on the levels.
    """
    if rng is None:
        rng = np.random.default_rng([s.seed, 31])
    n, j, t = s.n, s.j, s.t
    labels = rng.choice(s.k, size=n, p=s.weights) + 1
    thresholds = ordinal.default_thresholds(s.levels)
    latent = np.empty((n, j, t))
    for k in range(s.k):
        idx = np.nonzero(labels == k + 1)[0]
        if idx.size:
            p = ClusterParams(mean=s.means[k], time_cov=s.time_covs[k],
                              var_cov=s.var_covs[k])
            latent[idx] = matvar.sample(p, rng, size=idx.size)
    data = np.empty((n, j, t), dtype=int)
    for i in range(n):
        data[i] = ordinal.discretize(latent[i], thresholds)

    n_noise = int(round(s.noise_fraction * n))
    noise_mask = np.zeros(n, dtype=bool)
    if n_noise:
        noisy = rng.choice(n, size=n_noise, replace=False)
        noise_mask[noisy] = True
        for i in noisy:
            for jj in range(j):
                data[i, jj] = rng.integers(1, s.levels[jj] + 1, size=t)
    ds = ordinal.OrdinalDataset(data=data, levels=s.levels)
    return SimulatedDataset(dataset=ds, true_labels=labels,
                            noise_mask=noise_mask, latent=latent)


def oracle_ari(sd: SimulatedDataset, s: Scenario, cfg: mom.FitConfig) -> float:
    """ARI of the MAP classification under the true parameters vs the true labels."""
    if s.k < 2:
        return 0.0
    q = mom.e_step(sd.dataset, s.true_model(), cfg, with_moments=False)
    labels = mom.classify(q.tau)
    return ari(labels, sd.true_labels)
