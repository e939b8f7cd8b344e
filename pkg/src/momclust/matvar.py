"""Matrix-variate normal core: density, sampling, vectorization, Kronecker covariance.

A J x T matrix Z follows a matrix-variate normal with mean matrix M (J x T),
variable covariance Sigma (J x J) and time covariance Phi (T x T) iff
vec(Z) ~ MVN(vec(M), kron(Phi, Sigma)) with column-stacking vec.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)

_SYM_TOL = 1e-10


class NotSPDError(ValueError):
    """Raised when a covariance matrix is not symmetric positive definite."""


def _check_spd(a: np.ndarray, name: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    if np.max(np.abs(a - a.T)) > _SYM_TOL * max(1.0, np.max(np.abs(a))):
        raise NotSPDError(f"{name} is not symmetric within tolerance")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"{name} is not positive definite") from exc


def safe_cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding diagonal jitter on failure.

    Jitter starts at 1e-10 * mean(diag) and is multiplied by 10 up to
    1e-6 * mean(diag) before giving up.
    """
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(a)))
    if scale <= 0 or not np.isfinite(scale):
        scale = 1.0
    eps = 1e-10
    eye = np.eye(a.shape[0])
    while eps <= 1e-6:
        try:
            return np.linalg.cholesky(a + eps * scale * eye)
        except np.linalg.LinAlgError:
            eps *= 10.0
    raise NotSPDError("Cholesky failed even after jitter up to 1e-6 * mean(diag)")


def ensure_spd(a: np.ndarray) -> np.ndarray:
    """Return `a`, or `a` plus the smallest jitter (1e-10..1e-6 * mean(diag)) making it SPD."""
    try:
        np.linalg.cholesky(a)
        return a
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(a)))
    if scale <= 0 or not np.isfinite(scale):
        scale = 1.0
    eps = 1e-10
    eye = np.eye(a.shape[0])
    while eps <= 1e-6:
        b = a + eps * scale * eye
        try:
            np.linalg.cholesky(b)
            return b
        except np.linalg.LinAlgError:
            eps *= 10.0
    raise NotSPDError("matrix not repairable with jitter up to 1e-6 * mean(diag)")


@dataclass(frozen=True)
class ClusterParams:
    """Parameters of one matrix-normal component: mean M, time cov Phi, variable cov Sigma."""

    mean: np.ndarray      # (J, T)
    time_cov: np.ndarray  # (T, T)
    var_cov: np.ndarray   # (J, J)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        phi = np.asarray(self.time_cov, dtype=float)
        sigma = np.asarray(self.var_cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "time_cov", phi)
        object.__setattr__(self, "var_cov", sigma)
        if mean.ndim != 2:
            raise ValueError("mean must be a J x T matrix")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite entries")
        _check_spd(phi, "time_cov")
        _check_spd(sigma, "var_cov")
        j, t = mean.shape
        if phi.shape != (t, t) or sigma.shape != (j, j):
            raise ValueError(
                f"inconsistent shapes: mean {mean.shape}, time_cov {phi.shape}, var_cov {sigma.shape}"
            )

    @property
    def n_vars(self) -> int:
        return self.mean.shape[0]

    @property
    def n_times(self) -> int:
        return self.mean.shape[1]


@dataclass(frozen=True)
class MixtureModel:
    """Finite mixture of matrix-normal components over a latent J x T matrix."""

    weights: np.ndarray                 # (K,)
    components: tuple[ClusterParams, ...]
    thresholds: "object" = None         # ordinal.Thresholds for latent-discretized models

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 1:
            raise ValueError("need at least one component")
        if w.shape != (len(self.components),):
            raise ValueError("weights length must match number of components")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")

    @property
    def k(self) -> int:
        return len(self.components)


def vec(z: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: entry (j, t) maps to index t*J + j (0-based)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ValueError("vec expects a matrix")
    return z.reshape(-1, order="F")


def unvec(v: np.ndarray, j: int, t: int) -> np.ndarray:
    """Inverse of vec: reshape a length-JT vector back to a J x T matrix."""
    v = np.asarray(v, dtype=float)
    if v.size != j * t:
        raise ValueError(f"length {v.size} != {j}*{t}")
    return v.reshape((j, t), order="F")


def kron_cov(phi: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Full JT x JT covariance kron(Phi, Sigma), consistent with vec ordering."""
    return np.kron(np.asarray(phi, dtype=float), np.asarray(sigma, dtype=float))


def log_density(z: np.ndarray, p: ClusterParams) -> float:
    """Log of the matrix-normal pdf at Z, via Cholesky factors (no explicit inverses)."""
    z = np.asarray(z, dtype=float)
    if z.shape != p.mean.shape:
        raise ValueError(f"Z shape {z.shape} does not match mean shape {p.mean.shape}")
    j, t = p.mean.shape
    l_sigma = safe_cholesky(p.var_cov)
    l_phi = safe_cholesky(p.time_cov)
    return _log_density_chol(z, p.mean, l_phi, l_sigma, j, t)


def _log_density_chol(z, mean, l_phi, l_sigma, j, t) -> float:
    from scipy.linalg import solve_triangular

    a = z - mean
    # tr[Sigma^-1 A Phi^-1 A^T] = || L_phi^-1 A^T L_sigma^-T ||_F^2
    x1 = solve_triangular(l_sigma, a, lower=True)
    x2 = solve_triangular(l_phi, x1.T, lower=True)
    quad = float(np.sum(x2 * x2))
    logdet_phi = 2.0 * float(np.sum(np.log(np.diag(l_phi))))
    logdet_sigma = 2.0 * float(np.sum(np.log(np.diag(l_sigma))))
    return -0.5 * (j * t * LOG_2PI + j * logdet_phi + t * logdet_sigma + quad)


def sample(p: ClusterParams, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the matrix-normal as Z = M + L_sigma E L_phi^T with E iid standard normal.

    Returns a (J, T) matrix, or a (size, J, T) array when size is given.
    """
    j, t = p.mean.shape
    l_sigma = safe_cholesky(p.var_cov)
    l_phi = safe_cholesky(p.time_cov)
    n = 1 if size is None else size
    e = rng.standard_normal((n, j, t))
    z = p.mean + np.einsum("ab,nbc,dc->nad", l_sigma, e, l_phi)
    return z[0] if size is None else z


def normalize_scale(p: ClusterParams) -> tuple[ClusterParams, float]:
    """Rescale (Phi, Sigma) so that trace(Phi) = T; the density is invariant.

    Resolves the (c*Phi, Sigma/c) non-identifiability of the separable covariance.
    Returns the rescaled parameters and the applied scale c = trace(Phi)/T.
    """
    t = p.n_times
    scale = float(np.trace(p.time_cov)) / t
    q = ClusterParams(
        mean=p.mean,
        time_cov=p.time_cov / scale,
        var_cov=p.var_cov * scale,
    )
    return q, scale


def param_count(k: int, j: int, t: int) -> int:
    """Number of free parameters of a K-component mixture: k[1 + JT + J(J+1)/2 + T(T+1)/2] - 1."""
    if k < 1 or j < 1 or t < 1:
        raise ValueError("k, j, t must all be >= 1")
    return k * (1 + j * t + j * (j + 1) // 2 + t * (t + 1) // 2) - 1
