"""Ordinal dataset container, threshold construction and latent-space boxes.

An observed ordinal matrix Y determines an axis-aligned box in latent space:
entry (j, t) at level c constrains the latent z_{jt} to (gamma_{j,c-1}, gamma_{j,c}].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OrdinalDataset:
    """N x J x T integer array of ordinal responses with per-variable level counts."""

    data: np.ndarray        # (N, J, T), integer levels in 1..levels[j]
    levels: np.ndarray      # (J,) level counts C_j >= 2
    unit_ids: tuple | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        levels = np.asarray(self.levels, dtype=int)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "levels", levels)
        if data.ndim != 3:
            raise ValueError("data must be N x J x T")
        if levels.shape != (data.shape[1],):
            raise ValueError("levels must have one entry per variable")
        if self.unit_ids is not None and len(self.unit_ids) != data.shape[0]:
            raise ValueError("unit_ids length must match N")

    @property
    def n_units(self) -> int:
        return self.data.shape[0]

    @property
    def n_vars(self) -> int:
        return self.data.shape[1]

    @property
    def n_times(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Thresholds:
    """Per-variable cut points; cuts[j] has C_j + 1 entries from -inf to +inf."""

    cuts: tuple[np.ndarray, ...]

    def __post_init__(self):
        cuts = tuple(np.asarray(c, dtype=float) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        for j, c in enumerate(cuts):
            if c.ndim != 1 or c.size < 3:
                raise ValueError(f"cuts[{j}] must have at least 3 entries")
            if not (c[0] == -np.inf and c[-1] == np.inf):
                raise ValueError(f"cuts[{j}] must start at -inf and end at +inf")
            if np.any(np.diff(c) < 0):
                raise ValueError(f"cuts[{j}] must be non-decreasing")

    @property
    def levels(self) -> np.ndarray:
        return np.array([c.size - 1 for c in self.cuts], dtype=int)


@dataclass(frozen=True)
class Box:
    """Axis-aligned region of R^{JT} in vec ordering; lower < upper element-wise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower/upper must be 1-d and of equal length")
        if np.any(lower >= upper):
            raise ValueError("box must satisfy lower < upper element-wise")

    def contains(self, v: np.ndarray) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v > self.lower) and np.all(v <= self.upper))


def default_thresholds(levels) -> Thresholds:
    """Equidistant thresholds (-inf, 1.5, 2.5, ..., C_j - 0.5, +inf), fixed over time."""
    levels = np.asarray(levels, dtype=int)
    cuts = []
    for c_j in levels:
        if c_j < 2:
            raise ValueError("every variable needs at least 2 levels")
        cuts.append(np.concatenate(([-np.inf], np.arange(1, c_j) + 0.5, [np.inf])))
    return Thresholds(tuple(cuts))


def discretize(z: np.ndarray, g: Thresholds) -> np.ndarray:
    """Map a latent J x T matrix to ordinal levels; z in (gamma_{c-1}, gamma_c] gives level c."""
    z = np.asarray(z, dtype=float)
    j = len(g.cuts)
    if z.ndim != 2 or z.shape[0] != j:
        raise ValueError(f"z must have {j} rows")
    out = np.empty(z.shape, dtype=int)
    for jj, cuts in enumerate(g.cuts):
        # searchsorted on the finite cuts with side='left' implements (a, b] cells
        out[jj] = np.searchsorted(cuts[1:-1], z[jj], side="left") + 1
    return out


def pattern_box(y: np.ndarray, g: Thresholds) -> Box:
    """Latent-space box generating the observed ordinal matrix y, in vec ordering."""
    y = np.asarray(y, dtype=int)
    j = len(g.cuts)
    if y.ndim != 2 or y.shape[0] != j:
        raise ValueError(f"y must have {j} rows")
    t = y.shape[1]
    lower = np.empty(j * t)
    upper = np.empty(j * t)
    for jj, cuts in enumerate(g.cuts):
        c_j = cuts.size - 1
        row = y[jj]
        if np.any(row < 1) or np.any(row > c_j):
            raise ValueError(f"variable {jj}: levels out of range 1..{c_j}")
        for tt in range(t):
            idx = tt * j + jj
            lower[idx] = cuts[row[tt] - 1]
            upper[idx] = cuts[row[tt]]
    return Box(lower, upper)


def dataset_boxes(ds: OrdinalDataset, g: Thresholds) -> tuple[np.ndarray, np.ndarray]:
    """Stacked (N, JT) lower/upper bounds for every unit's box."""
    n, j, t = ds.data.shape
    lower = np.empty((n, j * t))
    upper = np.empty((n, j * t))
    finite = [c.copy() for c in g.cuts]
    for jj in range(j):
        cuts = finite[jj]
        lev = ds.data[:, jj, :]  # (N, T)
        lo = cuts[lev - 1]
        up = cuts[lev]
        for tt in range(t):
            lower[:, tt * j + jj] = lo[:, tt]
            upper[:, tt * j + jj] = up[:, tt]
    return lower, upper


def validate(ds: OrdinalDataset) -> list[str]:
    """Report dataset violations (out-of-range or non-integer levels, C_j < 2)."""
    violations = []
    if not np.issubdtype(ds.data.dtype, np.integer):
        frac = ds.data != np.floor(ds.data)
        for i, j, t in zip(*np.nonzero(frac)):
            violations.append(f"non-integer entry at (unit={i}, var={j}, time={t})")
    for j, c_j in enumerate(ds.levels):
        if c_j < 2:
            violations.append(f"variable {j}: level count {c_j} < 2")
    data = ds.data
    for j, c_j in enumerate(ds.levels):
        bad = (data[:, j, :] < 1) | (data[:, j, :] > c_j)
        for i, t in zip(*np.nonzero(bad)):
            violations.append(
                f"entry {data[i, j, t]} out of range 1..{c_j} at (unit={i}, var={j}, time={t})"
            )
    return violations
