"""File formats: long/wide CSV datasets, truth files, scenario and model JSON.

Long CSV is canonical: header ``unit,variable,time,level`` preceded by a
comment line ``# levels: v1=5,v2=5,...``.  Wide CSV has one row per unit with
columns ``v<j>_t<t>``.  Model files are versioned JSON whose floats round-trip
bit-exactly (shortest-repr decimal serialization).
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from . import matvar, ordinal
from .matvar import ClusterParams, MixtureModel

SCHEMA_VERSION = 1


class FormatError(ValueError):
    """Malformed or incomplete data file."""


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def _levels_comment(levels) -> str:
    return "# levels: " + ",".join(f"v{j + 1}={int(c)}" for j, c in enumerate(levels))


def _parse_levels_comment(line: str, n_vars: int) -> np.ndarray:
    body = line.split(":", 1)[1]
    declared = {}
    for item in body.split(","):
        name, _, value = item.strip().partition("=")
        if not name.startswith("v") or not value:
            raise FormatError(f"malformed levels declaration item {item.strip()!r}")
        declared[int(name[1:])] = int(value)
    levels = np.zeros(n_vars, dtype=int)
    for j in range(1, n_vars + 1):
        if j not in declared:
            raise FormatError(f"level count missing for variable v{j}")
        levels[j - 1] = declared[j]
    return levels


def write_dataset_long(path, ds: ordinal.OrdinalDataset) -> None:
    n, j, t = ds.data.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_levels_comment(ds.levels) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["unit", "variable", "time", "level"])
        for i in range(n):
            for jj in range(j):
                for tt in range(t):
                    writer.writerow([i + 1, f"v{jj + 1}", tt + 1,
                                     int(ds.data[i, jj, tt])])


def write_dataset_wide(path, ds: ordinal.OrdinalDataset) -> None:
    n, j, t = ds.data.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_levels_comment(ds.levels) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["unit"] + [f"v{jj + 1}_t{tt + 1}"
                                    for jj in range(j) for tt in range(t)])
        for i in range(n):
            row = [i + 1] + [int(ds.data[i, jj, tt])
                             for jj in range(j) for tt in range(t)]
            writer.writerow(row)


def read_dataset(path, levels_path=None) -> ordinal.OrdinalDataset:
    """Read a long or wide CSV dataset; the format is sniffed from the header."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    comment = None
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            if line.lstrip("# ").startswith("levels"):
                comment = line
        elif line.strip():
            lines.append(line)
    if not lines:
        raise FormatError("empty dataset file")
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = next(reader)
    rows = list(reader)
    if [h.strip() for h in header] == ["unit", "variable", "time", "level"]:
        ds = _parse_long(rows)
    elif header[0].strip() == "unit" and all("_t" in h for h in header[1:]):
        ds = _parse_wide(header, rows)
    else:
        raise FormatError(f"unrecognized dataset header: {header}")
    levels = None
    if levels_path is not None:
        with open(levels_path, "r", encoding="utf-8") as fh:
            levels = _parse_levels_comment("levels:" + fh.read().split(":", 1)[-1],
                                           ds.n_vars)
    elif comment is not None:
        levels = _parse_levels_comment(comment, ds.n_vars)
    if levels is None:
        raise FormatError("level count missing for variable v1 "
                          "(no '# levels:' header and no sidecar levels file)")
    return ordinal.OrdinalDataset(data=ds.data, levels=levels,
                                  unit_ids=ds.unit_ids)


def _parse_long(rows) -> ordinal.OrdinalDataset:
    units, variables, times = [], [], []
    entries = {}
    for row in rows:
        if len(row) != 4:
            raise FormatError(f"long CSV row must have 4 fields, got {row}")
        unit, var, tt, level = row[0].strip(), row[1].strip(), int(row[2]), int(row[3])
        if unit not in units:
            units.append(unit)
        if var not in variables:
            variables.append(var)
        if tt not in times:
            times.append(tt)
        key = (unit, var, tt)
        if key in entries:
            raise FormatError(f"duplicate cell {key}")
        entries[key] = level
    variables.sort(key=lambda v: int(v[1:]) if v[1:].isdigit() else v)
    times.sort()
    n, j, t = len(units), len(variables), len(times)
    if len(entries) != n * j * t:
        raise FormatError(f"incomplete grid: expected {n * j * t} cells, got {len(entries)}")
    data = np.empty((n, j, t), dtype=int)
    for i, unit in enumerate(units):
        for jj, var in enumerate(variables):
            for kk, tt in enumerate(times):
                key = (unit, var, tt)
                if key not in entries:
                    raise FormatError(f"missing cell {key}")
                data[i, jj, kk] = entries[key]
    return ordinal.OrdinalDataset(data=data, levels=np.full(j, 2),
                                  unit_ids=tuple(units))


def _parse_wide(header, rows) -> ordinal.OrdinalDataset:
    coords = []
    for h in header[1:]:
        name = h.strip()
        var_part, _, t_part = name.partition("_t")
        if not var_part.startswith("v"):
            raise FormatError(f"bad wide column name {name!r}")
        coords.append((int(var_part[1:]), int(t_part)))
    j = max(c[0] for c in coords)
    t = max(c[1] for c in coords)
    if sorted(coords) != [(jj, tt) for jj in range(1, j + 1)
                          for tt in range(1, t + 1)]:
        raise FormatError("wide CSV columns do not form a complete v<j>_t<t> grid")
    data = np.empty((len(rows), j, t), dtype=int)
    units = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise FormatError(f"wide CSV row {i + 1} has {len(row)} fields")
        units.append(row[0].strip())
        for (jj, tt), value in zip(coords, row[1:]):
            data[i, jj - 1, tt - 1] = int(value)
    return ordinal.OrdinalDataset(data=data, levels=np.full(j, 2),
                                  unit_ids=tuple(units))


# ---------------------------------------------------------------------------
# truth / labels / tau
# ---------------------------------------------------------------------------

def write_truth(path, labels, noise_mask=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "label", "noisy"])
        for i, lab in enumerate(labels):
            noisy = int(noise_mask[i]) if noise_mask is not None else 0
            writer.writerow([i + 1, int(lab), noisy])


def read_truth(path):
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        labels, noisy = [], []
        for row in reader:
            if not row:
                continue
            labels.append(int(row[1]))
            noisy.append(int(row[2]) if len(row) > 2 else 0)
    return np.asarray(labels, dtype=int), np.asarray(noisy, dtype=bool)


def write_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "label"])
        for i, lab in enumerate(labels):
            writer.writerow([i + 1, int(lab)])


def read_labels(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.asarray([int(row[1]) for row in reader if row], dtype=int)


def write_tau(path, tau) -> None:
    tau = np.asarray(tau)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit"] + [f"tau_{k + 1}" for k in range(tau.shape[1])])
        for i in range(tau.shape[0]):
            writer.writerow([i + 1] + [repr(float(v)) for v in tau[i]])


# ---------------------------------------------------------------------------
# scenario and model JSON
# ---------------------------------------------------------------------------

def scenario_to_dict(s) -> dict:
    return {
        "n": s.n, "k": s.k, "j": s.j, "t": s.t,
        "levels": [int(c) for c in s.levels],
        "weights": list(map(float, s.weights)),
        "means": s.means.tolist(),
        "time_covs": s.time_covs.tolist(),
        "var_covs": s.var_covs.tolist(),
        "noise_fraction": float(s.noise_fraction),
        "seed": int(s.seed),
    }


def write_scenario(path, s) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=1)
        fh.write("\n")


def read_scenario(path):
    from .simulate import Scenario

    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    return Scenario(
        n=d["n"], k=d["k"], j=d["j"], t=d["t"],
        levels=np.asarray(d["levels"], dtype=int),
        weights=np.asarray(d["weights"]),
        means=np.asarray(d["means"]),
        time_covs=np.asarray(d["time_covs"]),
        var_covs=np.asarray(d["var_covs"]),
        noise_fraction=d["noise_fraction"], seed=d["seed"],
    )


def model_to_dict(model: MixtureModel, metadata: dict | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "k": model.k,
        "weights": list(map(float, model.weights)),
        "components": [
            {
                "mean": c.mean.tolist(),
                "time_cov": c.time_cov.tolist(),
                "var_cov": c.var_cov.tolist(),
            }
            for c in model.components
        ],
    }
    if model.thresholds is not None:
        # infinite endpoints are implicit; store finite cuts and level counts
        doc["thresholds"] = [c[1:-1].tolist() for c in model.thresholds.cuts]
        doc["levels"] = [int(v) for v in model.thresholds.levels]
    if metadata:
        doc["metadata"] = metadata
    return doc


def write_model(path, model: MixtureModel, metadata: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, metadata), fh, indent=1)
        fh.write("\n")


def read_model(path) -> tuple[MixtureModel, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema_version {doc.get('schema_version')!r}")
    comps = tuple(
        ClusterParams(mean=np.asarray(c["mean"]),
                      time_cov=np.asarray(c["time_cov"]),
                      var_cov=np.asarray(c["var_cov"]))
        for c in doc["components"]
    )
    thresholds = None
    if "thresholds" in doc:
        cuts = tuple(
            np.concatenate(([-np.inf], np.asarray(c, dtype=float), [np.inf]))
            for c in doc["thresholds"]
        )
        thresholds = ordinal.Thresholds(cuts)
    model = MixtureModel(weights=np.asarray(doc["weights"]), components=comps,
                         thresholds=thresholds)
    return model, doc.get("metadata", {})
