"""File formats: long-format functional CSV and panel-data ingestion."""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError
from .funcdata import (
    FunctionalDataset,
    Mesh,
    interpolate_to_regular,
    rescale_domain,
)

logger = logging.getLogger(__name__)

LONG_COLUMNS = ["sample_id", "variable", "s", "value"]
PANEL_COLUMNS = ["unit", "time", "variable", "value"]


def write_long_csv(path, datasets: list[FunctionalDataset]):
    """Long-format export: one row per (sample, variable, mesh point)."""
    frames = []
    for ds in datasets:
        n, S = ds.values.shape
        frames.append(
            pd.DataFrame(
                {
                    "sample_id": np.repeat(np.arange(n), S),
                    "variable": ds.name,
                    "s": np.tile(ds.mesh.points, n),
                    "value": ds.values.ravel(),
                }
            )
        )
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)


def read_long_csv(path, mesh: Mesh | None = None) -> dict[str, FunctionalDataset]:
    """Read long-format functional data, interpolating irregular s onto the mesh.

    Sample order is the sorted sample_id order, aligned across variables.
    """
    df = pd.read_csv(path)
    missing = [c for c in LONG_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidArgumentError(f"long CSV misses columns {missing}")
    mesh = mesh or Mesh.regular()
    out: dict[str, FunctionalDataset] = {}
    for variable, group in df.groupby("variable", sort=True):
        pts_list, vals_list = [], []
        on_mesh = True
        for _, sample in group.groupby("sample_id", sort=True):
            sample = sample.sort_values("s")
            pts = sample["s"].to_numpy(dtype=float)
            vals = sample["value"].to_numpy(dtype=float)
            pts_list.append(pts)
            vals_list.append(vals)
            if pts.size != mesh.size or not np.allclose(pts, mesh.points, atol=1e-12):
                on_mesh = False
        if on_mesh:
            out[str(variable)] = FunctionalDataset(str(variable), mesh, np.vstack(vals_list))
        else:
            out[str(variable)] = interpolate_to_regular(
                pts_list, vals_list, mesh, name=str(variable)
            )
    return out


def ingest_panel(
    path,
    variables: list[str],
    mesh: Mesh | None = None,
) -> tuple[dict[str, FunctionalDataset], dict]:
    """Turn per-unit time series into aligned functional datasets.

    Expects columns (unit, time, variable, value).  Times are rescaled onto
    [0, 1] using the panel-wide range; each unit's series is interpolated
    onto the mesh with cubic splines.  Units missing a requested variable,
    with fewer than four time points, or not spanning the panel range are
    dropped; the report lists them with reasons.
    """
    df = pd.read_csv(path)
    missing = [c for c in PANEL_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidArgumentError(f"panel CSV misses columns {missing}")
    df = df[df["variable"].isin(variables)]
    if df.empty:
        raise InvalidArgumentError(f"no rows for the requested variables {variables}")
    mesh = mesh or Mesh.regular()
    lo, hi = float(df["time"].min()), float(df["time"].max())
    if hi <= lo:
        raise InvalidArgumentError("panel needs at least two distinct time values")

    series: dict[str, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
    dropped: dict[str, str] = {}
    for (unit, variable), group in df.groupby(["unit", "variable"], sort=True):
        unit = str(unit)
        if unit in dropped:
            continue
        group = group.sort_values("time")
        times = group["time"].to_numpy(dtype=float)
        if np.any(np.diff(times) <= 0):
            dropped[unit] = "duplicate time values"
            continue
        if times.size < 4:
            dropped[unit] = "fewer than 4 time points"
            continue
        pts = rescale_domain(times, lo, hi)
        if pts[0] > mesh.points[0] or pts[-1] < mesh.points[-1]:
            dropped[unit] = "series does not span the panel time range"
            continue
        series.setdefault(unit, {})[str(variable)] = (
            pts,
            group["value"].to_numpy(dtype=float),
        )

    units = []
    for unit in sorted(series):
        if unit in dropped:
            continue
        if all(v in series[unit] for v in variables):
            units.append(unit)
        else:
            dropped[unit] = "missing variables"
    if not units:
        raise InvalidArgumentError("no units survive ingestion")

    out: dict[str, FunctionalDataset] = {}
    for variable in variables:
        pts_list = [series[u][variable][0] for u in units]
        vals_list = [series[u][variable][1] for u in units]
        out[variable] = interpolate_to_regular(pts_list, vals_list, mesh, name=variable)
    if dropped:
        logger.warning("dropped %d units during ingestion: %s", len(dropped), dropped)
    report = {
        "units": units,
        "dropped": dropped,
        "n_dropped": len(dropped),
        "time_range": [lo, hi],
    }
    return out, report
