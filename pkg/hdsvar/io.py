# -*- coding: utf-8 -*-
""" Reading and writing panels, fitted artifacts, DGPs and result tables.

CSV tables index variables and shocks from 1. JSON documents store the 0-based indices
used by the Python API.
"""

import json
import logging
import os
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import DataError
from .model_core import SparseVarModel, TimeSeriesPanel

logger = logging.getLogger(__name__)

FIT_FILE = "fit.json"
SHOCKS_FILE = "shocks.csv"
RESIDUALS_FILE = "residuals.csv"


# ================================ Panels ================================


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except (TypeError, ValueError):
        return False
    return True


def read_panel(path: str) -> TimeSeriesPanel:
    """Reads a panel from CSV: optional header row, then one time point per line.

    Raises:
        DataError: Unreadable file, missing or non-numeric cells. The message names
            the offending line.
    """

    try:
        frame = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True
        )
    except FileNotFoundError as error:
        raise DataError("Data file {} does not exist.".format(path)) from error
    except pd.errors.EmptyDataError as error:
        raise DataError("Data file {} is empty.".format(path)) from error
    except pd.errors.ParserError as error:
        raise DataError("Malformed data file {}: {}".format(path, error)) from error

    cells = frame.to_numpy(dtype=object)
    columns = None
    offset = 1
    first = cells[0] if cells.shape[0] else ()
    if not all(isinstance(c, str) and _is_number(c) for c in first):
        columns = tuple(str(c).strip() for c in cells[0])
        cells = cells[1:]
        offset = 2

    if cells.shape[0] == 0:
        raise DataError("Data file {} has no observations.".format(path))

    data = np.empty(cells.shape)
    for i, row in enumerate(cells):
        for k, cell in enumerate(row):
            if not isinstance(cell, str) or cell.strip() == "":
                err = "Missing value in {} at line {}, column {}."
                raise DataError(err.format(path, i + offset, k + 1))
            try:
                data[i, k] = float(cell)
            except ValueError as error:
                err = "Non-numeric value {!r} in {} at line {}, column {}."
                raise DataError(err.format(cell, path, i + offset, k + 1)) from error

    try:
        return TimeSeriesPanel(data, columns)
    except DataError as error:
        raise DataError("{} ({})".format(error, path)) from error


def write_panel(panel: TimeSeriesPanel, path: str) -> None:
    columns = panel.columns or tuple("x{}".format(k + 1) for k in range(panel.p))
    pd.DataFrame(panel.data, columns=list(columns)).to_csv(path, index=False)


def write_matrix(matrix: np.ndarray, path: str, prefix: str) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    columns = ["{}{}".format(prefix, k + 1) for k in range(matrix.shape[1])]
    pd.DataFrame(matrix, columns=columns).to_csv(path, index=False)


def write_table(records: Sequence[dict], path: str, columns: Sequence[str]) -> None:
    """Writes a list of records as CSV with the given column order."""
    pd.DataFrame(list(records), columns=list(columns)).to_csv(path, index=False)


# ================================ JSON ================================


def _encode(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError("Cannot encode {!r}".format(type(value)))


def write_json(document: dict, path: str) -> None:
    with open(path, "w") as handle:
        json.dump(document, handle, indent=2, sort_keys=True, default=_encode)
        handle.write("\n")


def read_json(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except FileNotFoundError as error:
        raise DataError("Missing file {}.".format(path)) from error
    except json.JSONDecodeError as error:
        raise DataError("Malformed JSON in {}: {}".format(path, error)) from error


# ================================ Fitted artifacts ================================


def write_fit(estimates, directory: str) -> None:
    """Writes ``fit.json``, ``shocks.csv`` and ``residuals.csv`` for a pipeline run."""
    os.makedirs(directory, exist_ok=True)
    config = estimates.config
    structure = estimates.structure
    covariances = estimates.covariances
    rows = []
    if estimates.fit is not None:
        rows = [
            {
                "penalty": row.penalty,
                "bic": None if np.isnan(row.bic) else row.bic,
                "iterations": row.iterations,
                "converged": row.converged,
                "note": row.note,
            }
            for row in estimates.fit.rows
        ]

    document = {
        "lags": config.lags,
        "shock_index": list(config.shock_index),
        "horizon": config.horizon,
        "lambda_grid": None if config.lambda_grid is None else list(config.lambda_grid),
        "row_penalties": estimates.tuning.row_penalties,
        "lambda_b": estimates.tuning.lambda_b,
        "lambda_w": estimates.tuning.lambda_w,
        "slopes": estimates.model.stacked,
        "thresholded_slopes": estimates.thresholded.stacked,
        "raw_impact": structure.raw_impact,
        "rotation": structure.rotation,
        "impact": structure.impact,
        "impact_regularized": covariances.impact,
        "sigma_w_regularized": covariances.sigma_w,
        "rows": rows,
    }
    write_json(document, os.path.join(directory, FIT_FILE))
    write_matrix(structure.shocks, os.path.join(directory, SHOCKS_FILE), "u")
    write_matrix(estimates.residuals, os.path.join(directory, RESIDUALS_FILE), "e")
    logger.info("Wrote fitted artifacts to %s", directory)


def read_fit(
    directory: str,
    panel: TimeSeriesPanel,
    horizon: Optional[int] = None,
    settings=None,
):
    """Rebuilds the estimates saved by ``write_fit`` from its artifacts and the data.

    Slopes and tuning parameters are read back; residuals, rotation and regularized
    covariances are recomputed from them with the frozen thresholds.

    Raises:
        DataError: Missing or inconsistent artifacts.
    """

    from .config import DEFAULTS
    from .pipeline import PipelineConfig, assemble

    document = read_json(os.path.join(directory, FIT_FILE))
    try:
        lags = int(document["lags"])
        slopes = np.array(document["slopes"], dtype=float)
        thresholded = np.array(document["thresholded_slopes"], dtype=float)
        config = PipelineConfig(
            lags=lags,
            shock_index=tuple(document["shock_index"]),
            horizon=int(document["horizon"] if horizon is None else horizon),
            lambda_grid=document.get("lambda_grid"),
            settings=settings or DEFAULTS,
        )
        row_penalties = np.array(document["row_penalties"], dtype=float)
        lambda_b = float(document["lambda_b"])
        lambda_w = float(document["lambda_w"])
    except (KeyError, TypeError, ValueError) as error:
        err = "Incomplete fit artifacts in {}: {}".format(directory, error)
        raise DataError(err) from error

    if slopes.shape != (panel.p, panel.p * lags):
        err = "Fitted slopes have shape {}, data has p={}."
        raise DataError(err.format(slopes.shape, panel.p))

    return assemble(
        panel.demeaned(),
        config,
        SparseVarModel.from_stacked(slopes, lags),
        SparseVarModel.from_stacked(thresholded, lags),
        row_penalties,
        lambda_b=lambda_b,
        lambda_w=lambda_w,
    )


# ================================ DGPs ================================


def write_dgp(dgp, path: str) -> None:
    """Stores spec, seed and every matrix of a generated DGP."""
    document = {
        "spec": dgp.spec.to_dict(),
        "seed": dgp.seed,
        "slopes": dgp.model.stacked,
        "impact": dgp.impact,
        "sigma_w": dgp.sigma_w,
    }
    write_json(document, path)


def read_dgp(path: str):
    from .dgp import DgpSpec, GeneratedDgp

    document = read_json(path)
    try:
        spec = DgpSpec(**document["spec"])
        slopes = np.array(document["slopes"], dtype=float)
        model = SparseVarModel.from_stacked(slopes, spec.lags)
        return GeneratedDgp(
            spec,
            int(document["seed"]),
            model,
            np.array(document["impact"], dtype=float),
            np.array(document["sigma_w"], dtype=float),
        )
    except (KeyError, TypeError) as error:
        raise DataError("Incomplete DGP file {}: {}".format(path, error)) from error


# ================================ Result tables ================================


def write_replicates(dist, path: str) -> None:
    """Replicate dump with columns (replicate, h, j, r, value); j and r from 1."""
    records = []
    for row, b in zip(dist.replicates, dist.indices):
        for target, value in zip(dist.targets, row):
            records.append(
                {
                    "replicate": int(b) + 1,
                    "h": target.horizon,
                    "j": target.variable + 1,
                    "r": target.shock + 1,
                    "value": float(value),
                }
            )
    write_table(records, path, ["replicate", "h", "j", "r", "value"])


def write_edges(edges: Iterable, path: str) -> None:
    """Edge list, one ``i j weight`` line per edge (1-based)."""
    with open(path, "w") as handle:
        for edge in edges:
            i, j = edge.variable + 1, edge.shock + 1
            handle.write("{} {} {!r}\n".format(i, j, float(edge.weight)))
