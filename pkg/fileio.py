# fileio.py
"""Plain-text and image formats used by the command line."""
import json
import logging
import os

import numpy as np
import pandas as pd

from errors import InvalidArgumentError
from models import PhaseGrid

logger = logging.getLogger(__name__)

GRID_CORNER  = "rho\\delta"
FLOAT_FORMAT = "%.17g"


def _read_csv(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"No such file: {path}")
    try:
        frame = pd.read_csv(
            path, header=None, comment="#", skipinitialspace=True, float_precision="round_trip",
        )
    except pd.errors.EmptyDataError:
        raise InvalidArgumentError(f"{path} holds no data")
    values = frame.to_numpy(dtype=float)
    if np.isnan(values).any():
        raise InvalidArgumentError(f"{path} has missing or non-numeric entries")
    return values


def _ensure_dir(path):
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)


# ── Vectors & matrices ──────────────────────────────────
def read_vector(path):
    """One value per line, or a single comma-separated row."""
    return _read_csv(path).ravel()


def read_matrix(path):
    return _read_csv(path)


def write_vector(path, v):
    _ensure_dir(path)
    frame = pd.DataFrame(np.asarray(v, dtype=float).reshape(-1, 1))
    frame.to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)


def write_matrix(path, A):
    _ensure_dir(path)
    frame = pd.DataFrame(np.atleast_2d(np.asarray(A, dtype=float)))
    frame.to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)


def write_operator(path, Omega):
    """Dense operator: a 'p,d' line followed by the rows."""
    _ensure_dir(path)
    with open(path, "w") as f:
        f.write(f"{Omega.p},{Omega.d}\n")
        frame = pd.DataFrame(Omega.to_dense())
        frame.to_csv(f, header=False, index=False, float_format=FLOAT_FORMAT)


def read_operator_matrix(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"No such file: {path}")
    header, skip = None, 0
    with open(path) as f:
        for skip, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if line:
                header = line
                break
    try:
        p, d = (int(v) for v in header.split(","))
    except (AttributeError, ValueError):
        raise InvalidArgumentError(f"{path}: expected a 'p,d' line followed by the operator rows")
    matrix = pd.read_csv(
        path, header=None, comment="#", skiprows=skip, float_precision="round_trip",
    ).to_numpy(dtype=float)
    if matrix.shape != (p, d):
        raise InvalidArgumentError(f"{path}: header says {p}x{d} but the rows form {matrix.shape[0]}x{matrix.shape[1]}")
    return matrix


# ── Phase grids ─────────────────────────────────────────
def write_phase_grid(path, grid):
    """Header row of delta values, first column rho; unfinished cells left empty."""
    _ensure_dir(path)
    rate = grid.as_array()
    if grid.completed is not None:
        rate = np.where(np.asarray(grid.completed), rate, np.nan)
    frame = pd.DataFrame(rate, index=grid.rho_values, columns=grid.delta_values)
    frame.index.name = GRID_CORNER
    with open(path, "w") as f:
        f.write(f"# trials={grid.trials} seed={grid.seed}\n")
        if grid.completed is not None:
            n_done = int(np.sum(grid.completed))
            f.write(f"# completed_cells={n_done}/{rate.size}\n")
        frame.to_csv(f)
    logger.info(f"Wrote phase grid to {path}")


def read_phase_grid(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"No such file: {path}")
    meta = {"trials": 1, "seed": 0}
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                key, _, value = token.partition("=")
                if key in meta:
                    meta[key] = int(value)
    frame = pd.read_csv(path, comment="#", index_col=0, float_precision="round_trip")
    rate = frame.to_numpy(dtype=float)
    missing = np.isnan(rate)
    return PhaseGrid(
        delta_values  = [float(c) for c in frame.columns],
        rho_values    = [float(r) for r in frame.index],
        trials        = meta["trials"],
        seed          = meta["seed"],
        recovery_rate = np.where(missing, 0.0, rate).tolist(),
        completed     = (~missing).tolist() if missing.any() else None,
    )


# ── Images ──────────────────────────────────────────────
def write_pgm(path, image):
    """Binary P5, maxval 255, [0, 1] mapped linearly to [0, 255]."""
    _ensure_dir(path)
    image = np.atleast_2d(np.asarray(image, dtype=float))
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def read_pgm(path):
    with open(path, "rb") as f:
        data = f.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos].decode("ascii"))
    if fields[0] != "P5":
        raise InvalidArgumentError(f"{path} is not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pixels = np.frombuffer(data[pos + 1: pos + 1 + w * h], dtype=np.uint8)
    return pixels.reshape(h, w) / maxval


def write_heatmap(path, grid, cell=8):
    """Recovery rates as a PGM: 0 black, 1 white, largest rho on top."""
    image = np.kron(np.flipud(grid.as_array()), np.ones((cell, cell)))
    write_pgm(path, image)


# ── Config & records ────────────────────────────────────
def read_kv(path):
    """Flat key=value file; '#' starts a comment, 'none' means unset."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"No such file: {path}")
    values = {}
    with open(path) as f:
        for n, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise InvalidArgumentError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
            value = value.strip()
            values[key.strip()] = None if value.lower() == "none" else value
    return values


def write_kv(path, record):
    _ensure_dir(path)
    with open(path, "w") as f:
        for key, value in record.items():
            f.write(f"{key}={'none' if value is None else value}\n")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_json(path, record):
    _ensure_dir(path)
    with open(path, "w") as f:
        json.dump(record, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")


def write_table(path, rows):
    """List of flat dicts as a CSV with one column per key."""
    _ensure_dir(path)
    pd.DataFrame(rows).to_csv(path, index=False)
