"""CSV, PGM and JSON writers. Files are written to a temporary name and renamed."""
import json
import logging
import math
from pathlib import Path

import numpy as np

from .utils import atomic_path

logger = logging.getLogger(__name__)


def _as_table(table):
    if hasattr(table, "to_table"):
        return table.to_table()
    columns, rows = table
    return list(columns), list(rows)


def format_value(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(table, path):
    """Header line then one line per record; 17 significant digits, LF endings.

    :param table: (columns, rows) or any object with `to_table()`.
    """
    columns, rows = _as_table(table)
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"Row {row} does not match columns {columns}")
        lines.append(",".join(format_value(v) for v in row))
    with atomic_path(path) as tmp:
        Path(tmp).write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    logger.debug("Wrote %d records to %s", len(rows), path)


def _parse(text):
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def read_csv(path):
    with open(path, encoding="ascii", newline="") as fp:
        lines = fp.read().split("\n")
    columns = lines[0].split(",")
    rows = [[_parse(v) for v in line.split(",")] for line in lines[1:] if line]
    return columns, rows


def write_gnuplot(table, path):
    """Whitespace separated columns with a commented header, for `plot 'file' using 1:2`."""
    columns, rows = _as_table(table)
    lines = ["# " + " ".join(columns)]
    lines += [" ".join(format_value(v) for v in row) for row in rows]
    with atomic_path(path) as tmp:
        Path(tmp).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def pgm_pixels(counts, gamma=0.5):
    """8 bit pixels, row 0 holding the cells with y near 1.

    :param counts: (nx, ny) array, x along the first axis.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any():
        raise ValueError("Raster values must be nonnegative")
    image = counts.T[::-1]
    top = image.max() if image.size else 0.
    if top <= 0:
        return np.zeros(image.shape, dtype=np.uint8)
    scaled = 255 * (image / top) ** gamma
    return np.floor(scaled + 0.5).astype(np.uint8)


def write_pgm(raster, path, gamma=0.5):
    """Binary P5 greymap, width nx and height ny. Accepts a DensityRaster or an array."""
    counts = raster.counts if hasattr(raster, "counts") else raster
    pixels = pgm_pixels(counts, gamma)
    height, width = pixels.shape
    with atomic_path(path) as tmp, open(tmp, "wb") as fp:
        fp.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fp.write(np.ascontiguousarray(pixels).tobytes())


def read_pgm(path):
    with open(path, "rb") as fp:
        data = fp.read()
    magic, size, maxval, payload = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError(f"{path}: not an 8 bit binary PGM")
    width, height = map(int, size.split())
    return np.frombuffer(payload, dtype=np.uint8, count=width * height).reshape(height, width)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    return value


def write_json(obj, path):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    with atomic_path(path) as tmp:
        Path(tmp).write_bytes((text + "\n").encode("utf-8"))


def write_manifest(path, subcommand, config, seeds, outputs, version):
    """Everything needed to rerun: the resolved config, derived seeds and written files."""
    write_json({"subcommand": subcommand, "config": config, "seeds": seeds,
                "outputs": sorted(outputs), "version": version}, path)
