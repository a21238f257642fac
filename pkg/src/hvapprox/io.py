"""Binary container formats for matrices, coefficient vectors, datasets,
sparse grids, network models and solver summaries.

All containers start with a 4-byte magic tag followed by little-endian
int64 header fields and row-major float64 payloads. Datasets and models
carry a JSON header with provenance (dimensions, seeds, descriptors).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .dnn import MLPModel
from .hilbert import DiscreteHilbertSpace, HilbertVector
from .pde import Dataset
from .quadrature import SparseGrid

MAGIC_MATRIX = b"HVM1"
MAGIC_VECTOR = b"HVV1"
MAGIC_DATASET = b"HVDS"
MAGIC_MODEL = b"HVNN"


def _write_array(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(fh, shape) -> np.ndarray:
    count = int(np.prod(shape))
    data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
    return data.reshape(shape).copy()


def _expect_magic(fh, magic: bytes, path) -> None:
    got = fh.read(4)
    if got != magic:
        raise ValueError(f"{path}: bad magic {got!r}, expected {magic!r}")


def save_matrix(matrix: np.ndarray, path) -> None:
    """Binary matrix container: magic, int64 (m, N), row-major float64."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "wb") as fh:
        fh.write(MAGIC_MATRIX)
        fh.write(struct.pack("<qq", *matrix.shape))
        _write_array(fh, matrix)


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        _expect_magic(fh, MAGIC_MATRIX, path)
        m, n = struct.unpack("<qq", fh.read(16))
        return _read_array(fh, (m, n))


def export_matrix_csv(matrix: np.ndarray, path) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(matrix, dtype=float)), delimiter=",")


def save_hilbert_vector(v: HilbertVector, path) -> None:
    """Vector container: magic, label, int64 (N, K), row-major float64.

    The Gram matrix itself is not stored; the label records which space the
    coordinates refer to and must be re-associated on load.
    """
    label = v.space.label.encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC_VECTOR)
        fh.write(struct.pack("<q", len(label)))
        fh.write(label)
        fh.write(struct.pack("<qq", *v.coeffs.shape))
        _write_array(fh, v.coeffs)


def load_hilbert_vector(path, space: DiscreteHilbertSpace | None = None):
    """Returns (coeffs, label), or a HilbertVector when a space is supplied."""
    with open(path, "rb") as fh:
        _expect_magic(fh, MAGIC_VECTOR, path)
        (label_len,) = struct.unpack("<q", fh.read(8))
        label = fh.read(label_len).decode()
        n, k = struct.unpack("<qq", fh.read(16))
        coeffs = _read_array(fh, (n, k))
    if space is not None:
        return HilbertVector(space, coeffs)
    return coeffs, label


def save_dataset(ds: Dataset, path) -> None:
    """Dataset container: magic, JSON header, point block, value block."""
    header = dict(ds.meta)
    header.setdefault("d", ds.points.shape[1])
    header.setdefault("m", ds.m)
    header.setdefault("K", ds.values.shape[1])
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC_DATASET)
        fh.write(struct.pack("<q", len(blob)))
        fh.write(blob)
        _write_array(fh, ds.points)
        _write_array(fh, ds.values)


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        _expect_magic(fh, MAGIC_DATASET, path)
        (hlen,) = struct.unpack("<q", fh.read(8))
        meta = json.loads(fh.read(hlen).decode())
        points = _read_array(fh, (meta["m"], meta["d"]))
        values = _read_array(fh, (meta["m"], meta["K"]))
    return Dataset(points, values, meta)


def save_grid(grid: SparseGrid, path) -> None:
    """Sparse grids reuse the dataset container with weights as the values."""
    ds = Dataset(
        grid.points,
        grid.weights[:, None],
        {
            "kind": "sparse_grid",
            "level": grid.level,
            "d": grid.dim,
            "m": len(grid),
            "K": 1,
        },
    )
    save_dataset(ds, path)


def load_grid(path) -> SparseGrid:
    ds = load_dataset(path)
    if ds.meta.get("kind") != "sparse_grid":
        raise ValueError(f"{path} is not a sparse-grid container")
    return SparseGrid(ds.meta["d"], ds.meta["level"], ds.points, ds.values[:, 0])


def save_model(model: MLPModel, path, extra: dict | None = None) -> None:
    """Model container: magic, JSON header (widths, activation, extras), parameters."""
    header = {
        "widths": model.widths,
        "activation": model.activation,
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header).encode()
    flat = np.concatenate(
        [W.ravel() for W in model.weights] + [b.ravel() for b in model.biases]
    )
    with open(path, "wb") as fh:
        fh.write(MAGIC_MODEL)
        fh.write(struct.pack("<q", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<q", flat.size))
        _write_array(fh, flat)


def load_model(path):
    """Returns (MLPModel, header dict)."""
    with open(path, "rb") as fh:
        _expect_magic(fh, MAGIC_MODEL, path)
        (hlen,) = struct.unpack("<q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        (count,) = struct.unpack("<q", fh.read(8))
        flat = _read_array(fh, (count,))
    widths = header["widths"]
    weights, biases, pos = [], [], 0
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        weights.append(flat[pos : pos + n_in * n_out].reshape(n_in, n_out))
        pos += n_in * n_out
    for n_out in widths[1:]:
        biases.append(flat[pos : pos + n_out])
        pos += n_out
    return MLPModel(weights, biases, header["activation"]), header


def result_summary(result, max_trace_points: int = 1000) -> dict:
    """JSON-ready solver summary with the objective trace decimated."""
    trace = np.asarray(result.objective_trace, dtype=float)
    if len(trace) > max_trace_points:
        idx = np.unique(
            np.round(np.linspace(0, len(trace) - 1, max_trace_points)).astype(int)
        )
        trace = trace[idx]
    return {
        "objective_trace": trace.tolist(),
        "objective": float(result.objective_trace[-1]),
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def save_result_summary(result, path) -> None:
    with open(path, "w") as fh:
        json.dump(result_summary(result), fh, indent=2)
