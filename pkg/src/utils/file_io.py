import csv
import json
import logging
import struct
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

from ..controllers.geometry import grid_from_dict, make_unstructured_grid
from ..models.config import ModelConfig, RunConfig
from ..models.dataset import Dataset
from ..models.grid import Grid, Topology
from ..models.kernels import AssembledKernel
from ..models.metrics import EpochMetrics
from .constants import (
    CHECKPOINT_FORMAT_VERSION,
    DATASET_FORMAT_VERSION,
    GENERATOR_VERSION,
    GRID_FORMAT_VERSION,
    KERNEL_FORMAT_VERSION,
)
from .errors import (
    IncompatibleCheckpointError,
    IncompatibleDatasetError,
    InvalidArgumentError,
    LocalNOError,
)

_logger = logging.getLogger(__name__)

_HEADER_LENGTH = struct.Struct("<Q")


def _pack(arrays: Dict[str, np.ndarray]) -> Tuple[List[dict], List[bytes]]:
    """Describe and serialize arrays as little-endian blocks; complex as float pairs."""
    entries, blobs = [], []
    offset = 0
    for name, array in arrays.items():
        is_complex = bool(np.iscomplexobj(array))
        if is_complex:
            data = np.ascontiguousarray(array, dtype="<c16").view("<f8")
            dtype = "<f8"
        elif np.issubdtype(array.dtype, np.integer):
            data = np.ascontiguousarray(array, dtype="<i8")
            dtype = "<i8"
        else:
            data = np.ascontiguousarray(array, dtype="<f8")
            dtype = "<f8"
        blob = data.tobytes()
        entries.append({
            "name": name,
            "dtype": dtype,
            "shape": list(array.shape),
            "complex": is_complex,
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    return entries, blobs


def _unpack(entries: Sequence[dict], payload: bytes, error: Type[LocalNOError]) -> Dict[str, np.ndarray]:
    arrays = {}
    for entry in entries:
        start, size = entry["offset"], entry["nbytes"]
        if start + size > len(payload):
            raise error(f"payload truncated while reading '{entry['name']}'")
        data = np.frombuffer(payload[start:start + size], dtype=entry["dtype"]).copy()
        if entry.get("complex"):
            data = data.view("<c16")
        native = np.complex128 if entry.get("complex") else (np.int64 if entry["dtype"] == "<i8" else np.float64)
        arrays[entry["name"]] = data.reshape(entry["shape"]).astype(native)
    return arrays


class FileIO:
    """Handles every on-disk format: grids, kernels, datasets, checkpoints, CSV and configs."""

    # Single-file container: 8-byte little-endian header length, JSON header, payload.

    @staticmethod
    def write_container(file_path: str, header: dict, arrays: Dict[str, np.ndarray]):
        entries, blobs = _pack(arrays)
        header = dict(header, arrays=entries)
        encoded = json.dumps(header, sort_keys=True).encode("utf-8")
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(_HEADER_LENGTH.pack(len(encoded)))
            f.write(encoded)
            for blob in blobs:
                f.write(blob)

    @staticmethod
    def read_container(file_path: str, error: Type[LocalNOError]) -> Tuple[dict, Dict[str, np.ndarray]]:
        try:
            with open(file_path, "rb") as f:
                raw = f.read()
        except OSError as e:
            raise error(f"cannot read {file_path}: {e}") from e
        if len(raw) < _HEADER_LENGTH.size:
            raise error(f"{file_path} is too short to hold a header")
        (length,) = _HEADER_LENGTH.unpack_from(raw)
        start = _HEADER_LENGTH.size
        if start + length > len(raw):
            raise error(f"{file_path} header is truncated")
        try:
            header = json.loads(raw[start:start + length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise error(f"{file_path} has a malformed header: {e}") from e
        payload = raw[start + length:]
        entries = header.get("arrays", [])
        expected = sum(entry["nbytes"] for entry in entries)
        if len(payload) != expected:
            raise error(f"{file_path} payload holds {len(payload)} bytes, expected {expected}")
        return header, _unpack(entries, payload, error)

    # Grids: JSON header plus a sibling binary file

    @staticmethod
    def save_grid(grid: Grid, file_path: str):
        path = Path(file_path)
        binary = path.with_suffix(".bin")
        header = dict(grid.to_dict(), version=GRID_FORMAT_VERSION, m=grid.size, binary=binary.name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(header, f, indent=2)
        with open(binary, "wb") as f:
            f.write(np.ascontiguousarray(grid.points, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(grid.quad_weights, dtype="<f8").tobytes())

    @staticmethod
    def load_grid(file_path: str) -> Grid:
        path = Path(file_path)
        with open(path, "r", encoding="utf-8") as f:
            header = json.load(f)
        if header.get("version") != GRID_FORMAT_VERSION:
            raise IncompatibleDatasetError(f"unsupported grid format {header.get('version')}")
        m, dim = header["m"], header["dim"]
        raw = np.frombuffer((path.parent / header["binary"]).read_bytes(), dtype="<f8")
        if raw.shape[0] != m * (dim + 1):
            raise IncompatibleDatasetError(f"grid binary holds {raw.shape[0]} values, expected {m * (dim + 1)}")
        topology = Topology(header["topology"])
        if topology == Topology.UNSTRUCTURED:
            return make_unstructured_grid(raw[: m * dim].reshape(m, dim), raw[m * dim:])
        return grid_from_dict(header)

    # Assembled kernels: JSON header plus a sibling binary file

    @staticmethod
    def save_kernel(kernel: AssembledKernel, file_path: str):
        path = Path(file_path)
        binary = path.with_suffix(".bin")
        header = dict(kernel.to_dict(), version=KERNEL_FORMAT_VERSION, binary=binary.name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(header, f, indent=2)
        with open(binary, "wb") as f:
            f.write(np.ascontiguousarray(kernel.indptr, dtype="<i8").tobytes())
            f.write(np.ascontiguousarray(kernel.indices, dtype="<i8").tobytes())
            f.write(np.ascontiguousarray(kernel.values, dtype="<f8").tobytes())

    @staticmethod
    def load_kernel(file_path: str, grid_in: Grid, grid_out: Grid) -> AssembledKernel:
        path = Path(file_path)
        with open(path, "r", encoding="utf-8") as f:
            header = json.load(f)
        if header.get("version") != KERNEL_FORMAT_VERSION:
            raise IncompatibleDatasetError(f"unsupported kernel format {header.get('version')}")
        raw = (path.parent / header["binary"]).read_bytes()
        rows, nnz, ell = grid_out.size, header["nnz"], header["L"]
        if len(raw) != 8 * (rows + 1 + nnz + ell * nnz):
            raise IncompatibleDatasetError("kernel binary does not match its header and grids")
        indptr = np.frombuffer(raw, dtype="<i8", count=rows + 1).astype(np.int64)
        indices = np.frombuffer(raw, dtype="<i8", count=nnz, offset=8 * (rows + 1)).astype(np.int64)
        values = np.frombuffer(raw, dtype="<f8", offset=8 * (rows + 1 + nnz)).reshape(ell, nnz).copy()
        return AssembledKernel(
            indptr=indptr,
            indices=indices,
            values=values,
            grid_in=grid_in,
            grid_out=grid_out,
            geometry=header["geometry"],
            quadrature_folded=header["quadrature_folded"],
            normalized=header["normalized"],
        )

    # Datasets

    @staticmethod
    def save_dataset(dataset: Dataset, file_path: str):
        header = {
            "format": "dataset",
            "version": DATASET_FORMAT_VERSION,
            "generator": GENERATOR_VERSION,
            "task": dataset.task,
            "seed": dataset.seed,
            "sample_seeds": list(dataset.sample_seeds),
            "grid": dataset.grid.to_dict(),
            "counts": {
                "samples": len(dataset),
                "in_channels": dataset.inputs.shape[1],
                "out_channels": dataset.targets.shape[1],
            },
            "input_names": dataset.input_names,
            "target_names": dataset.target_names,
            "extra": dataset.extra,
        }
        FileIO.write_container(file_path, header, {"inputs": dataset.inputs, "targets": dataset.targets})
        _logger.info("Wrote %d samples to %s", len(dataset), file_path)

    @staticmethod
    def load_dataset(file_path: str) -> Dataset:
        header, arrays = FileIO.read_container(file_path, IncompatibleDatasetError)
        if header.get("format") != "dataset":
            raise IncompatibleDatasetError(f"{file_path} is not a dataset file")
        if header.get("version") != DATASET_FORMAT_VERSION or header.get("generator") != GENERATOR_VERSION:
            raise IncompatibleDatasetError(
                f"dataset version {header.get('version')}/{header.get('generator')} "
                f"is not {DATASET_FORMAT_VERSION}/{GENERATOR_VERSION}"
            )
        try:
            grid = grid_from_dict(header["grid"])
        except LocalNOError as e:
            raise IncompatibleDatasetError(str(e)) from e
        inputs, targets = arrays.get("inputs"), arrays.get("targets")
        if inputs is None or targets is None or inputs.shape[-1] != grid.size:
            raise IncompatibleDatasetError(f"{file_path} arrays do not match its grid")
        return Dataset(
            task=header["task"],
            inputs=inputs,
            targets=targets,
            grid=grid,
            seed=header["seed"],
            sample_seeds=header.get("sample_seeds", []),
            input_names=header.get("input_names", []),
            target_names=header.get("target_names", []),
            extra=header.get("extra", {}),
        )

    # Checkpoints

    @staticmethod
    def save_checkpoint(params: Dict[str, np.ndarray], config: ModelConfig, file_path: str,
                        grid: Optional[Grid] = None, epoch: int = -1):
        header = {
            "format": "checkpoint",
            "version": CHECKPOINT_FORMAT_VERSION,
            "config": config.to_dict(),
            "grid": grid.to_dict() if grid is not None else None,
            "epoch": epoch,
        }
        FileIO.write_container(file_path, header, params)

    @staticmethod
    def load_checkpoint(file_path: str) -> Tuple[ModelConfig, Dict[str, np.ndarray], dict]:
        header, arrays = FileIO.read_container(file_path, IncompatibleCheckpointError)
        if header.get("format") != "checkpoint" or header.get("version") != CHECKPOINT_FORMAT_VERSION:
            raise IncompatibleCheckpointError(
                f"{file_path} is not a version {CHECKPOINT_FORMAT_VERSION} checkpoint"
            )
        try:
            config = ModelConfig.from_dict(header["config"])
        except (KeyError, TypeError, ValueError) as e:
            raise IncompatibleCheckpointError(f"checkpoint config is invalid: {e}") from e
        return config, arrays, header

    # CSV and run configuration

    @staticmethod
    def write_csv(file_path: str, columns: Sequence[str], rows: Sequence[Sequence]):
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_csv_value(v) for v in row])

    @staticmethod
    def write_metrics(file_path: str, history: Sequence[EpochMetrics]):
        columns = ["epoch", "lr", "train_loss", "val_rel_l2"]
        rows = [[m.epoch, m.lr, m.train_loss, m.val_rel_l2] for m in history]
        FileIO.write_csv(file_path, columns, rows)

    @staticmethod
    def load_config(file_path: str) -> dict:
        """Flat key-value JSON run configuration."""
        with open(file_path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise InvalidArgumentError(f"{file_path} is not a flat key-value map")
        return data

    @staticmethod
    def save_run_config(run: RunConfig, file_path: str):
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(run.to_dict(), f, indent=2, sort_keys=True)


def _csv_value(value):
    """repr keeps floats round-trippable so reruns compare bitwise."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value
