"""Artifact persistence: binary containers, CSV emission, run manifests.

Binary layouts are little-endian with fixed magic tags.  A field file stores
``nx, dx, x_min`` then raw doubles; a measure file stores the kind tag, the
JSON-encoded parameter block, the seed and the grid, then the increments.
Floats round-trip bit-exactly (JSON uses shortest-repr encoding, payloads
are raw IEEE doubles).

The manifest lists every emitted artifact with its SHA-256 and size;
artifacts whose bytes depend on wall-clock timings are listed under
``volatile`` without a hash so the manifest itself is reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import SmpdeError
from .grid import Field, GridSpec, SpaceTimeField
from .measures import MeasureSample

__all__ = [
    "write_field_binary",
    "read_field_binary",
    "write_field_csv",
    "read_field_csv",
    "write_space_time_binary",
    "read_space_time_binary",
    "write_measure_binary",
    "read_measure_binary",
    "write_csv",
    "write_json",
    "sha256_file",
    "Manifest",
]

_FIELD_MAGIC = b"SMF1"
_SPACETIME_MAGIC = b"SMS1"
_MEASURE_MAGIC = b"SMM1"


def _pack_grid(grid: GridSpec) -> bytes:
    return struct.pack("<ddqdq", grid.x_min, grid.x_max, grid.nx, grid.t_max, grid.nt)


def _unpack_grid(buf: bytes, offset: int):
    x_min, x_max, nx, t_max, nt = struct.unpack_from("<ddqdq", buf, offset)
    return GridSpec(x_min, x_max, int(nx), t_max, int(nt)), offset + struct.calcsize("<ddqdq")


def write_field_binary(f: Field, path) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_FIELD_MAGIC)
        fh.write(struct.pack("<qdd", f.grid.nx, f.grid.dx, f.grid.x_min))
        fh.write(np.asarray(f.values, dtype="<f8").tobytes())
    return path


def read_field_binary(path, t_label: float = 0.0, t_max: float = 1.0, nt: int = 1) -> Field:
    buf = Path(path).read_bytes()
    if buf[:4] != _FIELD_MAGIC:
        raise SmpdeError(f"{path} is not a field file")
    nx, dx, x_min = struct.unpack_from("<qdd", buf, 4)
    values = np.frombuffer(buf, dtype="<f8", count=nx, offset=4 + struct.calcsize("<qdd"))
    grid = GridSpec(x_min, x_min + nx * dx, int(nx), t_max, nt)
    return Field(grid, values.copy(), t_label)


def write_field_csv(f: Field, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for x, v in zip(f.grid.x_centers(), f.values):
            writer.writerow([repr(float(x)), repr(float(v))])
    return path


def read_field_csv(path, grid: GridSpec, t_label: float = 0.0) -> Field:
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["x", "value"]:
            raise SmpdeError(f"{path} is not a field CSV")
        for row in reader:
            values.append(float(row[1]))
    return Field(grid, np.asarray(values), t_label)


def write_space_time_binary(u: SpaceTimeField, path) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_SPACETIME_MAGIC)
        fh.write(_pack_grid(u.grid))
        fh.write(np.asarray(u.values, dtype="<f8").tobytes())
    return path


def read_space_time_binary(path) -> SpaceTimeField:
    buf = Path(path).read_bytes()
    if buf[:4] != _SPACETIME_MAGIC:
        raise SmpdeError(f"{path} is not a space-time field file")
    grid, offset = _unpack_grid(buf, 4)
    count = (grid.nt + 1) * grid.nx
    values = np.frombuffer(buf, dtype="<f8", count=count, offset=offset)
    return SpaceTimeField(grid, values.reshape(grid.nt + 1, grid.nx).copy())


def write_measure_binary(sample: MeasureSample, path) -> Path:
    path = Path(path)
    kind = sample.kind.encode("utf-8")
    params = json.dumps(sample.params, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MEASURE_MAGIC)
        fh.write(struct.pack("<I", len(kind)))
        fh.write(kind)
        fh.write(struct.pack("<I", len(params)))
        fh.write(params)
        fh.write(struct.pack("<Q", sample.seed))
        fh.write(_pack_grid(sample.grid))
        fh.write(np.asarray(sample.increments, dtype="<f8").tobytes())
    return path


def read_measure_binary(path) -> MeasureSample:
    buf = Path(path).read_bytes()
    if buf[:4] != _MEASURE_MAGIC:
        raise SmpdeError(f"{path} is not a measure file")
    offset = 4
    (klen,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    kind = buf[offset : offset + klen].decode("utf-8")
    offset += klen
    (plen,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    params = json.loads(buf[offset : offset + plen].decode("utf-8"))
    offset += plen
    (seed,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    grid, offset = _unpack_grid(buf, offset)
    inc = np.frombuffer(buf, dtype="<f8", count=grid.nx, offset=offset)
    return MeasureSample(grid, kind, params, int(seed), inc.copy())


def write_csv(path, header: list[str], rows) -> Path:
    """CSV with a header row and shortest-repr floats, stable column order."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    return path


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Collects emitted artifacts and writes the manifest JSON."""

    def __init__(self, out_dir, command: str, seed: int, config_text: str):
        self.out_dir = Path(out_dir)
        self.command = command
        self.seed = seed
        self.config_sha = hashlib.sha256(config_text.encode("utf-8")).hexdigest()
        self.entries: list[dict] = []
        self.volatile: list[str] = []

    def add(self, path, volatile: bool = False):
        rel = str(Path(path).relative_to(self.out_dir))
        if volatile:
            self.volatile.append(rel)
        else:
            self.entries.append(
                {"path": rel, "sha256": sha256_file(path), "bytes": Path(path).stat().st_size}
            )
        return path

    def write(self) -> Path:
        payload = {
            "command": self.command,
            "seed": self.seed,
            "config_sha256": self.config_sha,
            "artifacts": sorted(self.entries, key=lambda e: e["path"]),
            "volatile": sorted(self.volatile),
        }
        return write_json(self.out_dir / "manifest.json", payload)
