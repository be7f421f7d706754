"""On-disk formats: DVOL1 volumes, network checkpoints and schema-tagged CSV.

DVOL1 layout::

    DVOL1
    dims <nx> <ny> <nz>
    voxel_size <mm>
    kind <label-u16|real-f64|complex-f64>
    byte_order little
    end
    <raw payload, x fastest>

Arrays are indexed ``(x, y, z)`` in memory, so the payload is the
Fortran-order serialisation.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .tissues import N_TISSUES

MAGIC = "DVOL1"
KINDS = {"label-u16": np.dtype("<u2"), "real-f64": np.dtype("<f8"), "complex-f64": np.dtype("<c16")}


@dataclass(frozen=True)
class Volume:
    data: np.ndarray
    voxel_size: float = 1.0
    kind: str = "real-f64"


def _kind_for(data: np.ndarray) -> str:
    if np.iscomplexobj(data):
        return "complex-f64"
    if np.issubdtype(data.dtype, np.integer):
        return "label-u16"
    return "real-f64"


def write_volume(data: np.ndarray, path, voxel_size: float = 1.0, kind: str | None = None) -> Path:
    data = np.asarray(data)
    if data.ndim != 3 or min(data.shape) < 1:
        raise FormatError(f"volumes must be 3-D with positive dims, got {data.shape}")
    kind = kind or _kind_for(data)
    if kind not in KINDS:
        raise FormatError(f"unknown volume kind {kind!r}")
    if kind == "label-u16" and (data.min() < 0 or data.max() > N_TISSUES):
        raise FormatError(f"label values must lie in 0..{N_TISSUES}")
    header = (
        f"{MAGIC}\n"
        f"dims {data.shape[0]} {data.shape[1]} {data.shape[2]}\n"
        f"voxel_size {float(voxel_size)!r}\n"
        f"kind {kind}\n"
        "byte_order little\n"
        "end\n"
    )
    payload = np.asarray(data, dtype=KINDS[kind]).tobytes(order="F")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)
    return path


def read_volume(path) -> Volume:
    with open(path, "rb") as fh:
        raw = fh.read()
    fields = {}
    pos = 0
    lines = []
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0 or len(lines) > 16:
            raise FormatError(f"{path}: unterminated header")
        line = raw[pos:nl].decode("ascii", errors="replace").strip()
        pos = nl + 1
        lines.append(line)
        if line == "end":
            break
    if lines[0] != MAGIC:
        raise FormatError(f"{path}: bad magic {lines[0]!r}")
    for line in lines[1:-1]:
        key, _, val = line.partition(" ")
        fields[key] = val.strip()
    try:
        dims = tuple(int(v) for v in fields["dims"].split())
        voxel_size = float(fields["voxel_size"])
        kind = fields["kind"]
        order = fields["byte_order"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise FormatError(f"{path}: invalid dims {dims}")
    if kind not in KINDS:
        raise FormatError(f"{path}: unknown kind {kind!r}")
    if order != "little":
        raise FormatError(f"{path}: unsupported byte order {order!r}")
    if not voxel_size > 0:
        raise FormatError(f"{path}: voxel size must be positive")
    dtype = KINDS[kind]
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = raw[pos:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype=dtype).reshape(dims, order="F").copy()
    if kind == "label-u16" and data.max(initial=0) > N_TISSUES:
        raise FormatError(f"{path}: label value {int(data.max())} outside 0..{N_TISSUES}")
    return Volume(data.astype(dtype.newbyteorder("=")), voxel_size, kind)


# --- checkpoints -----------------------------------------------------------

CKPT_MAGIC = b"RFCKPT"
CKPT_VERSION = 1


def save_checkpoint(params, path, config: dict | None = None, extra: dict | None = None) -> Path:
    """Binary container: magic, u16 version, u64 header length, JSON header, LE f64 payload."""
    arrays = [(k, v) for k, v in params.weights.items()]
    arrays += [(f"{k}.running_{s}", a) for k, st in params.bn_stats.items() for s, a in st.items()]
    header = {
        "arch": {"input_size": params.arch.input_size, "depth": params.arch.depth,
                 "n_outputs": params.arch.n_outputs},
        "layers": [{"name": k, "shape": list(v.shape)} for k, v in arrays],
        "config": config or {},
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<HQ", CKPT_VERSION, len(blob)))
        fh.write(blob)
        for _, v in arrays:
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
    return path


def load_checkpoint(path):
    """Return ``(NetworkParams, header)``."""
    from .condnet.network import Architecture, NetworkParams

    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(CKPT_MAGIC):
        raise FormatError(f"{path}: not a checkpoint")
    off = len(CKPT_MAGIC)
    try:
        version, hlen = struct.unpack_from("<HQ", raw, off)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header") from exc
    if version != CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off += struct.calcsize("<HQ")
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except ValueError as exc:
        raise FormatError(f"{path}: corrupt header") from exc
    off += hlen
    weights, stats = {}, {}
    for layer in header["layers"]:
        shape = tuple(layer["shape"])
        n = int(np.prod(shape)) * 8
        if off + n > len(raw):
            raise FormatError(f"{path}: truncated payload at {layer['name']}")
        arr = np.frombuffer(raw, dtype="<f8", count=n // 8, offset=off).reshape(shape).astype(np.float64)
        off += n
        name = layer["name"]
        if ".running_" in name:
            base, stat = name.rsplit(".running_", 1)
            stats.setdefault(base, {})[stat] = arr
        else:
            weights[name] = arr
    if off != len(raw):
        raise FormatError(f"{path}: trailing bytes after payload")
    return NetworkParams(Architecture(**header["arch"]), weights, stats), header


# --- CSV -------------------------------------------------------------------

def write_csv(path, schema: str, columns, rows) -> Path:
    """CSV with a leading ``# schema=<name>`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={schema}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow(row)
    return path


def read_csv(path):
    """Return ``(schema, rows as dicts)``."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema="):
            raise FormatError(f"{path}: missing schema line")
        rows = list(csv.DictReader(fh))
    return first.split("=", 1)[1], rows
