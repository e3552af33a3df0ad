"""Binary checkpoints: bit-exact state persistence with atomic writes.

Layout, all little-endian:

    magic   8 bytes  b"NSVSNAP1"
    version u32      currently 1
    config  u32 length + UTF-8 bytes (canonical config document)
    time    f64
    arrays  u32 count, then per array:
              u32 name length + UTF-8 name
              u32 dtype length + ASCII numpy dtype string (e.g. "<c16")
              u32 ndim, ndim * u64 dims
              u64 payload bytes, raw buffer

Arrays are dumped with `tobytes()` and rebuilt with `frombuffer`, so a write
followed by a read reproduces every float bit for bit.  Files are written to a
temporary name in the target directory and renamed into place, so a crash
never leaves a half-written snapshot under the final name.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, parse_config
from .coupling import SimState
from .spectral import SpectralGrid, VelocityField
from .vlasov import DistributionFunction, PhaseGrid

MAGIC = b"NSVSNAP1"
VERSION = 1


class SnapshotError(ValueError):
    """Bad magic, unsupported version, or truncated payload."""


@dataclass(frozen=True)
class Snapshot:
    state: SimState
    config: RunConfig
    config_text: str
    arrays: dict[str, np.ndarray]


def _pack_array(name: str, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    dtype = arr.dtype.str.encode("ascii")
    name_b = name.encode("utf-8")
    parts = [
        struct.pack("<I", len(name_b)),
        name_b,
        struct.pack("<I", len(dtype)),
        dtype,
        struct.pack("<I", arr.ndim),
        struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"",
        struct.pack("<Q", arr.nbytes),
        arr.tobytes(),
    ]
    return b"".join(parts)


def write_snapshot(
    path: str | os.PathLike,
    state: SimState,
    config_text: str,
    extra: dict[str, np.ndarray] | None = None,
) -> None:
    arrays: dict[str, np.ndarray] = {
        "u_hat": state.u.hat,
        "f": state.f.values,
    }
    if extra:
        for name, arr in extra.items():
            if name in arrays:
                raise ValueError(f"array name {name!r} is reserved")
            arrays[name] = np.asarray(arr, dtype=np.float64)

    cfg_b = config_text.encode("utf-8")
    blob = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<I", len(cfg_b)),
        cfg_b,
        struct.pack("<d", state.t),
        struct.pack("<I", len(arrays)),
    ]
    for name, arr in arrays.items():
        blob.append(_pack_array(name, arr))

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".snap-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(blob))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise SnapshotError(
                f"truncated snapshot: needed {n} bytes for {what}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def f64(self, what: str) -> float:
        return struct.unpack("<d", self.take(8, what))[0]


def read_snapshot(path: str | os.PathLike) -> Snapshot:
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise SnapshotError(f"not a snapshot file: magic {magic!r} != {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}, expected {VERSION}")
    cfg_len = r.u32("config length")
    try:
        config_text = r.take(cfg_len, "config text").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SnapshotError(f"config text is not valid UTF-8: {exc}") from None
    t = r.f64("time")
    count = r.u32("array count")

    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = r.u32("array name length")
        name = r.take(name_len, "array name").decode("utf-8")
        dtype_len = r.u32("dtype length")
        dtype = np.dtype(r.take(dtype_len, "dtype").decode("ascii"))
        ndim = r.u32("ndim")
        shape = tuple(r.u64(f"dim {i} of {name}") for i in range(ndim))
        nbytes = r.u64(f"payload size of {name}")
        expected = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if ndim else dtype.itemsize
        if nbytes != expected:
            raise SnapshotError(
                f"array {name!r}: payload size {nbytes} does not match shape {shape}"
            )
        raw = r.take(nbytes, f"payload of {name}")
        arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    if r.pos != len(data):
        raise SnapshotError(f"{len(data) - r.pos} trailing bytes after the last array")

    config = parse_config(config_text)
    for required in ("u_hat", "f"):
        if required not in arrays:
            raise SnapshotError(f"snapshot is missing the {required!r} array")

    grid = SpectralGrid(config.n_x, config.length)
    phase = PhaseGrid(grid, config.n_v, config.v_max)
    u_hat = arrays.pop("u_hat")
    f_values = arrays.pop("f")
    want_u = (2, grid.n_x, grid.n_x // 2 + 1)
    if u_hat.shape != want_u:
        raise SnapshotError(f"u_hat shape {u_hat.shape} does not match config grid {want_u}")
    if f_values.shape != phase.shape:
        raise SnapshotError(f"f shape {f_values.shape} does not match config grid {phase.shape}")
    u = VelocityField(grid, u_hat)
    f = DistributionFunction(phase, f_values, time=t)
    state = SimState(u=u, f=f, t=t)
    return Snapshot(state=state, config=config, config_text=config_text, arrays=arrays)
