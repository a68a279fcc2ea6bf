"""File formats for pipeline artifacts.

Binary formats are little-endian with short magic headers:
  EVC1  event stream    magic + width(u16) + height(u16) + count(u64),
                        then records (t f64, x u16, y u16, p i8)
  EVL1  contour labels  magic + width(u16) + height(u16) + count(u64),
                        then count bytes of 0/1
  EVP1  probabilities   magic + count(u64), then count f32 in [0, 1]
  EVG1  voxel grid      magic + origin(3 f64) + pitch(f64) + dims(3 u32),
                        then cells f32, x-fastest
  EVM1  body model      magic + array count(u32), then name-tagged f64 arrays

Text formats: trajectory CSV (t,cx,cy,cz,qw,qx,qy,qz), event CSV fallback
(t,x,y,p), OBJ meshes (v/f only), PFM depth maps, PGM frames.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InputError, LoadError
from .geometry import EventStream, Trajectory, TriMesh, VoxelGrid

EVENT_MAGIC = b"EVC1"
LABEL_MAGIC = b"EVL1"
PROB_MAGIC = b"EVP1"
GRID_MAGIC = b"EVG1"
MODEL_MAGIC = b"EVM1"

_EVENT_DTYPE = np.dtype([("t", "<f8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1")])


def save_events(path, events: EventStream) -> None:
    path = Path(path)
    rec = np.empty(len(events), dtype=_EVENT_DTYPE)
    rec["t"] = events.t
    rec["x"] = events.x
    rec["y"] = events.y
    rec["p"] = events.p
    with open(path, "wb") as f:
        f.write(EVENT_MAGIC)
        f.write(struct.pack("<HHQ", events.width, events.height, len(events)))
        f.write(rec.tobytes())


def load_events(path) -> EventStream:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_events_csv(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != EVENT_MAGIC:
            raise LoadError(f"{path}: bad magic {magic!r}, expected {EVENT_MAGIC!r}")
        width, height, count = struct.unpack("<HHQ", f.read(12))
        rec = np.frombuffer(f.read(count * _EVENT_DTYPE.itemsize), dtype=_EVENT_DTYPE)
    if len(rec) != count:
        raise LoadError(f"{path}: truncated event file ({len(rec)} of {count} records)")
    return EventStream(rec["t"].copy(), rec["x"].copy(), rec["y"].copy(), rec["p"].copy(), width, height)


def save_events_csv(path, events: EventStream) -> None:
    with open(path, "w") as f:
        f.write("t,x,y,p\n")
        for i in range(len(events)):
            f.write(f"{events.t[i]:.9f},{events.x[i]},{events.y[i]},{events.p[i]}\n")


def load_events_csv(path, width: int | None = None, height: int | None = None) -> EventStream:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.size == 0:
        raise LoadError(f"{path}: empty event CSV")
    data = np.atleast_1d(data)
    for name in ("t", "x", "y", "p"):
        if name not in (data.dtype.names or ()):
            raise LoadError(f"{path}: missing column {name!r}")
    x = data["x"].astype(np.int64)
    y = data["y"].astype(np.int64)
    if width is None:
        width = int(x.max()) + 1
    if height is None:
        height = int(y.max()) + 1
    return EventStream(data["t"], x, y, data["p"].astype(np.int8), width, height)


def save_labels(path, labels: np.ndarray, width: int, height: int) -> None:
    labels = np.asarray(labels)
    with open(path, "wb") as f:
        f.write(LABEL_MAGIC)
        f.write(struct.pack("<HHQ", width, height, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def load_labels(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != LABEL_MAGIC:
            raise LoadError(f"{path}: bad magic {magic!r}, expected {LABEL_MAGIC!r}")
        _, _, count = struct.unpack("<HHQ", f.read(12))
        raw = np.frombuffer(f.read(count), dtype=np.uint8)
    if len(raw) != count:
        raise LoadError(f"{path}: truncated label file")
    if raw.size and raw.max() > 1:
        raise LoadError(f"{path}: labels must be 0/1")
    return raw.astype(bool)


def save_probabilities(path, probs: np.ndarray) -> None:
    probs = np.asarray(probs, dtype=np.float32)
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise InputError("probabilities must lie in [0, 1]")
    with open(path, "wb") as f:
        f.write(PROB_MAGIC)
        f.write(struct.pack("<Q", len(probs)))
        f.write(probs.astype("<f4").tobytes())


def load_probabilities(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != PROB_MAGIC:
            raise LoadError(f"{path}: bad magic {magic!r}, expected {PROB_MAGIC!r}")
        (count,) = struct.unpack("<Q", f.read(8))
        probs = np.frombuffer(f.read(count * 4), dtype="<f4")
    if len(probs) != count:
        raise LoadError(f"{path}: truncated probability file")
    return probs.astype(np.float64)


def save_grid(path, grid: VoxelGrid) -> None:
    with open(path, "wb") as f:
        f.write(GRID_MAGIC)
        f.write(struct.pack("<3d", *grid.origin))
        f.write(struct.pack("<d", grid.pitch))
        f.write(struct.pack("<3I", *grid.dims))
        f.write(grid.cells.astype("<f4").tobytes())


def load_grid(path) -> VoxelGrid:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != GRID_MAGIC:
            raise LoadError(f"{path}: bad magic {magic!r}, expected {GRID_MAGIC!r}")
        origin = struct.unpack("<3d", f.read(24))
        (pitch,) = struct.unpack("<d", f.read(8))
        dims = struct.unpack("<3I", f.read(12))
        n = dims[0] * dims[1] * dims[2]
        cells = np.frombuffer(f.read(n * 4), dtype="<f4")
    if len(cells) != n:
        raise LoadError(f"{path}: truncated grid file")
    return VoxelGrid(np.array(origin), pitch, dims, cells.astype(np.float64))


def save_arrays(path, arrays: dict[str, np.ndarray], magic: bytes = MODEL_MAGIC) -> None:
    """Name-tagged f64 array container (body-model file format)."""
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            tag = name.encode("utf-8")
            f.write(struct.pack("<H", len(tag)))
            f.write(tag)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.astype("<f8").tobytes())


def load_arrays(path, magic: bytes = MODEL_MAGIC) -> dict[str, np.ndarray]:
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        got = f.read(4)
        if got != magic:
            raise LoadError(f"{path}: bad magic {got!r}, expected {magic!r}")
        (n_arrays,) = struct.unpack("<I", f.read(4))
        for _ in range(n_arrays):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim)) if ndim else ()
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(f.read(count * 8), dtype="<f8")
            if len(data) != count:
                raise LoadError(f"{path}: truncated array {name!r}")
            out[name] = data.reshape(shape).copy()
    return out


def save_trajectory(path, traj: Trajectory) -> None:
    """CSV with header t,cx,cy,cz,qw,qx,qy,qz (scalar-first quaternion)."""
    with open(path, "w") as f:
        f.write("t,cx,cy,cz,qw,qx,qy,qz\n")
        for i in range(len(traj.times)):
            c = traj.centers[i]
            qx, qy, qz, qw = traj.quats[i]  # stored xyzw internally
            f.write(
                f"{traj.times[i]:.9f},{c[0]:.12g},{c[1]:.12g},{c[2]:.12g},"
                f"{qw:.12g},{qx:.12g},{qy:.12g},{qz:.12g}\n"
            )


def load_trajectory(path) -> Trajectory:
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    cols = ("t", "cx", "cy", "cz", "qw", "qx", "qy", "qz")
    for name in cols:
        if name not in (data.dtype.names or ()):
            raise LoadError(f"{path}: missing column {name!r}")
    centers = np.stack([data["cx"], data["cy"], data["cz"]], axis=1)
    quats = np.stack([data["qx"], data["qy"], data["qz"], data["qw"]], axis=1)
    try:
        return Trajectory(data["t"], centers, quats)
    except InputError as e:
        raise LoadError(f"{path}: {e}") from e


def save_obj(path, mesh: TriMesh) -> None:
    with open(path, "w") as f:
        f.write("# evscan mesh\n")
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for face in mesh.faces:
            f.write(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}\n")


def load_obj(path) -> TriMesh:
    vertices = []
    faces = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise LoadError(f"{path}:{lineno}: malformed vertex")
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise LoadError(f"{path}:{lineno}: only triangular faces are supported")
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                faces.append([i - 1 if i > 0 else len(vertices) + i for i in idx])
            # vn/vt/usemtl etc. are ignored
    if not vertices:
        return TriMesh.empty()
    return TriMesh(np.array(vertices), np.array(faces, dtype=np.int64) if faces else np.zeros((0, 3), np.int64))


def save_pfm(path, image: np.ndarray) -> None:
    """Grayscale PFM; rows are written bottom-to-top per the format."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 2:
        raise InputError("PFM writer expects a 2-D image")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{image.shape[1]} {image.shape[0]}\n".encode())
        f.write(b"-1.0\n")  # negative scale = little-endian
        f.write(image[::-1].astype("<f4").tobytes())


def load_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise LoadError(f"{path}: not a grayscale PFM")
        w, h = (int(v) for v in f.readline().split())
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * 4), dtype=dtype)
    if data.size != w * h:
        raise LoadError(f"{path}: truncated PFM")
    return data.reshape(h, w)[::-1].astype(np.float32)


def save_pgm(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise InputError("PGM writer expects uint8")
    with open(path, "wb") as f:
        f.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode())
        f.write(image.tobytes())


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"P5":
            raise LoadError(f"{path}: not a binary PGM")
        line = f.readline()
        while line.startswith(b"#"):
            line = f.readline()
        w, h = (int(v) for v in line.split())
        maxval = int(f.readline())
        if maxval != 255:
            raise LoadError(f"{path}: only 8-bit PGM is supported")
        data = np.frombuffer(f.read(w * h), dtype=np.uint8)
    return data.reshape(h, w)
