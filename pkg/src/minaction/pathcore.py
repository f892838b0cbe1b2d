"""Meshes on the unit interval, piecewise-linear vector paths, and path geometry.

A transition path is represented as a vector-valued, continuous, piecewise-linear
function of the scaled time s = t/T on [0, 1], pinned to its two endpoints.  This
module owns the mesh/path containers plus the purely geometric operations on them
(interpolation, refinement, arc length, discrete Frechet distance, node-clustering
diagnostics) and the path CSV format.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mesh",
    "FePath",
    "Polyline",
    "uniform_mesh",
    "linear_interpolant_path",
    "refine_path",
    "resample_path",
    "arc_length",
    "discrete_frechet",
    "clustering_fraction",
    "path_polyline",
    "write_path_csv",
    "read_path_csv",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Mesh:
    """Partition of [0, 1] stored as its ordered node array.

    Nodes must start at exactly 0.0, end at exactly 1.0, and be strictly
    increasing.  Nonuniform meshes are allowed; only the uniform constructor
    is used by the built-in studies.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("mesh needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("mesh must span [0, 1] exactly")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", _readonly(nodes))

    @property
    def num_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def element_sizes(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        """Largest element size."""
        return float(np.max(np.diff(self.nodes)))


def uniform_mesh(num_elements: int) -> Mesh:
    """Equispaced mesh with the given number of elements (h = 1/N)."""
    if num_elements < 1:
        raise ValueError("number of elements must be >= 1")
    return Mesh(np.linspace(0.0, 1.0, num_elements + 1))


@dataclass(frozen=True)
class FePath:
    """Continuous piecewise-linear path: nodal values on a mesh.

    ``values`` has one row per mesh node; row 0 and row N are the pinned
    endpoints.  Immutable after construction.
    """

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != self.mesh.nodes.size:
            raise ValueError("one value row per mesh node required")
        if values.shape[1] < 1:
            raise ValueError("state dimension must be >= 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def left(self) -> np.ndarray:
        return self.values[0]

    @property
    def right(self) -> np.ndarray:
        return self.values[-1]

    def replace_interior(self, interior: np.ndarray) -> "FePath":
        """New path with the same mesh/endpoints and the given interior rows."""
        interior = np.asarray(interior, dtype=float).reshape(-1, self.dim)
        if interior.shape[0] != self.mesh.nodes.size - 2:
            raise ValueError("interior rows must match interior node count")
        vals = np.vstack([self.values[:1], interior, self.values[-1:]])
        return FePath(self.mesh, vals)

    def __call__(self, s):
        """Evaluate the piecewise-linear interpolant at scalar or array s."""
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape + (self.dim,))
        for j in range(self.dim):
            out[..., j] = np.interp(s, self.mesh.nodes, self.values[:, j])
        return out


@dataclass(frozen=True)
class Polyline:
    """Ordered point sequence used for geometric curve comparison."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 2:
            raise ValueError("polyline needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline points must be finite")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def linear_interpolant_path(x1, x2, mesh: Mesh) -> FePath:
    """Straight-line path from x1 to x2 sampled on the mesh nodes.

    The default starting guess for the optimizers.  Endpoint rows reproduce
    x1 and x2 bit-exactly.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError("endpoints must be vectors of equal dimension")
    s = mesh.nodes[:, None]
    values = (1.0 - s) * x1[None, :] + s * x2[None, :]
    return FePath(mesh, values)


def refine_path(path: FePath) -> FePath:
    """Bisect every element; nodal values of the same function on the finer mesh.

    The represented piecewise-linear function is unchanged (nested linear
    finite element spaces), so any action evaluation is preserved up to
    quadrature exactness.
    """
    nodes = path.mesh.nodes
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    new_nodes = np.empty(2 * nodes.size - 1)
    new_nodes[0::2] = nodes
    new_nodes[1::2] = mids
    new_values = np.empty((new_nodes.size, path.dim))
    new_values[0::2] = path.values
    new_values[1::2] = 0.5 * (path.values[:-1] + path.values[1:])
    return FePath(Mesh(new_nodes), new_values)


def resample_path(path: FePath, mesh: Mesh) -> FePath:
    """Sample the path's interpolant on another mesh (exact on nested meshes)."""
    values = path(mesh.nodes)
    values[0] = path.values[0]
    values[-1] = path.values[-1]
    return FePath(mesh, values)


def arc_length(path: FePath) -> float:
    """Total Euclidean length of the polygonal path; >= |x2 - x1|."""
    return float(np.sum(np.linalg.norm(np.diff(path.values, axis=0), axis=1)))


def discrete_frechet(a: Polyline, b: Polyline) -> float:
    """Discrete Frechet distance between two polylines.

    Dynamic program over the monotone coupling lattice with Euclidean
    point-to-point costs (Eiter-Mannila recursion).  Symmetric, nonnegative,
    and zero only when the point sequences admit a perfect coupling.
    """
    if a.dim != b.dim:
        raise ValueError("polylines must share the state dimension")
    p_pts, q_pts = a.points, b.points
    diff = p_pts[:, None, :] - q_pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    p, q = dist.shape
    ca = np.empty((p, q))
    ca[0, 0] = dist[0, 0]
    for j in range(1, q):
        ca[0, j] = max(ca[0, j - 1], dist[0, j])
    for i in range(1, p):
        ca[i, 0] = max(ca[i - 1, 0], dist[i, 0])
        row_prev = ca[i - 1]
        row = ca[i]
        d_row = dist[i]
        for j in range(1, q):
            reach = min(row_prev[j], row_prev[j - 1], row[j - 1])
            row[j] = reach if reach > d_row[j] else d_row[j]
    return float(ca[-1, -1])


def clustering_fraction(path: FePath, center, radius: float) -> float:
    """Fraction of mesh nodes whose value lies in the closed ball about center.

    Diagnoses node clustering near slow dynamics: fixed-time discretizations
    with an overlarge horizon park most nodes next to a stable equilibrium.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dist = np.linalg.norm(path.values - center[None, :], axis=1)
    return float(np.count_nonzero(dist <= radius) / path.values.shape[0])


def path_polyline(path: FePath) -> Polyline:
    """View the path's nodal values as a polyline."""
    return Polyline(path.values)


def write_path_csv(path: FePath, target) -> None:
    """Write a path as CSV with header ``s,x1,...,xn`` (round-trip precision)."""
    header = ["s"] + [f"x{j + 1}" for j in range(path.dim)]

    def _dump(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for s, row in zip(path.mesh.nodes, path.values):
            writer.writerow([repr(float(s))] + [repr(float(v)) for v in row])

    if hasattr(target, "write"):
        _dump(target)
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            _dump(fh)


def read_path_csv(source) -> FePath:
    """Read a path written by :func:`write_path_csv`."""

    def _load(fh):
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "s":
            raise ValueError("path CSV must start with an 's' column")
        rows = [[float(c) for c in row] for row in reader if row]
        return np.asarray(rows, dtype=float)

    if hasattr(source, "read"):
        data = _load(source)
    else:
        with open(source, "r", encoding="utf-8", newline="") as fh:
            data = _load(fh)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("path CSV must have an s column and at least one component")
    return FePath(Mesh(data[:, 0]), data[:, 1:])
