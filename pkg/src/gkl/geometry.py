"""Finite candidate sets standing in for the continuous domain."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

__all__ = [
    "CandidateSet",
    "sample_random",
    "uniform_grid",
    "project_to_slice",
    "from_points",
    "load_points_csv",
    "fill_distance",
    "separation_distance",
]


@dataclass(frozen=True)
class CandidateSet:
    """Immutable, duplicate-free array of points in a bounding box.

    ``provenance`` is a small dict such as ``{"kind": "random", "seed": 0,
    "count": 20000}`` recorded into every output file.
    """

    points: np.ndarray
    provenance: dict = field(default_factory=lambda: {"kind": "explicit"})
    n_duplicates: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a candidate set needs a nonempty (n, d) array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def in_box(self, lo: float = 0.0, hi: float = 1.0) -> bool:
        return bool(np.all((self.points >= lo) & (self.points <= hi)))


def _dedup(points: np.ndarray) -> tuple[np.ndarray, int]:
    # keeps first occurrences in their original order
    _, first = np.unique(points, axis=0, return_index=True)
    first.sort()
    return points[first], points.shape[0] - first.size


def from_points(points, provenance: dict | None = None) -> CandidateSet:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need a nonempty list of points")
    pts, dups = _dedup(pts)
    return CandidateSet(pts, provenance or {"kind": "explicit"}, dups)


def sample_random(seed: int, count: int, dim: int) -> CandidateSet:
    """``count`` i.i.d. uniform points in ``[0, 1]^dim`` (PCG64 seeded by ``seed``)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    pts, dups = _dedup(rng.random((count, dim)))
    return CandidateSet(pts, {"kind": "random", "seed": int(seed), "count": int(count)}, dups)


def uniform_grid(resolution: int, dim: int = 1) -> CandidateSet:
    """Tensor grid with ``resolution`` equispaced nodes per axis, endpoints included."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    axis = np.linspace(0.0, 1.0, resolution)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return CandidateSet(pts, {"kind": "grid", "resolution": int(resolution)})


def project_to_slice(cset: CandidateSet, axis: int, value: float) -> CandidateSet:
    """Replace coordinate ``axis`` of every point by ``value`` and drop collisions."""
    if not 0 <= axis < cset.dim:
        raise ValueError(f"axis {axis} out of range for dimension {cset.dim}")
    pts = np.array(cset.points)
    pts[:, axis] = value
    pts, dups = _dedup(pts)
    prov = dict(cset.provenance)
    prov.update(slice_axis=int(axis), slice_value=float(value))
    if "kind" in prov and not prov["kind"].endswith("+slice"):
        prov["kind"] = prov["kind"] + "+slice"
    return CandidateSet(pts, prov, dups)


def load_points_csv(path) -> CandidateSet:
    """One point per row, coordinates separated by commas; '#' starts a comment."""
    pts = np.loadtxt(Path(path), delimiter=",", comments="#", ndmin=2)
    return from_points(pts, {"kind": "csv", "path": str(path)})


def _as_points(X) -> np.ndarray:
    X = np.asarray(X.points if isinstance(X, CandidateSet) else X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def fill_distance(selected, evaluation) -> float:
    """Largest distance from an evaluation point to its nearest selected point."""
    S = _as_points(selected)
    if S.shape[0] == 0:
        raise ValueError("fill distance needs at least one selected point")
    E = _as_points(evaluation)
    dist, _ = cKDTree(S).query(E)
    return float(dist.max())


def separation_distance(selected) -> float:
    """Half the smallest pairwise distance."""
    S = _as_points(selected)
    if S.shape[0] < 2:
        raise ValueError("separation distance needs at least two points")
    return 0.5 * float(pdist(S).min())
