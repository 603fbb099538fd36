"""Local feature aggregation over k nearest joints, for coordinates and geometry.

Row layout: a batch of B frames with N joints is stacked as B*N point rows
(frame-major).  Local maps add a neighbor axis, giving B*N*k rows ordered
(frame, joint, neighbor), so pooling over neighbors is a pool over groups of
k consecutive rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Skeleton
from .numeric.nn import MlpBlock
from .numeric.tensor import ShapeError, Tensor, concat_cols, pool_rows, repeat_rows, take_rows

GEOMETRY_MODES = ("none", "distance", "angle", "both")


@dataclass
class MiaConfig:
    k: int = 8
    M: int = 64
    geometry: str = "both"       # none | distance | angle | both
    coord_depth: int = 1
    geo_depth: int = 1

    def __post_init__(self):
        if self.M % 2:
            raise ValueError(f"M must be even, got {self.M}")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.geometry not in GEOMETRY_MODES:
            raise ValueError(f"geometry must be one of {GEOMETRY_MODES}")

    @property
    def out_dim(self) -> int:
        return self.M if self.geometry != "none" else self.M // 2


def knn(coords: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest other joints for every joint.

    ``coords`` is (N, 3) or a batch (B, N, 3).  The query joint itself is
    excluded and ties go to the lower index.
    """
    coords = np.asarray(coords, dtype=float)
    single = coords.ndim == 2
    if single:
        coords = coords[None]
    n = coords.shape[1]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    diff = coords[:, :, None, :] - coords[:, None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    idx = np.arange(n)
    d2[:, idx, idx] = np.inf
    order = np.argsort(d2, axis=-1, kind="stable")[..., :k]
    return order[0] if single else order


def global_index(nn: np.ndarray) -> np.ndarray:
    """(B, N, k) per-frame neighbor indices -> flat row indices into B*N stacked rows."""
    b, n, _ = nn.shape
    return (nn + (np.arange(b) * n)[:, None, None]).reshape(-1)


def neighbor_map(x: Tensor, flat_index: np.ndarray, k: int) -> Tensor:
    """Rows ``[x_i, x_ik - x_i]`` for every point i and each of its k neighbors."""
    center = repeat_rows(x, k)
    neigh = take_rows(x, flat_index)
    return concat_cols([center, neigh - center])


def local_map_coords(coords, nn: np.ndarray) -> Tensor:
    """Coordinate local map for one frame: (N*k, 6) rows, i.e. an N x 6k map viewed per neighbor."""
    x = coords if isinstance(coords, Tensor) else Tensor(np.asarray(coords, dtype=float))
    nn = np.asarray(nn)
    return neighbor_map(x, global_index(nn[None]), nn.shape[1])


def encode_branch(local_map: Tensor, blocks, k: int, training: bool = False) -> Tensor:
    """Shared MLP over every (joint, neighbor) row, then max over the k neighbors."""
    if local_map.rows % k:
        raise ShapeError(f"local map with {local_map.rows} rows is not a multiple of k={k}")
    h = local_map
    for b in blocks:
        h = b(h, training)
    return pool_rows(h, k, "max")


def geometry_rows(values: np.ndarray, incidence: np.ndarray) -> np.ndarray:
    """Per-joint geometry: joint i keeps only the features it takes part in.

    ``values`` is (B, V); ``incidence`` is (N, V).  Result is (B*N, V).
    """
    values = np.atleast_2d(values)
    rows = values[:, None, :] * incidence[None, :, :]
    return rows.reshape(-1, values.shape[1])


def geometry_branch_input(geo_rows, lift, nn: np.ndarray, training: bool = False) -> Tensor:
    """Lift per-joint geometry rows with two MLPs, then pair each joint with its coordinate neighbors.

    ``geo_rows`` is (N, V) for one frame or (B*N, V) with ``nn`` of shape (B, N, k).
    """
    g = geo_rows if isinstance(geo_rows, Tensor) else Tensor(np.asarray(geo_rows, dtype=float))
    for b in lift:
        g = b(g, training)
    nn = np.asarray(nn)
    if nn.ndim == 2:
        nn = nn[None]
    return neighbor_map(g, global_index(nn), nn.shape[2])


def fuse_local(p: Tensor, g: Tensor) -> Tensor:
    if p.rows != g.rows:
        raise ShapeError(f"fuse_local: coordinate branch {p.shape} vs geometry branch {g.shape}")
    return concat_cols([p, g])


class MiaModule:
    def __init__(self, config: MiaConfig, skeleton: Skeleton, rng: np.random.Generator):
        self.config = config
        self.skeleton = skeleton
        half = config.M // 2
        self.coord_blocks = [MlpBlock(6 if i == 0 else half, half, rng, name=f"mia.coord{i}")
                             for i in range(config.coord_depth)]
        self.feature_index = self._select_features()
        self.incidence = skeleton.incidence()[:, self.feature_index]
        self.lift: list[MlpBlock] = []
        self.geo_blocks: list[MlpBlock] = []
        if config.geometry != "none":
            v = len(self.feature_index)
            self.lift = [MlpBlock(v, half, rng, name="mia.lift0"),
                         MlpBlock(half, config.M, rng, name="mia.lift1")]
            self.geo_blocks = [MlpBlock(2 * config.M if i == 0 else half, half, rng,
                                        name=f"mia.geo{i}") for i in range(config.geo_depth)]

    def _select_features(self) -> np.ndarray:
        nd = len(self.skeleton.distance_pairs)
        na = len(self.skeleton.angle_triples)
        mode = self.config.geometry
        idx = []
        if mode in ("distance", "both"):
            idx += list(range(nd))
        if mode in ("angle", "both"):
            idx += list(range(nd, nd + na))
        if mode != "none" and not idx:
            raise ValueError(f"geometry mode {mode!r} selects no features of skeleton "
                             f"{self.skeleton.name!r}")
        return np.asarray(idx, dtype=np.intp)

    @property
    def blocks(self) -> list[MlpBlock]:
        return self.coord_blocks + self.lift + self.geo_blocks

    def parameters(self):
        return [p for b in self.blocks for p in b.parameters()]

    def __call__(self, coords: np.ndarray, geo: np.ndarray, training: bool = False) -> Tensor:
        """``coords`` (B, N, 3) and ``geo`` (B, V_all) -> local features (B*N, out_dim)."""
        b, n, _ = coords.shape
        k = self.config.k
        nn = knn(coords, k)
        flat = global_index(nn)
        x = Tensor(coords.reshape(b * n, 3))
        p = encode_branch(neighbor_map(x, flat, k), self.coord_blocks, k, training)
        if self.config.geometry == "none":
            return p
        rows = geometry_rows(geo[:, self.feature_index], self.incidence)
        g_map = geometry_branch_input(rows, self.lift, nn, training)
        g = encode_branch(g_map, self.geo_blocks, k, training)
        return fuse_local(p, g)
