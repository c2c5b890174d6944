"""Crossbar/tile/chip allocation for the adjacency slices and layer weights."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .config import HardwareConfig
from .graph import DatasetPreset, Graph


class MappingError(ValueError):
    pass


def crossbars_for_matrix(rows: int, cols: int, value_bits: int, hw: HardwareConfig) -> int:
    """Crossbars needed to hold a rows x cols matrix with no transformation.

    Each value is bit-sliced over ``ceil(value_bits / cell_bits)`` adjacent columns.
    """
    if rows < 1 or cols < 1:
        raise MappingError("matrix dimensions must be >= 1")
    cells = math.ceil(value_bits / hw.cell_bits)
    d = hw.crossbar_dim
    return math.ceil(rows / d) * math.ceil(cols * cells / d)


@dataclass(frozen=True)
class MappingPlan:
    num_nodes: int
    k: int
    adjacency_slice: tuple[int, int]
    crossbars_adjacency: int  # per CE
    crossbars_weights: tuple[int, ...]  # per layer, per CE (replicated)
    tiles_adjacency: int  # per CE
    tiles_weights: int  # per CE
    chips_required: int
    memory_bytes_on_chip: float  # allocated bytes per chip (average)
    capacity_bytes_per_chip: int
    utilization: float

    @property
    def crossbars_per_ce(self) -> int:
        return self.crossbars_adjacency + sum(self.crossbars_weights)

    @property
    def total_crossbars(self) -> int:
        return self.k * self.crossbars_per_ce

    @property
    def tiles_per_ce_used(self) -> int:
        return self.tiles_adjacency + self.tiles_weights

    @property
    def total_tiles(self) -> int:
        return self.k * self.tiles_per_ce_used

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adjacency_slice"] = list(self.adjacency_slice)
        d["crossbars_weights"] = list(self.crossbars_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MappingPlan":
        d = dict(d)
        d["adjacency_slice"] = tuple(d["adjacency_slice"])
        d["crossbars_weights"] = tuple(d["crossbars_weights"])
        return cls(**d)


def crossbar_bytes(hw: HardwareConfig) -> int:
    return hw.crossbar_dim**2 * hw.cell_bits // 8


def chip_capacity_bytes(hw: HardwareConfig) -> int:
    """Bytes of crossbar storage on one fully populated chip."""
    return hw.ces_per_chip * hw.tiles_per_ce * hw.pes_per_tile * crossbar_bytes(hw)


def memory_footprint(crossbars: int, hw: HardwareConfig) -> int:
    return crossbars * crossbar_bytes(hw)


def chips_for_tiles(total_tiles: int, hw: HardwareConfig) -> int:
    per_chip = hw.tiles_per_ce * hw.ces_per_chip
    return max(1, math.ceil(total_tiles / per_chip))


def map_gcn(source: Graph | DatasetPreset, k: int, hw: HardwareConfig) -> MappingPlan:
    """Allocate adjacency slices (N x ceil(N/k) per CE) and per-CE copies of all layer weights."""
    n = source.num_nodes
    dims = source.feature_dims
    if not 1 <= k <= n:
        raise MappingError(f"k={k} outside [1, {n}]")
    cols = math.ceil(n / k)
    xb_adj = crossbars_for_matrix(n, cols, hw.adjacency_bits, hw)
    xb_w = tuple(crossbars_for_matrix(dims[l], dims[l + 1], hw.weight_bits, hw) for l in range(len(dims) - 1))
    t_adj = math.ceil(xb_adj / hw.pes_per_tile)
    t_w = math.ceil(sum(xb_w) / hw.pes_per_tile)
    total_tiles = k * (t_adj + t_w)
    chips = chips_for_tiles(total_tiles, hw)
    used = memory_footprint(k * (xb_adj + sum(xb_w)), hw)
    cap = chip_capacity_bytes(hw)
    return MappingPlan(
        num_nodes=n,
        k=k,
        adjacency_slice=(n, cols),
        crossbars_adjacency=xb_adj,
        crossbars_weights=xb_w,
        tiles_adjacency=t_adj,
        tiles_weights=t_w,
        chips_required=chips,
        memory_bytes_on_chip=used / chips,
        capacity_bytes_per_chip=cap,
        utilization=used / (chips * cap),
    )
