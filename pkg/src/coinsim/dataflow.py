"""Layer-wise GCN execution, multiplication accounting and inter-CE trace generation."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import HardwareConfig
from .graph import Graph, Partition

FE_FIRST = "fe_first"
AGG_FIRST = "agg_first"
BROADCAST = "broadcast"
SPARSE = "sparse"

TRACE_HEADER = "# coinsim-trace v1 fields: layer src dst size_bits gen_cycle"

_INT64_MAX = np.iinfo(np.int64).max


class DimensionError(ValueError):
    pass


class AccumulatorOverflow(ArithmeticError):
    pass


class TraceFormatError(ValueError):
    pass


def _matmul_checked(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    # worst-case |sum| over the inner dimension must fit in int64
    bound = int(np.abs(a).max(initial=0)) * int(np.abs(b).max(initial=0)) * a.shape[1]
    if bound > _INT64_MAX:
        raise AccumulatorOverflow(f"product {a.shape}x{b.shape} may reach {bound}, exceeding int64")
    return a @ b


def infer(adjacency: np.ndarray, features: np.ndarray, weights: Sequence[np.ndarray], order: str = FE_FIRST) -> np.ndarray:
    """Integer GCN forward pass. ReLU between layers, none after the last."""
    if order not in (FE_FIRST, AGG_FIRST):
        raise ValueError(f"unknown order {order!r}")
    a = np.asarray(adjacency, dtype=np.int64)
    x = np.asarray(features, dtype=np.int64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionError("adjacency must be square")
    if x.shape[0] != n:
        raise DimensionError(f"features have {x.shape[0]} rows, adjacency has {n}")
    for i, w in enumerate(weights):
        w = np.asarray(w, dtype=np.int64)
        if x.shape[1] != w.shape[0]:
            raise DimensionError(f"layer {i + 1}: features width {x.shape[1]} != weight rows {w.shape[0]}")
        if order == FE_FIRST:
            out = _matmul_checked(a, _matmul_checked(x, w))
        else:
            out = _matmul_checked(_matmul_checked(a, x), w)
        x = np.maximum(out, 0) if i < len(weights) - 1 else out
    return x


def mult_count(num_nodes: int, feature_dims: Sequence[int], order: str = FE_FIRST, layers: Iterable[int] | None = None) -> int:
    """Scalar multiplications for dense execution. ``layers`` is 1-based."""
    n = int(num_nodes)
    dims = [int(d) for d in feature_dims]
    idx = range(1, len(dims)) if layers is None else layers
    total = 0
    for l in idx:
        a_in, a_out = dims[l - 1], dims[l]
        if order == FE_FIRST:
            total += n * a_in * a_out + n * n * a_out
        elif order == AGG_FIRST:
            total += n * n * a_in + n * a_in * a_out
        else:
            raise ValueError(f"unknown order {order!r}")
    return total


@dataclass(frozen=True)
class Packet:
    layer: int
    src: int
    dst: int
    size_bits: int
    gen_cycle: int


@dataclass(frozen=True)
class Trace:
    layer: int
    packets: tuple[Packet, ...]

    @property
    def total_bits(self) -> int:
        return sum(p.size_bits for p in self.packets)

    def __len__(self):
        return len(self.packets)


def communicated_layers(graph_or_dims) -> range:
    """1-based layers whose output feeds another layer (and so crosses the NoC)."""
    dims = getattr(graph_or_dims, "feature_dims", graph_or_dims)
    return range(1, len(dims) - 1)


def pair_volumes(partition: Partition, out_width: int, activation_bits: int, policy: str = BROADCAST,
                 per_edge_bits: int | None = None) -> np.ndarray:
    """k x k matrix of bits CE i sends to CE j for one layer (zero diagonal)."""
    k = partition.k
    if policy == BROADCAST:
        sizes = np.asarray(partition.ce_sizes, dtype=np.int64)
        vol = np.repeat((sizes * out_width * activation_bits)[:, None], k, axis=1)
    elif policy == SPARSE:
        v = out_width * activation_bits if per_edge_bits is None else per_edge_bits
        vol = partition.cut_edges.astype(np.int64) * int(v)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    vol = vol.copy()
    np.fill_diagonal(vol, 0)
    return vol


def _packetize(bits: int, max_bits: int) -> list[int]:
    full, rest = divmod(int(bits), max_bits)
    return [max_bits] * full + ([rest] if rest else [])


def build_trace(layer: int, volumes: np.ndarray, hw: HardwareConfig, ce_to_router: Sequence[int] | None = None) -> Trace:
    """Packetise a pair-volume matrix and timestamp it.

    Each source injects back-to-back from cycle 0, cycling over destinations
    (starting at its right-hand neighbour) one packet at a time.
    """
    noc = hw.noc
    k = volumes.shape[0]
    flit = noc.bus_width_bits
    route = list(range(k)) if ce_to_router is None else list(ce_to_router)
    out: list[Packet] = []
    for src in range(k):
        queues = []
        for off in range(1, k):
            dst = (src + off) % k
            sizes = _packetize(int(volumes[src, dst]), noc.max_packet_bits)
            if sizes:
                queues.append((dst, sizes))
        t = 0
        depth = max((len(q[1]) for q in queues), default=0)
        for r in range(depth):
            for dst, sizes in queues:
                if r < len(sizes):
                    out.append(Packet(layer, route[src], route[dst], sizes[r], t))
                    t += math.ceil(sizes[r] / flit)
    out.sort(key=lambda p: (p.gen_cycle, p.src))
    return Trace(layer, tuple(out))


def generate_traces(graph: Graph, partition: Partition, hw: HardwareConfig, policy: str = BROADCAST,
                    per_edge_bits: int | None = None, layers: Iterable[int] | None = None) -> list[Trace]:
    """One inter-CE trace for each layer whose output is consumed by the next layer."""
    if partition.k != hw.num_ces:
        raise ValueError(f"partition has k={partition.k} but the NoC has {hw.num_ces} routers")
    traces = []
    for l in communicated_layers(graph) if layers is None else layers:
        vol = pair_volumes(partition, graph.feature_dims[l], hw.activation_bits, policy, per_edge_bits)
        traces.append(build_trace(l, vol, hw))
    return traces


def write_traces(traces: Sequence[Trace], path_or_buf) -> None:
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", encoding="utf-8") if own else path_or_buf
    try:
        fh.write(TRACE_HEADER + "\n")
        for tr in traces:
            for p in tr.packets:
                fh.write(f"{p.layer} {p.src} {p.dst} {p.size_bits} {p.gen_cycle}\n")
    finally:
        if own:
            fh.close()


def traces_to_text(traces: Sequence[Trace]) -> str:
    buf = io.StringIO()
    write_traces(traces, buf)
    return buf.getvalue()


def read_traces(path_or_buf) -> list[Trace]:
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, encoding="utf-8") if own else path_or_buf
    try:
        lines = fh.read().splitlines()
    finally:
        if own:
            fh.close()
    if not lines or not lines[0].startswith("# coinsim-trace v1"):
        raise TraceFormatError("missing or unsupported trace header")
    by_layer: dict[int, list[Packet]] = {}
    for no, line in enumerate(lines[1:], 2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise TraceFormatError(f"line {no}: expected 5 fields")
        try:
            p = Packet(*(int(x) for x in parts))
        except ValueError:
            raise TraceFormatError(f"line {no}: non-integer field") from None
        if p.size_bits <= 0 or p.gen_cycle < 0 or p.src < 0 or p.dst < 0:
            raise TraceFormatError(f"line {no}: invalid packet {p}")
        by_layer.setdefault(p.layer, []).append(p)
    return [Trace(l, tuple(ps)) for l, ps in sorted(by_layer.items())]
