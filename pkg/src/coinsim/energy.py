"""Energy, latency and EDP reports; architecture comparison and mesh-size sweeps."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .config import HardwareConfig
from .dataflow import BROADCAST, SPARSE, build_trace, communicated_layers, pair_volumes
from .graph import DatasetPreset, Graph, Partition, partition_contiguous
from .mapper import MappingPlan, map_gcn
from .noc import baseline_analytic, estimate_cycles, simulate, volume_stats

COIN = "coin"
CMESH = "cmesh"
BASELINE = "baseline"
ARCHITECTURES = (COIN, BASELINE, CMESH)

DEFAULT_SIM_FLIT_CAP = 200_000


def sim_threads() -> int:
    try:
        return max(1, int(os.environ.get("COIN_SIM_THREADS", "1")))
    except ValueError:
        return 1


# -- compute -----------------------------------------------------------------

def crossbar_activations(plan: MappingPlan, feature_dims: Sequence[int], hw: HardwareConfig) -> list[int]:
    """Crossbar read events per layer under bit-serial inputs.

    Feature extraction presents every node's feature row to the layer's weight
    crossbars; aggregation presents each of the a(l+1) columns of Z to every
    CE's adjacency crossbars. Each presentation costs ``activation_bits`` reads.
    """
    out = []
    for l in range(1, len(feature_dims)):
        fe = plan.num_nodes * plan.crossbars_weights[l - 1]
        agg = plan.k * feature_dims[l] * plan.crossbars_adjacency
        out.append((fe + agg) * hw.activation_bits)
    return out


def compute_energy(activations: int | Iterable[int], hw: HardwareConfig) -> float:
    n = activations if isinstance(activations, (int, np.integer)) else sum(activations)
    e = n * hw.energy.e_crossbar_read
    return e * hw.energy.sram_rram_ratio if hw.device == "sram" else e


def compute_cycles(nodes_per_ce: int, out_width: int, hw: HardwareConfig) -> int:
    """Bit-serial cycles for one layer in one CE (tiles operate in parallel)."""
    return (nodes_per_ce + out_width) * hw.activation_bits * hw.crossbar_read_cycles


# -- communication -----------------------------------------------------------

def intra_energy(intra_bits: float, num_nodes: int, k: int, hw: HardwareConfig) -> float:
    return intra_bits * hw.energy.e_bit_intra_base * math.sqrt(num_nodes / k)


def inter_energy(link_bit_lengths: float, router_bits: float, hw: HardwareConfig, router_weight: float | None = None) -> float:
    if router_weight is None:
        router_weight = hw.noc.cmesh_router_energy_weight if hw.noc.topology == "cmesh" else 1.0
    c = hw.energy
    return link_bit_lengths * c.e_bit_link + router_bits * c.e_bit_router * router_weight


def comm_energy(intra_bits: float, stats: dict, num_nodes: int, k: int, hw: HardwareConfig) -> tuple[float, float]:
    """(intra_J, inter_J) from an intra-CE volume and routed inter-CE statistics."""
    return (
        intra_energy(intra_bits, num_nodes, k, hw),
        inter_energy(stats["link_bit_lengths"], stats["router_bits"], hw),
    )


# -- reports -----------------------------------------------------------------

@dataclass
class LayerReport:
    layer: int
    compute_energy: float
    intra_ce_energy: float
    inter_ce_energy: float
    compute_cycles: int
    noc_cycles: int
    intra_bits: int = 0
    inter_bits: int = 0
    bit_hop_count: int = 0
    latency_method: str = "none"

    @property
    def energy(self) -> float:
        return self.compute_energy + self.intra_ce_energy + self.inter_ce_energy

    @property
    def latency_cycles(self) -> int:
        return self.compute_cycles + self.noc_cycles


@dataclass
class SimReport:
    architecture: str
    dataset: str
    num_nodes: int
    k: int
    clock_hz: float
    layers: list[LayerReport]
    config: dict = field(default_factory=dict)
    mapping: dict | None = None

    @property
    def compute_energy(self) -> float:
        return sum(l.compute_energy for l in self.layers)

    @property
    def intra_ce_energy(self) -> float:
        return sum(l.intra_ce_energy for l in self.layers)

    @property
    def inter_ce_energy(self) -> float:
        return sum(l.inter_ce_energy for l in self.layers)

    @property
    def comm_energy(self) -> float:
        return self.intra_ce_energy + self.inter_ce_energy

    @property
    def total_energy(self) -> float:
        return self.compute_energy + self.intra_ce_energy + self.inter_ce_energy

    @property
    def latency_cycles(self) -> int:
        return sum(l.latency_cycles for l in self.layers)

    @property
    def latency_seconds(self) -> float:
        return self.latency_cycles / self.clock_hz

    @property
    def edp(self) -> float:
        return self.total_energy * self.latency_seconds

    @property
    def comm_share(self) -> float:
        t = self.total_energy
        return self.comm_energy / t if t > 0 else 0.0

    @property
    def bit_hop_count(self) -> int:
        return sum(l.bit_hop_count for l in self.layers)

    @property
    def comm_edp(self) -> float:
        noc = sum(l.noc_cycles for l in self.layers) / self.clock_hz
        return self.comm_energy * noc

    def totals(self) -> dict:
        return {
            "compute_energy": self.compute_energy,
            "intra_ce_energy": self.intra_ce_energy,
            "inter_ce_energy": self.inter_ce_energy,
            "comm_energy": self.comm_energy,
            "total_energy": self.total_energy,
            "comm_share": self.comm_share,
            "latency_cycles": self.latency_cycles,
            "latency_seconds": self.latency_seconds,
            "edp": self.edp,
            "bit_hop_count": self.bit_hop_count,
        }

    def to_dict(self) -> dict:
        layers = []
        for l in self.layers:
            d = asdict(l)
            d.update(
                energy=l.energy,
                latency_cycles=l.latency_cycles,
                latency_seconds=l.latency_cycles / self.clock_hz,
                edp=l.energy * l.latency_cycles / self.clock_hz,
            )
            layers.append(d)
        return {
            "architecture": self.architecture,
            "dataset": self.dataset,
            "num_nodes": self.num_nodes,
            "k": self.k,
            "clock_hz": self.clock_hz,
            "layers": layers,
            "totals": self.totals(),
            "config": self.config,
            "mapping": self.mapping,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        names = {f.name for f in fields(LayerReport)}
        layers = [LayerReport(**{k: v for k, v in l.items() if k in names}) for l in d["layers"]]
        return cls(d["architecture"], d["dataset"], d["num_nodes"], d["k"], d["clock_hz"], layers,
                   d.get("config") or {}, d.get("mapping"))

    def __eq__(self, other):
        if not isinstance(other, SimReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


# -- pipelines ---------------------------------------------------------------

def _name(graph: Graph, name: str | None) -> str:
    return name or f"graph-N{graph.num_nodes}"


def _intra_bits(partition: Partition, per_edge_bits: int) -> int:
    return int(2 * partition.intra_edges.sum() * per_edge_bits)


def evaluate_coin(graph: Graph, hw: HardwareConfig, policy: str = SPARSE, dataset: str | None = None,
                  simulate_noc: bool | None = None, sim_flit_cap: int = DEFAULT_SIM_FLIT_CAP,
                  partition: Partition | None = None) -> SimReport:
    """Map, partition, generate traffic and report for the CE array on ``hw.noc``.

    NoC latency comes from cycle-accurate simulation when the layer trace has
    at most ``sim_flit_cap`` flits (or ``simulate_noc`` is True) and from the
    analytic lower bound otherwise.
    """
    k = hw.num_ces
    part = partition or partition_contiguous(graph, k)
    plan = map_gcn(graph, k, hw)
    acts = crossbar_activations(plan, graph.feature_dims, hw)
    nodes_per_ce = max(part.ce_sizes)
    comm_layers = set(communicated_layers(graph))
    layers = []
    for l in range(1, graph.num_layers + 1):
        width = graph.feature_dims[l]
        rep = LayerReport(l, compute_energy(acts[l - 1], hw), 0.0, 0.0, compute_cycles(nodes_per_ce, width, hw), 0)
        if l in comm_layers:
            v = width * hw.activation_bits
            vol = pair_volumes(part, width, hw.activation_bits, policy)
            stats = volume_stats(vol, hw.noc)
            rep.intra_bits = _intra_bits(part, v)
            rep.inter_bits = stats["bits"]
            rep.bit_hop_count = stats["bit_hop_count"]
            rep.intra_ce_energy, rep.inter_ce_energy = comm_energy(rep.intra_bits, stats, graph.num_nodes, k, hw)
            trace = build_trace(l, vol, hw)
            flits = sum(-(-p.size_bits // hw.noc.bus_width_bits) for p in trace.packets)
            do_sim = simulate_noc if simulate_noc is not None else flits <= sim_flit_cap
            if do_sim:
                rep.noc_cycles = simulate(trace, hw.noc).total_cycles
                rep.latency_method = "simulated"
            else:
                rep.noc_cycles = estimate_cycles(trace, hw.noc)
                rep.latency_method = "bound"
        layers.append(rep)
    arch = CMESH if hw.noc.topology == "cmesh" else COIN
    return SimReport(arch, _name(graph, dataset), graph.num_nodes, k, hw.clock_hz, layers,
                     {"hardware": hw.to_dict(), "policy": policy}, plan.to_dict())


def evaluate_baseline(graph: Graph, hw: HardwareConfig, compute_per_layer: Sequence[float], dataset: str | None = None) -> SimReport:
    """One CE and one router per graph node; interconnect evaluated analytically.

    Compute energy is taken from the caller (the same GCN workload), so the
    architectures differ only in their interconnect.
    """
    layers = []
    comm_layers = set(communicated_layers(graph))
    for l in range(1, graph.num_layers + 1):
        width = graph.feature_dims[l]
        rep = LayerReport(l, float(compute_per_layer[l - 1]), 0.0, 0.0, compute_cycles(1, width, hw), 0)
        if l in comm_layers:
            est = baseline_analytic(graph, width * hw.activation_bits, hw.noc)
            rep.inter_bits = est.bits
            rep.bit_hop_count = est.bit_hop_count
            rep.inter_ce_energy = inter_energy(est.bit_hop_count, est.router_bits, hw, router_weight=1.0)
            rep.noc_cycles = est.est_cycles
            rep.latency_method = "bound"
        layers.append(rep)
    return SimReport(BASELINE, _name(graph, dataset), graph.num_nodes, graph.num_nodes, hw.clock_hz, layers,
                     {"hardware": hw.to_dict()}, None)


def resolve_graph(source: Graph | DatasetPreset, seed: int = 0) -> tuple[Graph, str]:
    if isinstance(source, DatasetPreset):
        return source.synthesize(seed), source.name
    return source, _name(source, None)


def compare_architectures(source: Graph | DatasetPreset, hw: HardwareConfig, architectures: Sequence[str] = ARCHITECTURES,
                          policy: str = SPARSE, seed: int = 0, sim_flit_cap: int = DEFAULT_SIM_FLIT_CAP) -> list[SimReport]:
    unknown = set(architectures) - set(ARCHITECTURES)
    if unknown:
        raise ValueError(f"unknown architectures {sorted(unknown)}")
    graph, name = resolve_graph(source, seed)
    mesh_hw = hw.with_mesh(hw.noc.width, hw.noc.height, "mesh")
    coin = evaluate_coin(graph, mesh_hw, policy, name, sim_flit_cap=sim_flit_cap)
    out = []
    for arch in architectures:
        if arch == COIN:
            out.append(coin)
        elif arch == CMESH:
            cm_hw = hw.with_mesh(hw.noc.width, hw.noc.height, "cmesh")
            out.append(evaluate_coin(graph, cm_hw, policy, name, sim_flit_cap=sim_flit_cap))
        else:
            out.append(evaluate_baseline(graph, hw, [l.compute_energy for l in coin.layers], name))
    return out


@dataclass
class SweepPoint:
    width: int
    height: int
    k: int
    intra_ce_energy: float
    inter_ce_energy: float
    bit_hop_count: int
    noc_cycles: int | None = None

    @property
    def mesh(self) -> str:
        return f"{self.width}x{self.height}"

    @property
    def comm_energy(self) -> float:
        return self.intra_ce_energy + self.inter_ce_energy

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mesh"] = self.mesh
        d["comm_energy"] = self.comm_energy
        return d


DEFAULT_SWEEP = tuple((s, s) for s in range(3, 11))


def _sweep_point(graph: Graph, hw: HardwareConfig, w: int, h: int, policy: str, simulate_noc: bool) -> SweepPoint:
    shw = hw.with_mesh(w, h)
    k = w * h
    part = partition_contiguous(graph, k)
    intra = inter = 0.0
    bit_hops = 0
    cycles = 0
    for l in communicated_layers(graph):
        width = graph.feature_dims[l]
        vol = pair_volumes(part, width, shw.activation_bits, policy)
        stats = volume_stats(vol, shw.noc)
        i_j, e_j = comm_energy(_intra_bits(part, width * shw.activation_bits), stats, graph.num_nodes, k, shw)
        intra += i_j
        inter += e_j
        bit_hops += stats["bit_hop_count"]
        if simulate_noc:
            cycles += simulate(build_trace(l, vol, shw), shw.noc).total_cycles
    return SweepPoint(w, h, k, intra, inter, bit_hops, cycles if simulate_noc else None)


def mesh_sweep(source: Graph | DatasetPreset, hw: HardwareConfig, sizes: Sequence[tuple[int, int]] = DEFAULT_SWEEP,
               policy: str = SPARSE, seed: int = 0, simulate_noc: bool = False) -> list[SweepPoint]:
    """Communication energy (intra + inter) for each mesh size, k = width * height."""
    graph, _ = resolve_graph(source, seed)
    with ThreadPoolExecutor(max_workers=sim_threads()) as ex:
        return list(ex.map(lambda s: _sweep_point(graph, hw, s[0], s[1], policy, simulate_noc), sizes))


def sweep_argmin(points: Sequence[SweepPoint]) -> SweepPoint:
    return min(points, key=lambda p: (p.comm_energy, p.k))
