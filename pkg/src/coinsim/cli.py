"""Command-line entry point: ``coinsim <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 infeasible optimisation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ConfigError, HardwareConfig
from .dataflow import BROADCAST, SPARSE, TraceFormatError, generate_traces, read_traces, traces_to_text
from .energy import (ARCHITECTURES, SimReport, compare_architectures, evaluate_coin, mesh_sweep,
                     sweep_argmin)
from .graph import GraphError, PRESETS, load_edge_list, partition_contiguous, preset
from .mapper import MappingError, map_gcn
from .noc import NocError, simulate
from .objective import ObjectiveParams, SizingError, minimize, verify_unimodal

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

CONFIG_KEYS = {"dataset", "edge_list", "nodes", "dims", "seed", "hardware", "policy", "format", "k", "mesh"}


class CliError(Exception):
    def __init__(self, msg: str, code: int = EXIT_CONFIG):
        super().__init__(msg)
        self.code = code


@dataclass
class RunConfig:
    dataset: str | None = None
    edge_list: str | None = None
    nodes: int | None = None
    dims: list[int] | None = None
    seed: int = 0
    hardware: HardwareConfig = field(default_factory=HardwareConfig)
    policy: str | None = None
    format: str = "json"

    def graph(self):
        if self.dataset and self.edge_list:
            raise CliError("give either --dataset or --edge-list, not both")
        if self.dataset:
            try:
                p = preset(self.dataset)
            except GraphError as exc:
                raise CliError(str(exc)) from None
            return p.synthesize(self.seed), p.name
        if self.edge_list:
            if not self.nodes or not self.dims:
                raise CliError("--edge-list needs --nodes and --dims")
            try:
                return load_edge_list(self.edge_list, self.nodes, self.dims), Path(self.edge_list).stem
            except (OSError, GraphError) as exc:
                raise CliError(str(exc)) from None
        raise CliError("no dataset: pass --dataset or --edge-list")


def _parse_mesh(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m:
        raise CliError(f"bad mesh size {text!r}; expected WxH")
    return int(m.group(1)), int(m.group(2))


def mesh_for_k(k: int) -> tuple[int, int]:
    """Most square w x h factorisation of k (w >= h)."""
    h = math.isqrt(k)
    while k % h:
        h -= 1
    return k // h, h


def parse_sizes(text: str) -> list[tuple[int, int]]:
    """``3x3..10x10`` (square range) or a comma list ``4x4,6x5``."""
    if ".." in text:
        a, b = text.split("..", 1)
        (w0, h0), (w1, h1) = _parse_mesh(a), _parse_mesh(b)
        if w0 != h0 or w1 != h1:
            raise CliError("ranges are only supported for square meshes")
        return [(s, s) for s in range(w0, w1 + 1)]
    return [_parse_mesh(s) for s in text.split(",") if s.strip()]


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise CliError("config file must hold a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return data


def build_config(args) -> RunConfig:
    file_cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(name, default=None):
        v = getattr(args, name, None)
        return v if v is not None else file_cfg.get(name, default)

    try:
        hw = HardwareConfig.from_dict(file_cfg.get("hardware", {}))
    except ConfigError as exc:
        raise CliError(str(exc)) from None
    mesh = pick("mesh")
    k = pick("k")
    try:
        if mesh:
            hw = hw.with_mesh(*_parse_mesh(mesh))
        elif k:
            hw = hw.with_mesh(*mesh_for_k(int(k)))
        if getattr(args, "topology", None):
            hw = hw.with_mesh(hw.noc.width, hw.noc.height, args.topology)
        if getattr(args, "adjacency_bits", None):
            hw = replace(hw, adjacency_bits=args.adjacency_bits)
        if getattr(args, "device", None):
            hw = replace(hw, device=args.device)
    except (ConfigError, ValueError) as exc:
        raise CliError(str(exc)) from None
    dims = pick("dims")
    if isinstance(dims, str):
        try:
            dims = [int(x) for x in dims.split(",")]
        except ValueError:
            raise CliError(f"bad --dims {dims!r}") from None
    return RunConfig(
        dataset=pick("dataset"),
        edge_list=pick("edge_list"),
        nodes=pick("nodes"),
        dims=dims,
        seed=int(pick("seed", 0)),
        hardware=hw,
        policy=pick("policy"),
        format=pick("format", "json"),
    )


# -- output ------------------------------------------------------------------

def _stamp(payload: dict, args) -> dict:
    if not getattr(args, "no_timestamp", False):
        payload = {"generated_at": datetime.now(timezone.utc).isoformat(), **payload}
    return payload


def _csv_text(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def emit(text: str, output: str | None) -> None:
    """Write atomically to ``output`` (or stdout); no partial file is left on failure."""
    if not output:
        sys.stdout.write(text)
        return
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, prefix=f".{out.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


# -- commands ----------------------------------------------------------------

def cmd_optimize(args) -> int:
    cfg = build_config(args)
    act_bits = cfg.hardware.activation_bits
    info = {}
    if args.uniform_p1 is not None and args.uniform_p2 is not None and args.nodes_opt is not None:
        N = args.nodes_opt
        A = args.act_sum if args.act_sum is not None else 1.0
        p1, p2 = args.uniform_p1, args.uniform_p2
        info["source"] = "uniform"
    else:
        graph, name = cfg.graph()
        part = partition_contiguous(graph, min(args.estimate_k, graph.num_nodes))
        N = graph.num_nodes
        A = args.act_sum if args.act_sum is not None else sum(graph.feature_dims[1:-1]) * act_bits
        p1 = args.uniform_p1 if args.uniform_p1 is not None else part.uniform_p1
        p2 = args.uniform_p2 if args.uniform_p2 is not None else part.uniform_p2
        info.update(source=name, estimate_k=part.k, num_edges=graph.num_edges)
    try:
        params = ObjectiveParams(N, A, p1, p2, args.k_min, args.k_max)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    try:
        res = minimize(params)
    except SizingError as exc:
        raise CliError(f"optimisation infeasible: {exc}", EXIT_INFEASIBLE) from None
    if cfg.format == "csv":
        rows = [{"k": k, "intra": a, "inter": b, "total": c} for k, a, b, c in res.energy_curve]
        text = f"# k_star={res.k_star}\n" + _csv_text(rows)
    else:
        payload = {
            **info,
            "N": N, "A": A, "p1": p1, "p2": p2, "k_min": args.k_min, "k_max": args.k_max,
            "k_star": res.k_star,
            "k_continuous": res.k_continuous,
            "k_enumerated": res.k_enumerated,
            "energy_at_k_star": res.energy_at_k_star,
            "convex_verified": res.convex_verified,
            "unimodal": verify_unimodal(params),
            "energy_curve": [{"k": k, "intra": a, "inter": b, "total": c} for k, a, b, c in res.energy_curve],
        }
        text = _dump_json(_stamp(payload, args))
    emit(text, args.output)
    return 0


def cmd_map(args) -> int:
    cfg = build_config(args)
    graph, name = cfg.graph()
    try:
        plan = map_gcn(graph, cfg.hardware.num_ces, cfg.hardware)
    except MappingError as exc:
        raise CliError(str(exc)) from None
    d = {"dataset": name, **plan.to_dict()}
    if cfg.format == "csv":
        row = {k: (";".join(map(str, v)) if isinstance(v, list) else v) for k, v in d.items()}
        text = _csv_text([row])
    else:
        text = _dump_json(_stamp(d, args))
    emit(text, args.output)
    return 0


def cmd_trace(args) -> int:
    cfg = build_config(args)
    graph, _ = cfg.graph()
    hw = cfg.hardware
    if hw.num_ces > graph.num_nodes:
        raise CliError(f"k={hw.num_ces} exceeds node count {graph.num_nodes}")
    part = partition_contiguous(graph, hw.num_ces)
    layers = [args.layer] if args.layer else None
    if args.layer and not 1 <= args.layer < graph.num_layers:
        raise CliError(f"layer {args.layer} produces no inter-CE traffic (valid: 1..{graph.num_layers - 1})")
    traces = generate_traces(graph, part, hw, cfg.policy or BROADCAST, layers=layers)
    emit(traces_to_text(traces), args.output)
    return 0


def cmd_simulate(args) -> int:
    cfg = build_config(args)
    hw = cfg.hardware
    if args.trace:
        try:
            traces = read_traces(args.trace)
        except (OSError, TraceFormatError) as exc:
            raise CliError(str(exc)) from None
    else:
        graph, _ = cfg.graph()
        part = partition_contiguous(graph, hw.num_ces)
        traces = generate_traces(graph, part, hw, cfg.policy or BROADCAST)
    rows = []
    for tr in traces:
        try:
            rep = simulate(tr, hw.noc)
        except (NocError, ValueError) as exc:
            raise CliError(str(exc)) from None
        d = rep.to_dict()
        if not args.latencies:
            d.pop("latencies")
        rows.append({"layer": tr.layer, "packets": len(tr), "bits": tr.total_bits, **d})
    if cfg.format == "csv":
        text = _csv_text([{k: v for k, v in r.items() if not isinstance(v, list)} for r in rows])
    else:
        text = _dump_json(_stamp({"noc": asdict(hw.noc), "layers": rows}, args))
    emit(text, args.output)
    return 0


def _report_rows(reports: list[SimReport]) -> list[dict]:
    return [{"architecture": r.architecture, "dataset": r.dataset, "k": r.k, **r.totals()} for r in reports]


def cmd_compare(args) -> int:
    cfg = build_config(args)
    graph, name = cfg.graph()
    archs = [a.strip() for a in args.architectures.split(",") if a.strip()]
    bad = set(archs) - set(ARCHITECTURES)
    if bad:
        raise CliError(f"unknown architectures {sorted(bad)}")
    reports = compare_architectures(graph, cfg.hardware, archs, cfg.policy or SPARSE)
    for r in reports:
        r.dataset = name
    if cfg.format == "csv":
        text = _csv_text(_report_rows(reports))
    else:
        text = _dump_json(_stamp({"reports": [r.to_dict() for r in reports]}, args))
    emit(text, args.output)
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    graph, name = cfg.graph()
    sizes = parse_sizes(args.sizes)
    if any(w * h > graph.num_nodes for w, h in sizes):
        raise CliError("a mesh in the sweep has more routers than the graph has nodes")
    points = mesh_sweep(graph, cfg.hardware, sizes, cfg.policy or SPARSE, simulate_noc=args.simulate)
    best = sweep_argmin(points)
    rows = [{**p.to_dict(), "is_min": p is best} for p in points]
    if cfg.format == "csv":
        keys = ["mesh", "k", "intra_ce_energy", "inter_ce_energy", "comm_energy", "bit_hop_count", "noc_cycles", "is_min"]
        text = _csv_text([{k: r[k] for k in keys} for r in rows])
    else:
        text = _dump_json(_stamp({"dataset": name, "policy": cfg.policy or SPARSE, "min_mesh": best.mesh, "points": rows}, args))
    emit(text, args.output)
    return 0


def cmd_run(args) -> int:
    cfg = build_config(args)
    graph, name = cfg.graph()
    hw = cfg.hardware
    if hw.num_ces > graph.num_nodes:
        raise CliError(f"k={hw.num_ces} exceeds node count {graph.num_nodes}")
    rep = evaluate_coin(graph, hw, cfg.policy or SPARSE, name, simulate_noc=True if args.simulate else None)
    if cfg.format == "csv":
        text = _csv_text(_report_rows([rep]))
    else:
        text = _dump_json(_stamp(rep.to_dict(), args))
    emit(text, args.output)
    return 0


# -- parser ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, dataset: bool = True) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override it")
    if dataset:
        p.add_argument("--dataset", help=f"preset name ({', '.join(PRESETS)})")
        p.add_argument("--edge-list", dest="edge_list", help="edge-list file (0-indexed 'u v' lines)")
        p.add_argument("--graph-nodes", dest="nodes", type=int, help="node count for --edge-list")
        p.add_argument("--dims", help="comma-separated feature widths a(1),...,a(L+1) for --edge-list")
        p.add_argument("--seed", type=int, help="seed for synthetic preset graphs (default 0)")
    p.add_argument("--k", type=int, help="number of CEs (mesh is the most square factorisation)")
    p.add_argument("--mesh", help="explicit mesh size WxH")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--output", "-o", help="output path (default stdout)")
    p.add_argument("--no-timestamp", action="store_true", help="omit generated_at from JSON output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coinsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="optimal CE count from the communication-energy objective")
    _common(p)
    p.add_argument("--nodes", dest="nodes_opt", type=float, help="node count N for a uniform-probability run")
    p.add_argument("--uniform-p1", type=float)
    p.add_argument("--uniform-p2", type=float)
    p.add_argument("--act-sum", type=float, help="activation-bit sum A")
    p.add_argument("--k-min", type=int, default=4)
    p.add_argument("--k-max", type=int, default=100)
    p.add_argument("--estimate-k", type=int, default=16, help="CE count used to estimate p1/p2 from a graph")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("map", help="crossbar/tile/chip allocation")
    _common(p)
    p.add_argument("--adjacency-bits", type=int)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("trace", help="write inter-CE packet traces")
    _common(p)
    p.add_argument("--layer", type=int, help="only this (1-based) layer")
    p.add_argument("--policy", choices=(BROADCAST, SPARSE))
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("simulate", help="cycle-accurate NoC simulation of a trace")
    _common(p)
    p.add_argument("--trace", help="trace file; otherwise generated from the dataset")
    p.add_argument("--policy", choices=(BROADCAST, SPARSE))
    p.add_argument("--topology", choices=("mesh", "cmesh"))
    p.add_argument("--latencies", action="store_true", help="include per-packet latencies")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="COIN vs baseline vs c-mesh")
    _common(p)
    p.add_argument("--architectures", default=",".join(ARCHITECTURES))
    p.add_argument("--policy", choices=(BROADCAST, SPARSE))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="communication energy across mesh sizes")
    _common(p)
    p.add_argument("--sizes", default="3x3..10x10")
    p.add_argument("--policy", choices=(BROADCAST, SPARSE))
    p.add_argument("--simulate", action="store_true", help="also simulate each size for NoC cycles")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="map -> trace -> simulate -> report")
    _common(p)
    p.add_argument("--policy", choices=(BROADCAST, SPARSE))
    p.add_argument("--topology", choices=("mesh", "cmesh"))
    p.add_argument("--device", choices=("rram", "sram"))
    p.add_argument("--simulate", action="store_true", help="force cycle-accurate NoC simulation")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"coinsim {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
