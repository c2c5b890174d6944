"""Trace-driven, flit-level simulation of the inter-CE mesh.

Wormhole switching, one virtual channel, credit-based flow control,
round-robin output arbitration and dimension-ordered (X then Y) routing.
A flit that arrives in an input buffer at cycle t may cross the switch at
t + router_pipeline_cycles (immediately if it is being ejected) and lands in
the next router's buffer link_cycles later, so an uncontended packet of F
flits over H hops finishes H*(pipeline+link) + F - 1 cycles after injection.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import NocConfig
from .dataflow import Packet, Trace
from .graph import Graph, mesh_side

LOCAL = 0
# direction -> (dx, dy, express)
_DIRS = {
    1: (1, 0, False),
    2: (-1, 0, False),
    3: (0, 1, False),
    4: (0, -1, False),
    5: (1, 0, True),
    6: (-1, 0, True),
    7: (0, 1, True),
    8: (0, -1, True),
}
NUM_PORTS = 9


class NocError(RuntimeError):
    pass


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class Hop:
    src: int
    dst: int
    port: int
    length: int  # in unit link lengths


class Topology:
    """2D mesh; ``cmesh`` adds express links of ``express_span`` along both axes."""

    def __init__(self, cfg: NocConfig):
        self.cfg = cfg
        self.w, self.h = cfg.width, cfg.height
        self.span = cfg.express_span if cfg.topology == "cmesh" else 0
        self.n = self.w * self.h
        self._next: dict[tuple[int, int], int] = {}

    def coord(self, r: int) -> tuple[int, int]:
        return r % self.w, r // self.w

    def router(self, x: int, y: int) -> int:
        return y * self.w + x

    def check(self, r: int) -> None:
        if not 0 <= r < self.n:
            raise RoutingError(f"router {r} outside {self.w}x{self.h} topology")

    def neighbor(self, r: int, port: int) -> int:
        dx, dy, ex = _DIRS[port]
        step = self.span if ex else 1
        x, y = self.coord(r)
        nx, ny = x + dx * step, y + dy * step
        if not (0 <= nx < self.w and 0 <= ny < self.h) or (ex and not self.span):
            raise RoutingError(f"router {r} has no port {port}")
        return self.router(nx, ny)

    def link_length(self, port: int) -> int:
        return self.span if _DIRS[port][2] else 1

    def next_port(self, r: int, dst: int) -> int:
        key = (r, dst)
        p = self._next.get(key)
        if p is None:
            p = self._compute_port(r, dst)
            self._next[key] = p
        return p

    def _compute_port(self, r: int, dst: int) -> int:
        x, y = self.coord(r)
        tx, ty = self.coord(dst)
        if x != tx:
            d = tx - x
            if self.span and abs(d) >= self.span:
                return 5 if d > 0 else 6
            return 1 if d > 0 else 2
        if y != ty:
            d = ty - y
            if self.span and abs(d) >= self.span:
                return 7 if d > 0 else 8
            return 3 if d > 0 else 4
        return LOCAL

    def route(self, src: int, dst: int) -> list[Hop]:
        self.check(src)
        self.check(dst)
        hops = []
        r = src
        while r != dst:
            p = self.next_port(r, dst)
            n = self.neighbor(r, p)
            hops.append(Hop(r, n, p, self.link_length(p)))
            r = n
        return hops

    def hop_count(self, src: int, dst: int) -> int:
        if not self.span:
            (x0, y0), (x1, y1) = self.coord(src), self.coord(dst)
            return abs(x0 - x1) + abs(y0 - y1)
        return len(self.route(src, dst))

    def hop_matrix(self) -> np.ndarray:
        """Hop counts between every router pair."""
        return np.array([[self.hop_count(s, d) for d in range(self.n)] for s in range(self.n)], dtype=np.int64)


def route_xy(src: tuple[int, int] | int, dst: tuple[int, int] | int, cfg: NocConfig) -> list[tuple[int, int]]:
    """Coordinates visited after ``src`` on the way to ``dst``."""
    topo = Topology(cfg)
    s = topo.router(*src) if isinstance(src, tuple) else src
    d = topo.router(*dst) if isinstance(dst, tuple) else dst
    return [topo.coord(h.dst) for h in topo.route(s, d)]


def num_flits(size_bits: int, cfg: NocConfig) -> int:
    return max(1, math.ceil(size_bits / cfg.bus_width_bits))


def zero_load_latency(size_bits: int, hops: int, cfg: NocConfig) -> int:
    return hops * (cfg.router_pipeline_cycles + cfg.link_cycles) + num_flits(size_bits, cfg) - 1


def packet_zero_load(p: Packet, cfg: NocConfig, topo: Topology | None = None) -> int:
    topo = topo or Topology(cfg)
    return zero_load_latency(p.size_bits, topo.hop_count(p.src, p.dst), cfg)


@dataclass
class NocReport:
    total_cycles: int
    latencies: list[int]
    bit_hop_count: int
    router_flits: list[int]
    flits_injected: int
    flits_ejected: int
    max_buffer_occupancy: int = 0

    @property
    def avg_latency(self) -> float:
        return float(np.mean(self.latencies)) if self.latencies else 0.0

    @property
    def max_latency(self) -> int:
        return max(self.latencies, default=0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["avg_latency"] = self.avg_latency
        d["max_latency"] = self.max_latency
        return d


def _packets(trace: Trace | Sequence[Packet]) -> list[Packet]:
    return list(trace.packets) if isinstance(trace, Trace) else list(trace)


def simulate(trace: Trace | Sequence[Packet], cfg: NocConfig, debug: bool = False) -> NocReport:
    """Cycle-accurate run of ``trace`` until every flit is ejected."""
    pkts = _packets(trace)
    if cfg.input_buffer_flits < 1:
        raise NocError("input buffer must hold at least one flit")
    topo = Topology(cfg)
    n = topo.n
    for p in pkts:
        topo.check(p.src)
        topo.check(p.dst)
    if not pkts:
        return NocReport(0, [], 0, [0] * n, 0, 0)

    P = cfg.router_pipeline_cycles
    L = cfg.link_cycles
    C = cfg.credit_delay_cycles
    cap = cfg.input_buffer_flits

    nflits = [num_flits(p.size_bits, cfg) for p in pkts]
    dsts = [p.dst for p in pkts]
    gens = [p.gen_cycle for p in pkts]

    # per-source injection queues, stable in trace order
    order = sorted(range(len(pkts)), key=lambda i: (gens[i], i))
    inj_q: list[deque] = [deque() for _ in range(n)]
    for i in order:
        inj_q[pkts[i].src].append(i)
    inj_sent = [0] * n  # flits of the current head packet already injected

    # topology tables
    nbr = [[-1] * NUM_PORTS for _ in range(n)]
    for r in range(n):
        for port in _DIRS:
            try:
                nbr[r][port] = topo.neighbor(r, port)
            except RoutingError:
                pass
    # input buffers: buf[r][port] holds [pkt, flit_idx, arrival]
    buf = [[deque() for _ in range(NUM_PORTS)] for _ in range(n)]
    credits = [[cap] * NUM_PORTS for _ in range(n)]
    owner = [[-1] * NUM_PORTS for _ in range(n)]  # output -> input port holding it
    rr = [[0] * NUM_PORTS for _ in range(n)]

    arrivals: dict[int, list] = {}
    credit_ret: dict[int, list] = {}
    router_flits = [0] * n
    latencies = [0] * len(pkts)
    done = 0
    injected = ejected = 0
    max_occ = 0
    bit_hops = 0
    for p in pkts:
        bit_hops += p.size_bits * topo.hop_count(p.src, p.dst)

    active = set()  # routers with non-empty buffers
    t = 0
    total = len(pkts)
    while done < total:
        if t > cfg.max_cycles:
            raise NocError(f"trace did not drain within {cfg.max_cycles} cycles ({done}/{total} packets delivered)")

        # skip idle stretches
        if not active and not arrivals and not credit_ret:
            nxt = min((gens[q[0]] for q in inj_q if q), default=None)
            if nxt is not None and nxt > t:
                t = nxt

        for r, port, flit in arrivals.pop(t, ()):
            b = buf[r][port]
            b.append(flit)
            if len(b) > cap:
                raise NocError(f"buffer overflow at router {r} port {port} (credit protocol violated)")
            if len(b) > max_occ:
                max_occ = len(b)
            active.add(r)
        for r, port in credit_ret.pop(t, ()):
            credits[r][port] += 1
            if debug and credits[r][port] > cap:
                raise NocError(f"credit count above buffer size at router {r} port {port}")

        for r in range(n):
            q = inj_q[r]
            if q and gens[q[0]] <= t and len(buf[r][LOCAL]) < cap:
                i = q[0]
                buf[r][LOCAL].append([i, inj_sent[r], t])
                injected += 1
                active.add(r)
                inj_sent[r] += 1
                if inj_sent[r] == nflits[i]:
                    q.popleft()
                    inj_sent[r] = 0
                if len(buf[r][LOCAL]) > max_occ:
                    max_occ = len(buf[r][LOCAL])

        for r in sorted(active):
            rbuf = buf[r]
            # requests: output port -> list of input ports whose head flit is ready
            requests: dict[int, list[int]] = {}
            for ip in range(NUM_PORTS):
                b = rbuf[ip]
                if not b:
                    continue
                pkt, fi, arr = b[0]
                op = topo.next_port(r, dsts[pkt])
                ready = arr if op == LOCAL else arr + P
                if ready <= t:
                    requests.setdefault(op, []).append(ip)
            for op, ips in requests.items():
                own = owner[r][op]
                if own >= 0:
                    if own not in ips:
                        continue
                    ip = own
                else:
                    heads = [i for i in ips if rbuf[i][0][1] == 0]
                    if not heads:
                        continue
                    start = rr[r][op]
                    ip = min(heads, key=lambda i: (i - start) % NUM_PORTS)
                if op != LOCAL and credits[r][op] <= 0:
                    continue
                flit = rbuf[ip].popleft()
                pkt, fi, _ = flit
                router_flits[r] += 1
                if ip != LOCAL:
                    # return a credit to whoever feeds this input
                    up = nbr[r][_opposite(ip)]
                    credit_ret.setdefault(t + C, []).append((up, ip))
                tail = fi == nflits[pkt] - 1
                if fi == 0:
                    owner[r][op] = ip
                    rr[r][op] = (ip + 1) % NUM_PORTS
                if tail:
                    owner[r][op] = -1
                if op == LOCAL:
                    ejected += 1
                    if tail:
                        latencies[pkt] = t - gens[pkt]
                        done += 1
                else:
                    credits[r][op] -= 1
                    flit[2] = t + L
                    arrivals.setdefault(t + L, []).append((nbr[r][op], op, flit))
            if not any(rbuf):
                active.discard(r)
        t += 1

    last = max(g + lat for g, lat in zip(gens, latencies))
    return NocReport(last + 1, latencies, bit_hops, router_flits, injected, ejected, max_occ)


def _opposite(port: int) -> int:
    # input port index equals the output direction used upstream; the feeder sits opposite
    return {1: 2, 2: 1, 3: 4, 4: 3, 5: 6, 6: 5, 7: 8, 8: 7}[port]


def trace_stats(trace: Trace | Sequence[Packet], cfg: NocConfig) -> dict:
    """Routing-only statistics: bit-hops, link and router traversals (no timing)."""
    topo = Topology(cfg)
    bit_hops = 0
    link_bits = 0.0
    router_bits = 0
    flits = 0
    for p in _packets(trace):
        hops = topo.route(p.src, p.dst) if topo.span else None
        if hops is None:
            h = topo.hop_count(p.src, p.dst)
            length = h
        else:
            h = len(hops)
            length = sum(x.length for x in hops)
        bit_hops += p.size_bits * h
        link_bits += p.size_bits * length
        router_bits += p.size_bits * (h + 1)
        flits += num_flits(p.size_bits, cfg)
    return {"bit_hop_count": bit_hops, "link_bit_lengths": link_bits, "router_bits": router_bits, "flits": flits}


def volume_stats(volumes: np.ndarray, cfg: NocConfig) -> dict:
    """Same as :func:`trace_stats` but straight from a router-indexed pair-volume matrix."""
    topo = Topology(cfg)
    k = volumes.shape[0]
    hops = np.zeros((k, k), dtype=np.int64)
    length = np.zeros((k, k), dtype=np.int64)
    for s in range(k):
        for d in range(k):
            if s != d and volumes[s, d]:
                route = topo.route(s, d)
                hops[s, d] = len(route)
                length[s, d] = sum(x.length for x in route)
    v = volumes.astype(np.int64)
    return {
        "bit_hop_count": int((v * hops).sum()),
        "link_bit_lengths": float((v * length).sum()),
        "router_bits": int((v * (hops + 1) * (v > 0)).sum()),
        "bits": int(v.sum()),
    }


def estimate_cycles(trace: Trace | Sequence[Packet], cfg: NocConfig) -> int:
    """Lower bound on drain time: max of per-packet zero-load finish, per-link load
    and per-port injection/ejection load (all in flits at one flit per cycle)."""
    pkts = _packets(trace)
    if not pkts:
        return 0
    topo = Topology(cfg)
    link_load: dict[tuple[int, int], int] = {}
    inj = [0] * topo.n
    ej = [0] * topo.n
    finish = 0
    for p in pkts:
        f = num_flits(p.size_bits, cfg)
        route = topo.route(p.src, p.dst)
        for hop in route:
            link_load[(hop.src, hop.port)] = link_load.get((hop.src, hop.port), 0) + f
        inj[p.src] += f
        ej[p.dst] += f
        finish = max(finish, p.gen_cycle + zero_load_latency(p.size_bits, len(route), cfg))
    return max(finish + 1, max(link_load.values(), default=0), max(inj), max(ej))


@dataclass
class BaselineEstimate:
    mesh_side: int
    bit_hop_count: int
    bits: int
    router_bits: int
    est_cycles: int

    def to_dict(self) -> dict:
        return asdict(self)


def node_coords(num_nodes: int) -> tuple[int, np.ndarray, np.ndarray]:
    side = mesh_side(num_nodes)
    idx = np.arange(num_nodes, dtype=np.int64)
    return side, idx % side, idx // side


def baseline_analytic(graph: Graph, per_edge_bits: int, cfg: NocConfig) -> BaselineEstimate:
    """One router per graph node on a ceil(sqrt N)-wide mesh, row-major placement.

    Every edge carries ``per_edge_bits`` each way along its X-Y path.
    ``est_cycles`` is a link-capacity lower bound: the busier of the vertical
    and horizontal bisections, the busiest node port, and the longest path.
    """
    side, xs, ys = node_coords(graph.num_nodes)
    if graph.num_edges == 0:
        return BaselineEstimate(side, 0, 0, 0, 0)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    dist = np.abs(xs[u] - xs[v]) + np.abs(ys[u] - ys[v])
    bits = int(per_edge_bits)
    bit_hop = int(2 * bits * dist.sum())
    total_bits = 2 * bits * graph.num_edges
    router_bits = int(2 * bits * (dist + 1).sum())

    flits_per_msg = math.ceil(bits / cfg.bus_width_bits)
    half = side // 2
    # each cut edge crosses once in each direction; cut capacity is `side` links per direction
    x_cut = int(((xs[u] < half) != (xs[v] < half)).sum())
    y_cut = int(((ys[u] < half) != (ys[v] < half)).sum())
    bisection = math.ceil(max(x_cut, y_cut) * flits_per_msg / side)
    degree = np.bincount(np.concatenate([u, v]), minlength=graph.num_nodes)
    port = int(degree.max()) * flits_per_msg
    path = int(dist.max()) * (cfg.router_pipeline_cycles + cfg.link_cycles) + flits_per_msg
    return BaselineEstimate(side, bit_hop, total_bits, router_bits, max(bisection, port, path))
