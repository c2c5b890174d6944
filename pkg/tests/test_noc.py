import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coinsim.config import ConfigError, HardwareConfig, NocConfig
from coinsim.dataflow import Packet, Trace, build_trace
from coinsim.graph import Graph, canonical_two_ce_graph
from coinsim.noc import (
    NocError, RoutingError, Topology, baseline_analytic, estimate_cycles, num_flits, packet_zero_load, route_xy,
    simulate, trace_stats, volume_stats, zero_load_latency,
)

MESH = NocConfig()


def rand_trace(rng, cfg, n_pkts, max_bits=2048, max_gen=40):
    n = cfg.num_routers
    pkts = []
    for _ in range(n_pkts):
        s = rng.randrange(n)
        d = rng.randrange(n - 1)
        d += d >= s
        pkts.append(Packet(1, s, d, rng.randint(1, max_bits), rng.randint(0, max_gen)))
    return pkts


class TestRouting:
    def test_xy_example(self):
        assert route_xy((1, 2), (3, 0), MESH) == [(2, 2), (3, 2), (3, 1), (3, 0)]

    def test_x_first(self):
        path = route_xy((0, 0), (2, 3), NocConfig(width=4, height=4))
        assert path[:2] == [(1, 0), (2, 0)]

    def test_self(self):
        assert route_xy(5, 5, MESH) == []

    def test_bad_router(self):
        with pytest.raises(RoutingError):
            Topology(MESH).route(0, 16)

    @given(st.integers(1, 8), st.integers(1, 8), st.data())
    def test_hops_are_manhattan(self, w, h, data):
        cfg = NocConfig(width=w, height=h)
        topo = Topology(cfg)
        s = data.draw(st.integers(0, w * h - 1))
        d = data.draw(st.integers(0, w * h - 1))
        (sx, sy), (dx, dy) = topo.coord(s), topo.coord(d)
        assert topo.hop_count(s, d) == abs(sx - dx) + abs(sy - dy)

    @given(st.integers(3, 9), st.integers(3, 9), st.data())
    def test_cmesh_never_longer(self, w, h, data):
        mesh, cm = Topology(NocConfig(width=w, height=h)), Topology(NocConfig(width=w, height=h, topology="cmesh"))
        s = data.draw(st.integers(0, w * h - 1))
        d = data.draw(st.integers(0, w * h - 1))
        route = cm.route(s, d)
        assert len(route) <= mesh.hop_count(s, d)
        assert sum(x.length for x in route) == mesh.hop_count(s, d)
        assert (route[-1].dst if route else s) == d


class TestZeroLoad:
    def test_formula(self):
        # 16 flits over 6 hops, 2-cycle pipeline + 1-cycle link
        assert zero_load_latency(512, 6, MESH) == 6 * 3 + 15 == 33

    def test_single_flit_neighbour(self):
        assert zero_load_latency(1, 1, MESH) == 3

    def test_simulated_match(self):
        p = Packet(1, MESH.width * 0 + 0, 15, 512, 0)
        assert simulate([p], MESH).latencies == [33]

    def test_random_single_packets(self):
        rng = random.Random(1)
        for _ in range(200):
            P, L, C = rng.randint(0, 3), rng.randint(1, 2), rng.randint(1, 2)
            # the buffer must cover the credit round trip for a link to stream at full rate
            cfg = NocConfig(width=rng.randint(2, 6), height=rng.randint(1, 6), input_buffer_flits=rng.randint(P + L + C, 10),
                            router_pipeline_cycles=P, link_cycles=L, credit_delay_cycles=C)
            (p,) = rand_trace(rng, cfg, 1)
            assert simulate([p], cfg).latencies == [packet_zero_load(p, cfg)]

    def test_shallow_buffer_throttles(self):
        cfg = NocConfig(width=4, height=1, input_buffer_flits=1)
        p = Packet(1, 0, 3, 512, 0)
        assert simulate([p], cfg).latencies[0] > packet_zero_load(p, cfg)


class TestContention:
    def test_two_packets_share_output(self):
        # A at (0,1) and B at (2,1) both enter (1,1) and turn south to D=(1,0)
        cfg = NocConfig(width=3, height=2)
        topo = Topology(cfg)
        a = Packet(1, topo.router(0, 1), topo.router(1, 0), 128, 0)
        b = Packet(1, topo.router(2, 1), topo.router(1, 0), 128, 0)
        lat = simulate([a, b], cfg).latencies
        zl = packet_zero_load(a, cfg)
        assert zl == 9
        assert sorted(lat) == [zl, zl + num_flits(128, cfg)]

    def test_serialized_injection(self):
        cfg = NocConfig(width=2, height=1)
        pk = [Packet(1, 0, 1, 64, 0), Packet(1, 0, 1, 64, 0)]
        assert simulate(pk, cfg).latencies == [4, 6]


class TestInvariants:
    @pytest.mark.parametrize("seed", range(20))
    def test_conservation_and_credits(self, seed):
        rng = random.Random(seed)
        cfg = NocConfig(width=rng.randint(2, 5), height=rng.randint(2, 5), input_buffer_flits=rng.randint(1, 6),
                        topology=rng.choice(["mesh", "cmesh"]))
        pkts = rand_trace(rng, cfg, rng.randint(2, 60))
        rep = simulate(pkts, cfg, debug=True)
        flits = sum(num_flits(p.size_bits, cfg) for p in pkts)
        topo = Topology(cfg)
        assert rep.flits_injected == rep.flits_ejected == flits
        assert sum(rep.router_flits) == sum(num_flits(p.size_bits, cfg) * (len(topo.route(p.src, p.dst)) + 1) for p in pkts)
        assert rep.max_buffer_occupancy <= cfg.input_buffer_flits
        for p, lat in zip(pkts, rep.latencies):
            assert lat >= packet_zero_load(p, cfg, topo)

    def test_deterministic(self):
        rng = random.Random(3)
        pkts = rand_trace(rng, MESH, 80)
        assert simulate(pkts, MESH) == simulate(list(pkts), MESH)

    def test_empty(self):
        rep = simulate([], MESH)
        assert rep.total_cycles == 0 and rep.latencies == []

    def test_max_cycles(self):
        cfg = NocConfig(width=2, height=1, max_cycles=5)
        with pytest.raises(NocError):
            simulate([Packet(1, 0, 1, 4096, 0)], cfg)

    def test_bound_is_lower(self):
        rng = random.Random(7)
        for _ in range(20):
            pkts = rand_trace(rng, MESH, 40)
            assert estimate_cycles(pkts, MESH) <= simulate(pkts, MESH).total_cycles

    def test_doubling_sizes_not_faster(self):
        hw = HardwareConfig()
        rng = np.random.default_rng(0)
        vol = rng.integers(0, 4000, (16, 16))
        np.fill_diagonal(vol, 0)
        t1 = simulate(build_trace(1, vol, hw), hw.noc).total_cycles
        t2 = simulate(build_trace(1, 2 * vol, hw), hw.noc).total_cycles
        assert t2 >= t1

    def test_bad_router_in_trace(self):
        with pytest.raises(RoutingError):
            simulate([Packet(1, 0, 99, 32, 0)], MESH)

    def test_config_rejects_zero_buffer(self):
        with pytest.raises(ConfigError):
            NocConfig(input_buffer_flits=0)


class TestStats:
    @given(st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_volume_and_trace_stats_agree(self, seed):
        rng = np.random.default_rng(seed)
        hw = HardwareConfig()
        vol = rng.integers(0, 3000, (16, 16)) * (rng.random((16, 16)) < 0.5)
        np.fill_diagonal(vol, 0)
        tr = build_trace(1, vol, hw)
        a, b = volume_stats(vol, hw.noc), trace_stats(tr, hw.noc)
        assert a["bit_hop_count"] == b["bit_hop_count"] == simulate(tr, hw.noc).bit_hop_count
        assert a["link_bit_lengths"] == b["link_bit_lengths"]
        assert a["bits"] == tr.total_bits

    def test_baseline_canonical(self):
        # 8 nodes on a 3x3 mesh, row-major: edge Manhattan distances sum to 20
        g = canonical_two_ce_graph()
        est = baseline_analytic(g, 64, MESH)
        assert est.mesh_side == 3
        assert est.bit_hop_count == 2 * 64 * 20
        assert est.bits == 2 * 64 * 10

    def test_baseline_empty(self):
        est = baseline_analytic(Graph(4, np.zeros((0, 2)), (2, 2)), 64, MESH)
        assert est.bit_hop_count == 0 and est.est_cycles == 0
