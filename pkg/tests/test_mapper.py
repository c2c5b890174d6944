import math

import pytest
from hypothesis import given, settings, strategies as st

from coinsim.config import ConfigError, HardwareConfig
from coinsim.graph import preset
from coinsim.mapper import (
    MappingError, MappingPlan, chip_capacity_bytes, chips_for_tiles, crossbar_bytes, crossbars_for_matrix, map_gcn,
)

HW = HardwareConfig()


def brute_crossbars(rows, cols, bits, hw):
    # place the bit-sliced matrix cell by cell and count touched crossbars
    cells = -(-bits // hw.cell_bits)
    d = hw.crossbar_dim
    return len({(r // d, c // d) for r in range(0, rows, 1) for c in range(0, cols * cells, 1)})


class TestCrossbars:
    def test_cora_layer1_weights(self):
        # 1433 rows span 12 crossbars; 16 weights x 2 cells = 32 columns fit in one
        assert crossbars_for_matrix(1433, 16, 4, HW) == 12

    def test_single_value(self):
        assert crossbars_for_matrix(1, 1, 2, HW) == 1

    def test_exact_fit(self):
        assert crossbars_for_matrix(128, 64, 4, HW) == 1
        assert crossbars_for_matrix(129, 64, 4, HW) == 2
        assert crossbars_for_matrix(128, 65, 4, HW) == 2

    def test_rejects_empty(self):
        with pytest.raises(MappingError):
            crossbars_for_matrix(0, 4, 4, HW)

    @given(st.integers(1, 400), st.integers(1, 200), st.integers(1, 8))
    @settings(max_examples=60, deadline=None)
    def test_matches_cell_placement(self, rows, cols, bits):
        hw = HardwareConfig(crossbar_dim=16, cell_bits=1, weight_bits=8)
        assert crossbars_for_matrix(rows, cols, bits, hw) == brute_crossbars(rows, cols, bits, hw)

    @given(st.integers(1, 5000), st.integers(1, 500), st.integers(1, 8))
    def test_covers_cells(self, rows, cols, bits):
        cells = rows * cols * math.ceil(bits / HW.cell_bits)
        assert crossbars_for_matrix(rows, cols, bits, HW) * HW.crossbar_dim**2 >= cells


class TestCapacity:
    def test_default_chip_is_30_mib(self):
        assert chip_capacity_bytes(HW) == 31_457_280 == 30 * 2**20

    def test_crossbar_bytes(self):
        assert crossbar_bytes(HW) == 4096

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            HardwareConfig(crossbar_dim=100)
        with pytest.raises(ConfigError):
            HardwareConfig(cell_bits=8, weight_bits=4)


class TestMapGcn:
    def test_cora(self):
        plan = map_gcn(preset("cora"), 16, HW)
        assert plan.crossbars_weights == (12, 1)
        assert plan.tiles_weights == 1
        assert plan.adjacency_slice == (2708, 170)
        assert plan.crossbars_adjacency == 22 * 2
        assert plan.chips_required == 1

    @pytest.mark.parametrize("name", ["cora", "citeseer"])
    def test_fits_one_chip(self, name):
        assert map_gcn(preset(name), 16, HW).chips_required == 1

    @pytest.mark.parametrize("name", ["pubmed", "extended-cora", "nell"])
    def test_larger_need_more_chips(self, name):
        assert map_gcn(preset(name), 16, HW).chips_required > 1

    def test_k_bounds(self):
        with pytest.raises(MappingError):
            map_gcn(preset("cora"), 0, HW)
        with pytest.raises(MappingError):
            map_gcn(preset("cora"), 2709, HW)

    def test_round_trip(self):
        plan = map_gcn(preset("pubmed"), 16, HW)
        assert MappingPlan.from_dict(plan.to_dict()) == plan

    @pytest.mark.parametrize("name", ["cora", "pubmed", "nell"])
    def test_chips_minimal(self, name):
        plan = map_gcn(preset(name), 16, HW)
        per_chip = HW.tiles_per_ce * HW.ces_per_chip
        assert plan.total_tiles <= plan.chips_required * per_chip
        if plan.chips_required > 1:
            assert plan.total_tiles > (plan.chips_required - 1) * per_chip

    def test_utilization_bounds(self):
        for name in ("cora", "citeseer", "pubmed", "extended-cora", "nell"):
            u = map_gcn(preset(name), 16, HW).utilization
            assert 0 < u <= 1

    @given(st.integers(50, 3000), st.integers(1, 16), st.integers(2, 600), st.integers(2, 40))
    @settings(max_examples=80, deadline=None)
    def test_monotone_in_nodes(self, n, k, f, c):
        from coinsim.graph import DatasetPreset

        a = map_gcn(DatasetPreset("a", n, 0, f, c), k, HW)
        b = map_gcn(DatasetPreset("b", 2 * n, 0, f, c), k, HW)
        assert b.total_crossbars >= a.total_crossbars
        assert b.chips_required >= a.chips_required

    @given(st.integers(50, 3000), st.integers(1, 50))
    @settings(max_examples=40, deadline=None)
    def test_adjacency_conserved(self, n, k):
        from coinsim.graph import DatasetPreset

        k = min(k, n)
        plan = map_gcn(DatasetPreset("a", n, 0, 8, 2), k, HW)
        rows, cols = plan.adjacency_slice
        assert rows == n and cols * k >= n and (cols - 1) * k < n
        assert plan.crossbars_adjacency * HW.crossbar_dim**2 * HW.cell_bits >= n * cols * HW.adjacency_bits

    def test_chips_for_tiles(self):
        assert chips_for_tiles(0, HW) == 1
        assert chips_for_tiles(480, HW) == 1
        assert chips_for_tiles(481, HW) == 2
