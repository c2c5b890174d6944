"""Hardware, interconnect and energy configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NocConfig:
    """Inter-CE network parameters. ``topology`` is ``"mesh"`` or ``"cmesh"``."""

    width: int = 4
    height: int = 4
    topology: str = "mesh"
    bus_width_bits: int = 32
    router_ports: int = 5
    router_pipeline_cycles: int = 2
    link_cycles: int = 1
    credit_delay_cycles: int = 1
    input_buffer_flits: int = 8
    max_packet_bits: int = 512
    # c-mesh only
    express_span: int = 2
    cmesh_router_energy_weight: float = 2.0
    max_cycles: int = 50_000_000

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("mesh dimensions must be positive")
        if self.topology not in ("mesh", "cmesh"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.bus_width_bits <= 0:
            raise ConfigError("bus_width_bits must be positive")
        if self.input_buffer_flits < 1:
            raise ConfigError("input_buffer_flits must be >= 1")
        if self.router_pipeline_cycles < 0 or self.link_cycles < 1 or self.credit_delay_cycles < 1:
            raise ConfigError("pipeline >= 0, link and credit delays >= 1 cycle")
        if self.max_packet_bits < self.bus_width_bits:
            raise ConfigError("max_packet_bits must cover at least one flit")
        if self.topology == "cmesh" and self.express_span < 2:
            raise ConfigError("express_span must be >= 2")

    @property
    def num_routers(self) -> int:
        return self.width * self.height

    def resized(self, width: int, height: int) -> "NocConfig":
        return replace(self, width=width, height=height)


@dataclass(frozen=True)
class EnergyConstants:
    """Per-event energies in joules.

    Order-of-magnitude defaults; intra-CE energy per bit is
    ``e_bit_intra_base * sqrt(nodes per CE)``. The link/router values put a
    Cora-sized 4x4 run at a few microjoules of communication energy.
    """

    e_crossbar_read: float = 2.0e-10
    e_bit_intra_base: float = 4.0e-13
    e_bit_link: float = 5.0e-13
    e_bit_router: float = 7.5e-13
    sram_rram_ratio: float = 2.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"{f.name} must be >= 0")

    def scaled(self, c: float) -> "EnergyConstants":
        return EnergyConstants(
            self.e_crossbar_read * c,
            self.e_bit_intra_base * c,
            self.e_bit_link * c,
            self.e_bit_router * c,
            self.sram_rram_ratio,
        )


@dataclass(frozen=True)
class HardwareConfig:
    crossbar_dim: int = 128
    cell_bits: int = 2
    weight_bits: int = 4
    activation_bits: int = 4
    adjacency_bits: int = 1
    adc_bits: int = 4
    pes_per_tile: int = 16
    tiles_per_ce: int = 30
    ces_per_chip: int = 16
    clock_hz: float = 1e9
    crossbar_read_cycles: int = 1
    device: str = "rram"
    noc: NocConfig = field(default_factory=NocConfig)
    energy: EnergyConstants = field(default_factory=EnergyConstants)

    def __post_init__(self):
        for name in ("crossbar_dim", "cell_bits", "weight_bits", "activation_bits", "adjacency_bits",
                     "adc_bits", "pes_per_tile", "tiles_per_ce", "ces_per_chip", "crossbar_read_cycles"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.clock_hz <= 0:
            raise ConfigError("clock_hz must be positive")
        if self.cell_bits > self.weight_bits:
            raise ConfigError("cell_bits must not exceed weight_bits")
        d = self.crossbar_dim
        if d < 16 or d & (d - 1):
            raise ConfigError("crossbar_dim must be a power of two >= 16")
        if self.device not in ("rram", "sram"):
            raise ConfigError("device must be 'rram' or 'sram'")

    @property
    def num_ces(self) -> int:
        return self.noc.num_routers

    def with_mesh(self, width: int, height: int, topology: str | None = None) -> "HardwareConfig":
        noc = replace(self.noc, width=width, height=height, topology=topology or self.noc.topology)
        return replace(self, noc=noc)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HardwareConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown hardware keys: {sorted(unknown)}")
        noc = d.pop("noc", {}) or {}
        energy = d.pop("energy", {}) or {}
        try:
            return cls(noc=NocConfig(**noc), energy=EnergyConstants(**energy), **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
