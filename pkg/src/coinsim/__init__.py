"""Design-space exploration for communication-aware in-memory GCN accelerators."""
from .config import EnergyConstants, HardwareConfig, NocConfig
from .graph import PRESETS, Graph, Partition, generate_synthetic, load_edge_list, partition_contiguous, preset
from .objective import ObjectiveParams, OptResult, minimize

__version__ = "0.1.0"
