"""Cycle-level simulator of a descriptor-based DMA controller.

The main controller prefetches descriptors speculatively; a serialized-fetch
reference controller is included for comparison.  See :mod:`dmacsim.harness`
for running scenarios and :mod:`dmacsim.driver` for the driver model.
"""

from .backend import BackendConfig
from .baseline import BaselineConfig
from .descriptor import Descriptor, DescriptorChain, build_chain, decode, encode
from .frontend import FrontendConfig
from .harness import PRESETS, ScenarioConfig, WorkloadSpec, run_scenario, scenario
from .memory import MemoryConfig
from .metrics import MeasurementWindow, RunReport, estimate_area, ideal_utilization
from .testbench import MainConfig, Testbench

__all__ = [
    "BackendConfig", "BaselineConfig", "Descriptor", "DescriptorChain", "FrontendConfig",
    "MainConfig", "MeasurementWindow", "MemoryConfig", "PRESETS", "RunReport",
    "ScenarioConfig", "Testbench", "WorkloadSpec", "build_chain", "decode", "encode",
    "estimate_area", "ideal_utilization", "run_scenario", "scenario",
]
__version__ = "0.1.0"
