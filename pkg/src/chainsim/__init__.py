"""Modular discrete-event blockchain simulator.

Library surface: build a :class:`~chainsim.config.SimulationConfig` (directly,
from a preset, or from a JSON file) and pass it to :func:`~chainsim.engine.run`
for a :class:`~chainsim.metrics.SimulationReport`.  The ``chainsim`` console
script wraps the same path.
"""

from .config import PRESETS, ConfigError, SimulationConfig, config_from_dict, load_config
from .engine import Simulation, run
from .metrics import SimulationReport

__all__ = [
    "PRESETS",
    "ConfigError",
    "SimulationConfig",
    "SimulationReport",
    "Simulation",
    "config_from_dict",
    "load_config",
    "run",
]

__version__ = "0.1.0"
