"""Network mobility (NEMO) simulator with correspondent route optimisation."""

from .netmodel import Address, Datagram, Prefix, decapsulate, encapsulate, prefix_contains, wire_size
from .scenario import ScenarioSpec, load_canned, parse_scenario, serialize_scenario
from .simulation import Simulation, run_scenario

__all__ = [
    "Address",
    "Datagram",
    "Prefix",
    "ScenarioSpec",
    "Simulation",
    "decapsulate",
    "encapsulate",
    "load_canned",
    "parse_scenario",
    "prefix_contains",
    "run_scenario",
    "serialize_scenario",
    "wire_size",
]
