"""Contact process on the hierarchical group: exact generators, couplings,
simulation and rigorous survival bounds."""
from . import bounds, coupling, exactgen, lattice, simulate
from .lattice import RateModel, parse_alpha

__version__ = "0.1.0"

__all__ = ["bounds", "coupling", "exactgen", "lattice", "simulate", "RateModel", "parse_alpha",
           "__version__"]
