"""Continuous selections of set-valued maps through skeletal selections on nerves of covers."""

from .complex import SimplicialComplex, simplex
from .covers import Cover, canonical_map, nerve, partition_of_unity, sigma_at, verify_canonical
from .domain import Domain
from .engine import EngineError, assemble, lift, transfer, zero_skeletal
from .fillers import FillerOracle, fill
from .moduli import Modulus, chain_53, chain_54, iterate
from .realization import BaryPoint, PLMap, eval_pl
from .regions import Region, SetValuedMap, is_eps_selection, o_map
from .selection import cauchy_refine, local_select, michael_select, run_aspherical, select_eps, select_near

__version__ = "0.1.0"

__all__ = [
    "BaryPoint", "Cover", "Domain", "EngineError", "FillerOracle", "Modulus", "PLMap", "Region",
    "SetValuedMap", "SimplicialComplex", "assemble", "canonical_map", "cauchy_refine", "chain_53",
    "chain_54", "eval_pl", "fill", "is_eps_selection", "iterate", "lift", "local_select", "michael_select",
    "nerve", "o_map", "partition_of_unity", "run_aspherical", "select_eps", "select_near", "sigma_at",
    "simplex", "transfer", "verify_canonical", "zero_skeletal",
]
