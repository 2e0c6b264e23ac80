"""Transition matrices between Morse decompositions across a breakdown of continuation."""

from __future__ import annotations

from .conley import SCHEMA, MorseModel, MorseSlice, infer_connections, load_model, parse_model, verify_connection_matrix
from .continuation import ContinuabilityOracle, Decomposition, finest_decomposition, is_indecomposable, reduced_intersection
from .errors import ConleyTransitError, InputError, ResourceError, TruncationError
from .gf2 import ChainComplexG, GradedMap, GradedSpace, Matrix, homology, mapping_cone
from .posets import Poset, intervals, is_adjacent_pair, is_attracting_interval, is_interval
from .slowfast import Family1D, analyze_slice, detect_breakdown, integrate_extended, limit_itinerary
from .transition import (
    ThetaShift,
    TransitionMatrix,
    build_extended,
    connection_scenarios,
    enumerate_transitions,
    forced_connections,
    is_axiomatic,
)

__version__ = "0.1.0"

__all__ = [
    "SCHEMA", "MorseModel", "MorseSlice", "infer_connections", "load_model", "parse_model",
    "verify_connection_matrix", "ContinuabilityOracle", "Decomposition", "finest_decomposition",
    "is_indecomposable", "reduced_intersection", "ConleyTransitError", "InputError", "ResourceError",
    "TruncationError", "ChainComplexG", "GradedMap", "GradedSpace", "Matrix", "homology", "mapping_cone",
    "Poset", "intervals", "is_adjacent_pair", "is_attracting_interval", "is_interval", "Family1D",
    "analyze_slice", "detect_breakdown", "integrate_extended", "limit_itinerary", "ThetaShift",
    "TransitionMatrix", "build_extended", "connection_scenarios", "enumerate_transitions",
    "forced_connections", "is_axiomatic", "__version__",
]
