"""Map matching of GPS traces by graph search, with HMM and incremental baselines."""

from .errors import MatchError, MatchFailure, NetworkError, TraceError
from .evaluation import rmf, run_benchmark
from .graph_search import GsmmConfig, MatchPath, match, match_full
from .hmm import HmmConfig, hmm_match
from .incremental import IncrementalConfig, incremental_match
from .network import RoadNetwork, load_network, save_network
from .trace import Measurement, Trace, load_trace, save_trace

__all__ = [
    "GsmmConfig", "HmmConfig", "IncrementalConfig", "MatchError", "MatchFailure", "MatchPath",
    "Measurement", "NetworkError", "RoadNetwork", "Trace", "TraceError", "hmm_match",
    "incremental_match", "load_network", "load_trace", "match", "match_full", "rmf",
    "run_benchmark", "save_network", "save_trace",
]
__version__ = "0.1.0"
