"""Information transfer and mediation along causal paths in multivariate time series."""
from .dataset import DataError, TimeSeriesDataset, load_csv, save_csv
from .discovery import DiscoveryConfig, build_graph, estimate_parents_neighbors
from .estimators import EstimatorConfig, estimate_cmi, estimate_interaction_information, rescale_to_correlation
from .linear_effects import PopulationGaussian, causal_effect, mediated_causal_effect
from .measures import MeasureResult, interaction_measure, lag_function, transfer_measure
from .netmetrics import cib, cib_table
from .simulate import StructuralModel, implied_graph, model_four_station, model_xwy, model_xwy_nonlinear, simulate
from .tsgraph import NodeRef, TimeSeriesGraph, causal_paths, condition_set, is_separated, read_graph, write_graph

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "TimeSeriesDataset",
    "load_csv",
    "save_csv",
    "DiscoveryConfig",
    "build_graph",
    "estimate_parents_neighbors",
    "EstimatorConfig",
    "estimate_cmi",
    "estimate_interaction_information",
    "rescale_to_correlation",
    "PopulationGaussian",
    "causal_effect",
    "mediated_causal_effect",
    "MeasureResult",
    "interaction_measure",
    "lag_function",
    "transfer_measure",
    "cib",
    "cib_table",
    "StructuralModel",
    "implied_graph",
    "model_four_station",
    "model_xwy",
    "model_xwy_nonlinear",
    "simulate",
    "NodeRef",
    "TimeSeriesGraph",
    "causal_paths",
    "condition_set",
    "is_separated",
    "read_graph",
    "write_graph",
]
