"""dygad: anomaly detection on continuous-time dynamic graphs.

Pipeline: temporal k-hop ego-graph sampling -> alternating node/edge
structural extraction -> kernel-attention transformer -> anomaly scoring,
trained unsupervised against corrupted negatives.
"""

from .detector import DynamicGraphAnomalyDetector, evaluate
from .errors import ConfigError, DataError, DygadError, NumericError
from .graph import (DatasetSplit, EdgeStreamSchema, Event, SensorSchema,
                    TemporalEdge, TemporalGraph, chronological_split,
                    combined_stream, inject_edge_anomalies, load_edge_stream,
                    load_multivariate_series)
from .metrics import EvalReport, average_precision, best_f1, build_report, roc_auc
from .model import EventScorer, ModelConfig
from .sampler import (EgoGraphSequence, EgoSubgraph, build_sequence, khop_ego,
                      sequence_stats)
from .training import (TrainConfig, bce_sum, corrupt_node_events, grad_check,
                       negative_sample, objective, train)

__version__ = "0.1.0"

__all__ = [
    "DynamicGraphAnomalyDetector", "evaluate",
    "ConfigError", "DataError", "DygadError", "NumericError",
    "DatasetSplit", "EdgeStreamSchema", "Event", "SensorSchema",
    "TemporalEdge", "TemporalGraph", "chronological_split", "combined_stream",
    "inject_edge_anomalies", "load_edge_stream", "load_multivariate_series",
    "EvalReport", "average_precision", "best_f1", "build_report", "roc_auc",
    "EventScorer", "ModelConfig",
    "EgoGraphSequence", "EgoSubgraph", "build_sequence", "khop_ego",
    "sequence_stats",
    "TrainConfig", "bce_sum", "corrupt_node_events", "grad_check",
    "negative_sample", "objective", "train",
]
