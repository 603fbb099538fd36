"""Per-frame salient-pose classification and repetition counting from 3-D skeletons."""

from .counting import CountResult, ScoreSeries, TriggerConfig, count_series, infer_and_count
from .geometry import Skeleton, get_skeleton, sequence_geometry
from .metrics import EvalRecord, mae, obo
from .model import GMFLNet, ModelConfig
from .sequence import Annotation, PoseSequence

__version__ = "0.1.0"

__all__ = [
    "Annotation", "CountResult", "EvalRecord", "GMFLNet", "ModelConfig", "PoseSequence",
    "ScoreSeries", "Skeleton", "TriggerConfig", "count_series", "get_skeleton",
    "infer_and_count", "mae", "obo", "sequence_geometry",
]
