from .config import ModelConfig
from .decoding import PredictionResult, predict_greedy
from .losses import classification_loss, hybrid_loss, normalize_steps, regression_loss
from .networks import (
    ContextEncoder,
    LSTMSeq2Seq,
    Seq2Seq,
    StepEmbedding,
    TransformerSeq2Seq,
    build_model,
    curvature_classes,
)
from .training import (
    SampleTensors,
    TrainResult,
    evaluate_loss,
    load_checkpoint,
    save_checkpoint,
    to_tensors,
    train,
    write_curves,
)

__all__ = [
    "ModelConfig",
    "PredictionResult",
    "predict_greedy",
    "classification_loss",
    "hybrid_loss",
    "normalize_steps",
    "regression_loss",
    "ContextEncoder",
    "LSTMSeq2Seq",
    "Seq2Seq",
    "StepEmbedding",
    "TransformerSeq2Seq",
    "build_model",
    "curvature_classes",
    "SampleTensors",
    "TrainResult",
    "evaluate_loss",
    "load_checkpoint",
    "save_checkpoint",
    "to_tensors",
    "train",
    "write_curves",
]
