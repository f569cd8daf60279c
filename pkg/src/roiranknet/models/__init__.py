"""SCCNN-RNN, ASCRNN, ASDRNN and ASSRNN classifiers."""
from .checkpoint import MAGIC, load_checkpoint, save_checkpoint
from .config import VARIANTS, ModelConfig
from .network import (AttentionWeights, Model, attentive_attention, build_model,
                      classify_forward, effective_slicing, param_count, predict_proba,
                      roi_features, roi_sequence_encode, sccnn_encode, sdcnn_encode,
                      slice_bounds, slice_sequence)

__all__ = [
    "MAGIC", "VARIANTS", "AttentionWeights", "Model", "ModelConfig", "attentive_attention",
    "build_model", "classify_forward", "effective_slicing", "load_checkpoint", "param_count",
    "predict_proba", "roi_features", "roi_sequence_encode", "save_checkpoint", "sccnn_encode",
    "sdcnn_encode", "slice_bounds", "slice_sequence",
]
