"""DNN structure, whole-DNN latency/resource models and DNN initialization."""

from .device import PYNQ_Z1, DeviceSpec
from .model import (
    ALLOWED_EXPANSIONS,
    EXPANSION_FACTORS,
    FIXED_HEAD_TAIL,
    NO_EXPANSION,
    PURE_REPLICATION,
    DnnCalibration,
    DnnModel,
    LayerSpec,
    dnn_from_dict,
    dnn_to_dict,
    expand_channels,
    layer_plan,
    replication_dims,
    replication_layers,
)
from .estimates import (
    CostModels,
    LatencyEstimate,
    ModelStatistics,
    dnn_latency,
    dnn_resource,
    model_statistics,
)
from .initialization import InitSettings, initialize_dnn

__all__ = [
    "PYNQ_Z1",
    "DeviceSpec",
    "ALLOWED_EXPANSIONS",
    "EXPANSION_FACTORS",
    "FIXED_HEAD_TAIL",
    "NO_EXPANSION",
    "PURE_REPLICATION",
    "DnnCalibration",
    "DnnModel",
    "LayerSpec",
    "dnn_from_dict",
    "dnn_to_dict",
    "expand_channels",
    "layer_plan",
    "replication_dims",
    "replication_layers",
    "CostModels",
    "LatencyEstimate",
    "ModelStatistics",
    "dnn_latency",
    "dnn_resource",
    "model_statistics",
    "InitSettings",
    "initialize_dnn",
]
