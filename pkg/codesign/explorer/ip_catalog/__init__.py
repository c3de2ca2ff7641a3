"""IP templates, configured instances and their latency/resource characterization."""

from .core_types import (
    RESOURCE_CLASSES,
    ZERO_RESOURCES,
    FeatureMap,
    LayerDims,
    QuantScheme,
    ResourceVector,
    TileShape,
)
from .templates import IpInstance, IpKind, IpTemplate, builtin_templates, get_template
from .characterization import (
    IpCharacterization,
    characterize,
    load_characterization,
    reuse_count,
    tile_counts,
    weight_bytes,
)

__all__ = [
    "RESOURCE_CLASSES",
    "ZERO_RESOURCES",
    "FeatureMap",
    "LayerDims",
    "QuantScheme",
    "ResourceVector",
    "TileShape",
    "IpInstance",
    "IpKind",
    "IpTemplate",
    "builtin_templates",
    "get_template",
    "IpCharacterization",
    "characterize",
    "load_characterization",
    "reuse_count",
    "tile_counts",
    "weight_bytes",
]
