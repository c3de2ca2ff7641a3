"""
Built-in IP templates and configured IP instances.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List

from codesign.explorer.exceptions import ConfigError
from codesign.explorer.ip_catalog.core_types import QuantScheme


class IpKind(str, Enum):
    CONV1X1 = "conv1x1"
    CONV3X3 = "conv3x3"
    CONV5X5 = "conv5x5"
    DWCONV3X3 = "dwconv3x3"
    DWCONV5X5 = "dwconv5x5"
    DWCONV7X7 = "dwconv7x7"
    MAX_POOL = "max_pool"
    AVG_POOL = "avg_pool"
    NORMALIZATION = "normalization"
    ACTIVATION = "activation"


_KERNELS = {
    IpKind.CONV1X1: 1,
    IpKind.CONV3X3: 3,
    IpKind.CONV5X5: 5,
    IpKind.DWCONV3X3: 3,
    IpKind.DWCONV5X5: 5,
    IpKind.DWCONV7X7: 7,
    IpKind.MAX_POOL: 3,
    IpKind.AVG_POOL: 3,
}


@dataclass(frozen=True)
class IpTemplate:
    id: str
    kind: IpKind

    @property
    def computational(self) -> bool:
        return self.kind.value.startswith(("conv", "dwconv"))

    @property
    def depthwise(self) -> bool:
        return self.kind.value.startswith("dwconv")

    @property
    def kernel(self) -> int:
        return _KERNELS.get(self.kind, 1)


_BUILTIN: List[IpTemplate] = [IpTemplate(kind.value, kind) for kind in IpKind]
_BY_ID: Dict[str, IpTemplate] = {t.id: t for t in _BUILTIN}


def builtin_templates() -> List[IpTemplate]:
    """The ten built-in layer templates, in catalog order."""
    return list(_BUILTIN)


def get_template(template_id: str) -> IpTemplate:
    """
    Look up a built-in template by id.

    Raises:
        ConfigError: If the id is not a known template
    """
    try:
        return _BY_ID[template_id]
    except KeyError:
        raise ConfigError(f"Unknown IP template id: {template_id!r}")


@dataclass(frozen=True)
class IpInstance:
    """A template with its parallel factor and quantization fixed."""

    template: IpTemplate
    pf: int
    quant: QuantScheme

    def __post_init__(self):
        if not isinstance(self.pf, int) or self.pf < 1:
            raise ConfigError(f"Parallel factor must be a positive integer, got {self.pf!r}")

    @property
    def name(self) -> str:
        return f"ip_{self.template.id}"
