"""
Per-instance latency/resource characterization.

The shipped coefficients stand in for numbers an HLS flow would report.
They live in config/char_table.json and can be replaced wholesale with
another table of the same schema (``--char-table`` on the command line).
"""

import math
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from codesign.explorer.exceptions import ConfigError, DomainError
from codesign.explorer.ip_catalog.core_types import (
    FeatureMap,
    LayerDims,
    QuantScheme,
    ResourceVector,
    TileShape,
)
from codesign.explorer.ip_catalog.templates import IpInstance, IpKind, IpTemplate
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.utils.file_tools import read_json
from codesign.explorer.utils.path_utils import resolve_path

logger = setup_logger("characterization", module="ip_catalog")

DEFAULT_TABLE_PATH = Path(__file__).resolve().parent / "config" / "char_table.json"
OVERHEAD_NAMES = ("bundle_controller", "per_link", "dnn_controller")


@dataclass(frozen=True)
class KindCoefficients:
    dsp_per_mac: float
    lut_base: float
    lut_per_dsp: float
    lut_per_pf: float
    ff_base: float
    ff_per_dsp: float
    ff_per_pf: float
    bram_per_pf_kbit: float
    cycles_per_element: float

    @classmethod
    def from_dict(cls, kind: str, data: Dict[str, float]) -> "KindCoefficients":
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in data]
        if missing:
            raise ConfigError(f"Characterization entry '{kind}' is missing fields: {missing}")
        values = {n: float(data[n]) for n in names}
        if any(v < 0 for v in values.values()):
            raise ConfigError(f"Characterization entry '{kind}' has negative coefficients")
        return cls(**values)


class IpCharacterization:
    """
    Closed-form latency/resource model for IP instances.

    Resources are monotone non-decreasing in pf; cycles are monotone
    non-increasing in pf.
    """

    def __init__(self, kinds: Dict[str, KindCoefficients], pf_candidates: Tuple[int, ...], source: str = "<embedded>",
                 overheads: Optional[Dict[str, ResourceVector]] = None):
        self.kinds = dict(kinds)
        self.pf_candidates = tuple(sorted(pf_candidates))
        self.source = source
        self.overheads = {name: ResourceVector() for name in OVERHEAD_NAMES}
        self.overheads.update(overheads or {})

    def overhead(self, name: str) -> ResourceVector:
        """Structural controller/interconnect cost that no single IP accounts for."""
        return self.overheads[name]

    def coefficients(self, template: IpTemplate) -> KindCoefficients:
        try:
            return self.kinds[template.id]
        except KeyError:
            raise ConfigError(f"No characterization for IP template '{template.id}' in {self.source}")

    def buffer_bits(self, template: IpTemplate, quant: QuantScheme, tile: TileShape) -> int:
        """On-chip bits for one input tile, one output tile and one weight tile."""
        bits = 2 * tile.elements * quant.activation_bits
        k2 = template.kernel * template.kernel
        if template.computational and not template.depthwise:
            bits += k2 * tile.channels * tile.channels * quant.weight_bits
        elif template.depthwise:
            bits += k2 * tile.channels * quant.weight_bits
        elif template.kind == IpKind.NORMALIZATION:
            bits += 2 * tile.channels * quant.weight_bits
        return bits

    def res(self, template: IpTemplate, pf: int, quant: QuantScheme, tile: TileShape) -> ResourceVector:
        c = self.coefficients(template)
        dsp = 0.0
        if template.computational:
            dsp = c.dsp_per_mac * template.kernel * template.kernel * pf * (quant.weight_bits / 8)
        lut = c.lut_base + c.lut_per_dsp * dsp + c.lut_per_pf * pf
        ff = c.ff_base + c.ff_per_dsp * dsp + c.ff_per_pf * pf
        bram = self.buffer_bits(template, quant, tile) / 1024.0 + c.bram_per_pf_kbit * pf
        return ResourceVector(dsp=dsp, lut=lut, ff=ff, bram_kbit=bram)

    def lat_cycles(
        self,
        template: IpTemplate,
        pf: int,
        quant: QuantScheme,
        tile: TileShape,
        in_channels: Optional[int] = None,
        reduction: int = 1,
    ) -> int:
        """
        Cycles for one invocation on one tile.

        in_channels is the layer's input depth seen by a standard
        convolution; it defaults to tile.channels. reduction is the number
        of input positions folded into each output position (global pooling).
        """
        c = self.coefficients(template)
        k2 = template.kernel * template.kernel
        if template.computational and not template.depthwise:
            cin = tile.channels if in_channels is None else in_channels
            work = tile.elements * cin * k2
        elif template.depthwise:
            work = tile.elements * k2
        else:
            work = tile.elements * c.cycles_per_element * reduction
        return max(1, math.ceil(work / pf))


def _parse_table(data: Dict, source: str) -> IpCharacterization:
    if "kinds" not in data:
        raise ConfigError(f"Characterization table {source} has no 'kinds' section")
    kinds = {
        kind: KindCoefficients.from_dict(kind, entry)
        for kind, entry in data["kinds"].items()
        if not kind.startswith("_")
    }
    missing = [k.value for k in IpKind if k.value not in kinds]
    if missing:
        raise ConfigError(f"Characterization table {source} lacks kinds: {missing}")
    pf_candidates = tuple(int(p) for p in data.get("pf_candidates", [1, 2, 4, 8, 16, 32]))
    if not pf_candidates or min(pf_candidates) < 1:
        raise ConfigError(f"Characterization table {source} has invalid pf_candidates")
    raw_overheads = data.get("overheads", {})
    unknown = set(raw_overheads) - set(OVERHEAD_NAMES)
    if unknown:
        raise ConfigError(f"Characterization table {source} has unknown overheads: {sorted(unknown)}")
    overheads = {name: ResourceVector.from_dict(entry) for name, entry in raw_overheads.items()}
    return IpCharacterization(kinds, pf_candidates, source=source, overheads=overheads)


@lru_cache(maxsize=1)
def _default_characterization() -> IpCharacterization:
    return _parse_table(read_json(DEFAULT_TABLE_PATH), "<embedded>")


def load_characterization(path: Optional[Union[str, Path]] = None) -> IpCharacterization:
    """Load a characterization table; None gives the shipped default."""
    if path is None:
        return _default_characterization()
    table_path = resolve_path(path)
    logger.info(f"Loading characterization table from {table_path}")
    return _parse_table(read_json(table_path), str(table_path))


def characterize(inst: IpInstance, tile: TileShape, char: IpCharacterization,
                 in_channels: Optional[int] = None) -> Tuple[ResourceVector, int]:
    """Resources and per-invocation cycles of one instance at one tile shape."""
    if inst.pf not in char.pf_candidates:
        raise ConfigError(f"Parallel factor {inst.pf} is not in the allowed set {char.pf_candidates}")
    res = char.res(inst.template, inst.pf, inst.quant, tile)
    cycles = char.lat_cycles(inst.template, inst.pf, inst.quant, tile, in_channels=in_channels)
    return res, cycles


def tile_counts(fmap: FeatureMap, tile: TileShape) -> Tuple[int, int, int]:
    """Tiles along width, height and channels (partial tiles count as whole)."""
    if fmap.is_empty():
        raise DomainError(f"Feature map must be non-zero, got {fmap}")
    return (
        math.ceil(fmap.width / tile.width),
        math.ceil(fmap.height / tile.height),
        math.ceil(fmap.channels / tile.channels),
    )


def reuse_count(inst: IpInstance, layer_dims: LayerDims, tile: TileShape) -> int:
    """Invocations of inst needed to cover the layer's output map."""
    layer_dims.validate()
    nw, nh, nc = tile_counts(layer_dims.out, tile)
    return nw * nh * nc


def weight_bytes(template: IpTemplate, in_channels: int, out_channels: int, quant: QuantScheme) -> int:
    """Bytes of trained parameters a layer reads from off-chip memory."""
    k2 = template.kernel * template.kernel
    if template.computational and not template.depthwise:
        return k2 * in_channels * out_channels * quant.weight_bytes
    if template.depthwise:
        return k2 * out_channels * quant.weight_bytes
    if template.kind == IpKind.NORMALIZATION:
        return 2 * out_channels * quant.weight_bytes
    return 0
