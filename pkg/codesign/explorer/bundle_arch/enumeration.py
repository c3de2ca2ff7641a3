"""
Offline bundle generation and the bundle list export.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from codesign.explorer.bundle_arch.bundle import Bundle
from codesign.explorer.exceptions import ConfigError
from codesign.explorer.ip_catalog.templates import IpTemplate
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.utils.file_tools import SCHEMA_VERSION, read_json

logger = setup_logger("enumeration", module="bundle_arch")

DEFAULT_RULE_PATH = Path(__file__).resolve().parent / "config" / "enumeration_rule.json"


@dataclass(frozen=True)
class EnumerationRule:
    singles: Tuple[str, ...]
    pair_first: Tuple[str, ...]
    pair_second: Tuple[str, ...]
    tail: Tuple[str, ...]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnumerationRule":
        required = ["singles", "pair_first", "pair_second", "tail"]
        for key in required:
            if key not in data:
                raise ConfigError(f"Enumeration rule is missing '{key}'")
        return cls(*(tuple(data[key]) for key in required))


def load_enumeration_rule(path: Optional[Union[str, Path]] = None) -> EnumerationRule:
    return EnumerationRule.from_dict(read_json(path or DEFAULT_RULE_PATH))


def enumerate_bundles(catalog: Sequence[IpTemplate], rule: Optional[EnumerationRule] = None) -> List[Bundle]:
    """
    Generate bundle skeletons from a template catalog.

    Templates named by the rule but absent from the catalog are skipped, so
    a catalog without computational templates yields no bundles.
    """
    rule = rule or load_enumeration_rule()
    by_id = {t.id: t for t in catalog}
    tail = tuple(by_id[t] for t in rule.tail if t in by_id)

    heads: List[Tuple[IpTemplate, ...]] = []
    for single in rule.singles:
        if single in by_id and by_id[single].computational:
            heads.append((by_id[single],))
    for first in rule.pair_first:
        if first not in by_id or not by_id[first].computational:
            continue
        for second in rule.pair_second:
            if second in by_id:
                heads.append((by_id[first], by_id[second]))

    bundles = [Bundle(id=i + 1, templates=head + tail) for i, head in enumerate(heads)]
    logger.debug(f"Enumerated {len(bundles)} bundles")
    return bundles


def bundles_to_json(bundles: Sequence[Bundle]) -> Dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "bundles": [b.to_dict() for b in bundles]}


def bundles_from_json(data: Dict[str, Any]) -> List[Bundle]:
    return [Bundle.from_dict(entry) for entry in data.get("bundles", [])]
