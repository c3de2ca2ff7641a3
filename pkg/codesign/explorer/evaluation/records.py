"""
Evaluation records and their JSON/CSV report formats.
"""

import csv
import io
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from codesign.explorer.dnn_model.model import CONSTRUCTIONS
from codesign.explorer.exceptions import DomainError
from codesign.explorer.ip_catalog.core_types import RESOURCE_CLASSES, QuantScheme, ResourceVector
from codesign.explorer.utils.file_tools import SCHEMA_VERSION

CSV_COLUMNS = (
    ["bundle_id", "method", "n_rep", "pf", "weight_bits", "activation_bits", "activation_clip", "latency_ms"]
    + list(RESOURCE_CLASSES)
    + ["accuracy", "valid", "error"]
)


@dataclass(frozen=True)
class EvalRecord:
    """
    One evaluated model. Invalid records (evaluator failure) carry no
    accuracy and are ignored by selection.
    """

    bundle_id: int
    method: str
    pf: int
    quant: QuantScheme
    latency_ms: float
    resource: ResourceVector
    accuracy: Optional[float]
    n_rep: int = 1
    error: Optional[str] = None

    def __post_init__(self):
        if self.method not in CONSTRUCTIONS:
            raise DomainError(f"Unknown construction method {self.method!r}")
        if self.latency_ms <= 0:
            raise DomainError(f"Record latency must be > 0 ms, got {self.latency_ms}")
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 1.0:
            raise DomainError(f"Accuracy must lie in [0, 1], got {self.accuracy}")

    @property
    def valid(self) -> bool:
        return self.accuracy is not None

    @property
    def dsp(self) -> float:
        return self.resource.dsp

    def sort_key(self):
        return (self.bundle_id, self.method, self.n_rep, self.quant.activation_clip, self.pf)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bundle_id": self.bundle_id,
            "method": self.method,
            "n_rep": self.n_rep,
            "pf": self.pf,
            "quant": self.quant.to_dict(),
            "latency_ms": self.latency_ms,
            "resource": self.resource.to_dict(),
            "accuracy": self.accuracy,
            "valid": self.valid,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalRecord":
        return cls(
            bundle_id=int(data["bundle_id"]),
            method=data["method"],
            pf=int(data["pf"]),
            quant=QuantScheme.from_dict(data["quant"]),
            latency_ms=float(data["latency_ms"]),
            resource=ResourceVector.from_dict(data["resource"]),
            accuracy=None if data.get("accuracy") is None else float(data["accuracy"]),
            n_rep=int(data.get("n_rep", 1)),
            error=data.get("error"),
        )


def records_to_json(records: Sequence[EvalRecord]) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "records": [r.to_dict() for r in sorted(records, key=EvalRecord.sort_key)],
    }


def records_from_json(data: Dict[str, Any]) -> List[EvalRecord]:
    return [EvalRecord.from_dict(entry) for entry in data.get("records", [])]


def records_to_csv(records: Sequence[EvalRecord]) -> str:
    """One row per record, for plotting."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(records, key=EvalRecord.sort_key):
        writer.writerow(
            [r.bundle_id, r.method, r.n_rep, r.pf, r.quant.weight_bits, r.quant.activation_bits,
             r.quant.activation_clip, repr(r.latency_ms)]
            + [repr(getattr(r.resource, name)) for name in RESOURCE_CLASSES]
            + ["" if r.accuracy is None else repr(r.accuracy), r.valid, r.error or ""]
        )
    return buffer.getvalue()
