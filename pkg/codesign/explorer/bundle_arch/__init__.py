"""Bundle construction, enumeration and the bundle-level latency/resource models."""

from .bundle import Bundle, BundleCalibration, DataFootprint, MAX_COMPUTATIONAL_IPS
from .enumeration import (
    EnumerationRule,
    bundles_from_json,
    bundles_to_json,
    enumerate_bundles,
    load_enumeration_rule,
)
from .estimates import (
    bundle_latency,
    bundle_resource,
    comp_latency,
    data_footprint,
    estimate_from_terms,
    instance_resources,
    invocation_cycles,
    latency_terms,
)

__all__ = [
    "Bundle",
    "BundleCalibration",
    "DataFootprint",
    "MAX_COMPUTATIONAL_IPS",
    "EnumerationRule",
    "bundles_from_json",
    "bundles_to_json",
    "enumerate_bundles",
    "load_enumeration_rule",
    "bundle_latency",
    "bundle_resource",
    "comp_latency",
    "data_footprint",
    "estimate_from_terms",
    "instance_resources",
    "invocation_cycles",
    "latency_terms",
]
