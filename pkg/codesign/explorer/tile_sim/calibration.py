"""
Calibration of the analytical models against the tile simulator.

Per bundle, alpha and beta are fitted by ordinary least squares of measured
cycles on the two regressors of the bundle latency model (sum of Comp,
Theta / bw); residuals are reported as relative error. Resource overheads
come from the structural controller/link terms of the characterization
table. phi and Lat_DM come from the replication-boundary turnarounds
measured on simulated DNNs.

recalibrate() repeats both fits between search rounds on the DNNs the
previous round accepted.
"""

import sys
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from codesign.explorer.bundle_arch.bundle import CALIBRATION_CEILING, Bundle, BundleCalibration
from codesign.explorer.bundle_arch.estimates import estimate_from_terms, latency_terms
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import dnn_latency
from codesign.explorer.dnn_model.model import ALLOWED_EXPANSIONS, DnnCalibration, DnnModel, replication_layers
from codesign.explorer.exceptions import CalibrationError
from codesign.explorer.ip_catalog.characterization import IpCharacterization
from codesign.explorer.ip_catalog.core_types import FeatureMap, LayerDims, QuantScheme, ResourceVector, TileShape
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.tile_sim.simulator import SimSettings, SimTrace, simulate_bundle, simulate_dnn
from codesign.explorer.utils.file_tools import SCHEMA_VERSION

logger = setup_logger("calibration", module="tile_sim")

MIN_SAMPLES = 4
SAMPLE_SIDES = (16, 24, 32, 40, 48, 56, 64)
DNN_CONTROL_WEIGHT = 1.0

# (bundle, layer dims, tile, bw, char) -> cycles
LatencyOracle = Callable[[Bundle, LayerDims, TileShape, float, IpCharacterization], float]


@dataclass(frozen=True)
class SampleConfig:
    pf: int
    dims: LayerDims


@dataclass(frozen=True)
class CalibrationSample:
    comp: float
    transfer: float
    measured: float


@dataclass(frozen=True)
class CalibrationSettings:
    samples_per_bundle: int = 8
    holdout_per_bundle: int = 8
    channels: int = 32
    tile: TileShape = TileShape(8, 8, 8)
    quant: QuantScheme = QuantScheme()
    dnn_samples: int = 4
    seed: int = 0
    sim: SimSettings = field(default_factory=SimSettings)


@dataclass(frozen=True)
class BundleFit:
    bundle_id: int
    alpha_raw: float
    beta_raw: float
    calibration: BundleCalibration
    train_residual: float
    holdout_errors: Tuple[float, ...]

    @property
    def max_holdout_error(self) -> float:
        return max(self.holdout_errors, default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bundle_id": self.bundle_id,
            "alpha_raw": self.alpha_raw,
            "beta_raw": self.beta_raw,
            "calibration": self.calibration.to_dict(),
            "train_residual": self.train_residual,
            "holdout_errors": list(self.holdout_errors),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BundleFit":
        return cls(
            bundle_id=int(data["bundle_id"]),
            alpha_raw=float(data["alpha_raw"]),
            beta_raw=float(data["beta_raw"]),
            calibration=BundleCalibration.from_dict(data["calibration"]),
            train_residual=float(data["train_residual"]),
            holdout_errors=tuple(float(e) for e in data["holdout_errors"]),
        )


@dataclass(frozen=True)
class CalibrationResult:
    fits: Dict[int, BundleFit]
    dnn: DnnCalibration
    dnn_errors: Tuple[float, ...] = ()

    def calibration_for(self, bundle_id: int) -> BundleCalibration:
        fit = self.fits.get(bundle_id)
        return fit.calibration if fit else BundleCalibration()

    def apply(self, bundles: Sequence[Bundle]) -> List[Bundle]:
        return [b.with_calibration(self.calibration_for(b.id)) for b in bundles]

    @property
    def max_holdout_error(self) -> float:
        return max((f.max_holdout_error for f in self.fits.values()), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "bundles": [self.fits[k].to_dict() for k in sorted(self.fits)],
            "dnn": self.dnn.to_dict(),
            "dnn_errors": list(self.dnn_errors),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CalibrationResult":
        fits = [BundleFit.from_dict(entry) for entry in data.get("bundles", [])]
        return cls(
            fits={f.bundle_id: f for f in fits},
            dnn=DnnCalibration.from_dict(data["dnn"]),
            dnn_errors=tuple(float(e) for e in data.get("dnn_errors", [])),
        )


def generate_sample_configs(bundle: Bundle, count: int, seed: int, settings: CalibrationSettings,
                            char: IpCharacterization) -> List[SampleConfig]:
    """Deterministic configs for one bundle: random spatial size and pf, fixed channel count."""
    rng = np.random.default_rng([seed, bundle.id])
    configs = []
    for _ in range(count):
        side = int(rng.choice(SAMPLE_SIDES))
        pf = int(rng.choice(char.pf_candidates))
        fmap = FeatureMap(side, side, settings.channels)
        configs.append(SampleConfig(pf=pf, dims=LayerDims.same(fmap)))
    return configs


def simulator_oracle(settings: SimSettings) -> LatencyOracle:
    def measure(bundle, dims, tile, bw, char) -> float:
        return float(simulate_bundle(bundle, dims, tile, bw, char, settings).total_cycles)
    return measure


def collect_samples(bundle: Bundle, configs: Sequence[SampleConfig], tile: TileShape, quant: QuantScheme,
                    bw: float, char: IpCharacterization, oracle: LatencyOracle) -> List[CalibrationSample]:
    samples = []
    for cfg in configs:
        configured = bundle.configure(cfg.pf, quant)
        comp, transfer = latency_terms(configured, cfg.dims, tile, bw, char)
        measured = oracle(configured, cfg.dims, tile, bw, char)
        logger.debug(f"{bundle.label} pf={cfg.pf} dims={cfg.dims.out}: comp={comp:.0f} "
                     f"transfer={transfer:.0f} measured={measured:.0f}")
        samples.append(CalibrationSample(comp, transfer, measured))
    return samples


def fit_overlap_factors(samples: Sequence[CalibrationSample]) -> Tuple[float, float, float]:
    """
    Ordinary least squares of measured ~ alpha * comp + beta * transfer,
    no intercept and no regularization.

    Returns:
        Tuple[float, float, float]: Raw alpha, raw beta and the relative RMS residual

    Raises:
        CalibrationError: If there are fewer than MIN_SAMPLES samples or the regressors are collinear
    """
    if len(samples) < MIN_SAMPLES:
        raise CalibrationError(f"Need at least {MIN_SAMPLES} samples, got {len(samples)}")
    x = np.array([[s.comp, s.transfer] for s in samples], dtype=float)
    y = np.array([s.measured for s in samples], dtype=float)
    if np.linalg.matrix_rank(x) < 2:
        raise CalibrationError("Sample set is rank deficient; vary pf and feature-map size across samples")
    coef, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    residual = float(np.sqrt(np.mean(((x @ coef - y) / y) ** 2)))
    return float(coef[0]), float(coef[1]), residual


def bundle_overhead(bundle: Bundle, char: IpCharacterization) -> ResourceVector:
    """Gamma: one controller plus one link per adjacent layer pair."""
    links = bundle.layers_per_bundle - 1
    return char.overhead("bundle_controller") + char.overhead("per_link").scale(links)


def calibrate_bundle(bundle: Bundle, train: Sequence[SampleConfig], holdout: Sequence[SampleConfig],
                     device: DeviceSpec, char: IpCharacterization, settings: CalibrationSettings,
                     oracle: LatencyOracle, extra_samples: Sequence[CalibrationSample] = ()) -> BundleFit:
    samples = collect_samples(bundle, train, settings.tile, settings.quant, device.bw, char, oracle)
    samples += list(extra_samples)
    try:
        alpha, beta, residual = fit_overlap_factors(samples)
    except CalibrationError as e:
        raise CalibrationError(f"{bundle.label}: {e}") from e
    calib = BundleCalibration.clamped(alpha, beta, bundle_overhead(bundle, char), label=bundle.label)

    errors = []
    for sample in collect_samples(bundle, holdout, settings.tile, settings.quant, device.bw, char, oracle):
        predicted = estimate_from_terms(calib, sample.comp, sample.transfer)
        errors.append(abs(predicted - sample.measured) / sample.measured)
    fit = BundleFit(bundle.id, alpha, beta, calib, residual, tuple(errors))
    logger.info(f"Calibrated {bundle.label} ({bundle.name}): alpha={calib.alpha:.4f} beta={calib.beta:.4f} "
                f"residual={residual:.2e} max held-out error={fit.max_holdout_error:.2%}")
    return fit


def _sample_dnn(bundle: Bundle, rng: np.random.Generator, settings: CalibrationSettings,
                char: IpCharacterization) -> DnnModel:
    n_rep = int(rng.integers(2, 5))
    boundaries = n_rep - 1
    return DnnModel(
        bundle=bundle.configure(int(rng.choice(char.pf_candidates)), settings.quant),
        n_rep=n_rep,
        x_ds=tuple(int(x) for x in rng.integers(0, 2, size=boundaries)),
        f_ds=(2,) * boundaries,
        pi_ch=tuple(float(rng.choice(ALLOWED_EXPANSIONS)) for _ in range(boundaries)),
        input_dims=FeatureMap(32, 32, settings.channels),
        tile=settings.tile,
        calib=DnnCalibration(phi=0.0, lat_dm=0.0),
    )


def fit_phi(models: Sequence[DnnModel], traces: Sequence[SimTrace], lat_dm: float) -> float:
    """Least-squares scale of (n_rep - 1) * lat_dm onto the measured boundary gaps, clipped to [0, 1.5]."""
    x = np.array([(m.n_rep - 1) * lat_dm for m in models], dtype=float)
    if lat_dm <= 0 or not x.any():
        return 1.0
    gaps = np.array([sum(t.boundary_gaps()) for t in traces], dtype=float)
    return float(np.clip(x @ gaps / (x @ x), 0.0, CALIBRATION_CEILING))


def dnn_model_errors(models: Sequence[DnnModel], traces: Sequence[SimTrace], calib: DnnCalibration,
               device: DeviceSpec, char: IpCharacterization) -> Tuple[float, ...]:
    errors = []
    for m, trace in zip(models, traces):
        est = dnn_latency(replace(m, calib=calib), device, char).cycles
        errors.append(abs(est - trace.total_cycles) / trace.total_cycles)
    return tuple(errors)


def calibrate_dnn(bundles: Sequence[Bundle], device: DeviceSpec, char: IpCharacterization,
                  settings: CalibrationSettings) -> Tuple[DnnCalibration, Tuple[float, ...]]:
    """
    Fit phi and Lat_DM on simulated multi-replication DNNs.

    Lat_DM is the nominal replication turnaround; phi scales it onto the
    measured boundary gaps.
    """
    res_ctl = char.overhead("dnn_controller")
    lat_dm = float(settings.sim.dm_sync_cycles)
    if settings.dnn_samples == 0 or not bundles:
        return DnnCalibration(phi=1.0, lat_dm=lat_dm, gamma_ctl=DNN_CONTROL_WEIGHT, res_ctl=res_ctl), ()

    rng = np.random.default_rng([settings.seed, len(bundles), settings.dnn_samples])
    models, traces = [], []
    for _ in range(settings.dnn_samples):
        bundle = bundles[int(rng.integers(0, len(bundles)))]
        m = _sample_dnn(bundle, rng, settings, char)
        models.append(m)
        traces.append(simulate_dnn(m, device, char, settings.sim))

    phi = fit_phi(models, traces, lat_dm)
    calib = DnnCalibration(phi=phi, lat_dm=lat_dm, gamma_ctl=DNN_CONTROL_WEIGHT, res_ctl=res_ctl)
    errors = dnn_model_errors(models, traces, calib, device, char)
    logger.info(f"DNN calibration: phi={phi:.4f} lat_dm={lat_dm:.0f} max error={max(errors):.2%}")
    return calib, errors


def _split_configs(bundle: Bundle, settings: CalibrationSettings,
                   char: IpCharacterization) -> Tuple[List[SampleConfig], List[SampleConfig]]:
    generated = generate_sample_configs(
        bundle, settings.samples_per_bundle + settings.holdout_per_bundle, settings.seed, settings, char
    )
    return generated[:settings.samples_per_bundle], generated[settings.samples_per_bundle:]


def replication_samples(m: DnnModel, bw: float, char: IpCharacterization,
                        settings: SimSettings) -> List[CalibrationSample]:
    """One alpha/beta sample per replication of a model, measured at that replication's own dims."""
    samples = []
    for r in range(m.n_rep):
        dims = [layer.dims for layer in replication_layers(m, r)]
        comp, transfer = latency_terms(m.bundle, dims, m.tile, bw, char)
        measured = float(simulate_bundle(m.bundle, dims, m.tile, bw, char, settings).total_cycles)
        samples.append(CalibrationSample(comp, transfer, measured))
    return samples


def recalibrate(models: Sequence[DnnModel], previous: CalibrationResult, device: DeviceSpec,
                char: IpCharacterization, settings: CalibrationSettings = CalibrationSettings()) -> CalibrationResult:
    """
    Refit the models against the tile simulator on DNNs a search round accepted.

    Every replication of an accepted model is added to its bundle's training
    samples before alpha and beta are refitted; bundles no model uses keep
    their previous fit. phi is refitted on the accepted models' boundary
    gaps, keeping Lat_DM, and stays as it was when no model has more than
    one replication.

    Raises:
        CalibrationError: If a bundle's samples cannot determine alpha and beta
    """
    if not models:
        return previous
    oracle = simulator_oracle(settings.sim)
    fits = dict(previous.fits)
    by_bundle: Dict[int, List[DnnModel]] = {}
    for m in models:
        by_bundle.setdefault(m.bundle.id, []).append(m)
    for bundle_id, used in sorted(by_bundle.items()):
        extra = [s for m in used for s in replication_samples(m, device.bw, char, settings.sim)]
        train, holdout = _split_configs(used[0].bundle, settings, char)
        fits[bundle_id] = calibrate_bundle(used[0].bundle, train, holdout, device, char, settings, oracle, extra)

    dnn = previous.dnn
    traces = [simulate_dnn(m, device, char, settings.sim) for m in models]
    if any(m.n_rep > 1 for m in models):
        dnn = replace(dnn, phi=fit_phi(models, traces, dnn.lat_dm))
    errors = dnn_model_errors(models, traces, dnn, device, char)
    logger.info(f"Recalibrated {len(by_bundle)} bundles on {len(models)} accepted DNNs: phi={dnn.phi:.4f} "
                f"max DNN error={max(errors):.2%}")
    return CalibrationResult(fits=fits, dnn=dnn, dnn_errors=errors)


def calibrate(
    bundles: Sequence[Bundle],
    device: DeviceSpec,
    char: IpCharacterization,
    settings: CalibrationSettings = CalibrationSettings(),
    sample_configs: Optional[Dict[int, Sequence[SampleConfig]]] = None,
    oracle: Optional[LatencyOracle] = None,
    progress: bool = False,
) -> CalibrationResult:
    """
    Calibrate every bundle and the DNN-level constants.

    Args:
        bundles: Bundle skeletons
        device: Supplies the off-chip bandwidth
        char: IP characterization
        settings: Sample counts, sample shapes and simulator settings
        sample_configs: Training configs per bundle id; generated when omitted
        oracle: Measurement source; the tile simulator when omitted
        progress: Show a progress bar on stderr

    Returns:
        CalibrationResult: Fitted calibrations with residuals and held-out errors

    Raises:
        CalibrationError: If a bundle's samples cannot determine alpha and beta
    """
    oracle = oracle or simulator_oracle(settings.sim)
    fits: Dict[int, BundleFit] = {}
    for bundle in tqdm(bundles, desc="calibrate", file=sys.stderr, disable=not progress):
        train, holdout = _split_configs(bundle, settings, char)
        if sample_configs and bundle.id in sample_configs:
            train = list(sample_configs[bundle.id])
        fits[bundle.id] = calibrate_bundle(bundle, train, holdout, device, char, settings, oracle)

    calibrated = [b.with_calibration(fits[b.id].calibration) for b in bundles]
    dnn_calib, errors = calibrate_dnn(calibrated, device, char, settings)
    return CalibrationResult(fits=fits, dnn=dnn_calib, dnn_errors=errors)
