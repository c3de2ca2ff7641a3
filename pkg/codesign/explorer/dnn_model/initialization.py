"""
Initial DNN for a bundle: every IP template instantiated once at the
largest parallel factor the device budget admits.
"""

from dataclasses import dataclass

from codesign.explorer.bundle_arch.bundle import Bundle
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import dnn_resource
from codesign.explorer.dnn_model.model import (
    NO_EXPANSION,
    PURE_REPLICATION,
    DnnCalibration,
    DnnModel,
)
from codesign.explorer.exceptions import InfeasibleError, ModelError
from codesign.explorer.ip_catalog.characterization import IpCharacterization
from codesign.explorer.ip_catalog.core_types import FeatureMap, QuantScheme, TileShape
from codesign.explorer.logger_utils.logger_utils import setup_logger

logger = setup_logger("initialization", module="dnn_model")

DEFAULT_N_REP = 3
DEFAULT_F_DS = 2
INITIAL_EXPANSION = 2.0


@dataclass(frozen=True)
class InitSettings:
    input_dims: FeatureMap
    tile: TileShape
    n_rep: int = DEFAULT_N_REP
    f_ds: int = DEFAULT_F_DS
    construction: str = PURE_REPLICATION

    def __post_init__(self):
        if self.n_rep < 1:
            raise ModelError(f"Initial n_rep must be >= 1, got {self.n_rep}")
        if self.f_ds < 1:
            raise ModelError(f"Initial f_ds must be >= 1, got {self.f_ds}")


def initial_structure(n_rep: int, f_ds: int):
    """Down-sampling on at every boundary; channels double after each down-sampled replication."""
    boundaries = n_rep - 1
    x_ds = (1,) * boundaries
    pi_ch = tuple(INITIAL_EXPANSION if x else NO_EXPANSION for x in x_ds)
    return x_ds, (f_ds,) * boundaries, pi_ch


def initialize_dnn(
    bundle: Bundle,
    device: DeviceSpec,
    quant: QuantScheme,
    settings: InitSettings,
    char: IpCharacterization,
    dnn_calib: DnnCalibration = DnnCalibration(),
) -> DnnModel:
    """
    Build the starting point of the search for one bundle.

    Args:
        bundle: Bundle skeleton or configured bundle (its pf is replaced)
        device: Target device whose budget bounds the parallel factor
        quant: Quantization shared by every instance
        settings: Input dims, tile and initial structure
        char: IP characterization
        dnn_calib: DNN-level calibration constants

    Returns:
        DnnModel: The model at the largest feasible parallel factor

    Raises:
        InfeasibleError: If no parallel factor fits; names the binding resource
    """
    x_ds, f_ds, pi_ch = initial_structure(settings.n_rep, settings.f_ds)

    def build(pf: int) -> DnnModel:
        return DnnModel(
            bundle=bundle.configure(pf, quant),
            n_rep=settings.n_rep,
            x_ds=x_ds,
            f_ds=f_ds,
            pi_ch=pi_ch,
            input_dims=settings.input_dims,
            tile=settings.tile,
            calib=dnn_calib,
            construction=settings.construction,
        )

    binding = None
    for pf in sorted(char.pf_candidates, reverse=True):
        model = build(pf)
        usage = dnn_resource(model, char)
        if usage.fits_within(device.budget):
            logger.info(f"Initialized {bundle.label} ({bundle.name}) at pf={pf} on {device.name}")
            return model
        binding = usage.binding_resource(device.budget)
        logger.debug(f"{bundle.label}: pf={pf} exceeds {binding}")

    raise InfeasibleError(
        f"{bundle.label} ({bundle.name}) does not fit {device.name} at any parallel factor; "
        f"binding resource: {binding}",
        binding_resource=binding,
    )
