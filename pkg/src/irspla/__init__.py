"""irspla - physical-layer authentication with IRS channel fingerprints and active GP classification."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("irspla")
except PackageNotFoundError:  # pragma: no cover - package not installed
    __version__ = "0.0.0"

from .acquisition import STRATEGIES, STRATEGY_NAMES, AcquisitionConfig, UtilityReport, acquire  # noqa: E402
from .channel import (  # noqa: E402
    ChannelScenario,
    FadingParams,
    Geometry,
    IrsConfig,
    cascade_channel,
    estimate_fingerprint,
    irs_amplitude,
    path_loss_db,
    sample_channel,
)
from .config import ExperimentConfig, load_config  # noqa: E402
from .dataset import FingerprintDataset, generate_dataset  # noqa: E402
from .gaussian import Gaussian1D, GaussianND, ProbitMoments, probit_gaussian_moments  # noqa: E402
from .gpc import GpcModel, ep_fit, predict, predict_label, predict_proba  # noqa: E402
from .hyper import SearchSpace, fit_hyperparameters  # noqa: E402
from .joint import JointPredictive, conditional_predict, joint_predict  # noqa: E402
from .kernel import Kernel  # noqa: E402
from .learning import KernelPolicy, LearningCurve, egpc_loop  # noqa: E402
from .metrics import compute_error_difference, compute_error_rate  # noqa: E402

__all__ = [
    "STRATEGIES",
    "STRATEGY_NAMES",
    "AcquisitionConfig",
    "ChannelScenario",
    "ExperimentConfig",
    "FadingParams",
    "FingerprintDataset",
    "Gaussian1D",
    "GaussianND",
    "Geometry",
    "GpcModel",
    "IrsConfig",
    "JointPredictive",
    "Kernel",
    "KernelPolicy",
    "LearningCurve",
    "ProbitMoments",
    "SearchSpace",
    "UtilityReport",
    "__version__",
    "acquire",
    "cascade_channel",
    "compute_error_difference",
    "compute_error_rate",
    "conditional_predict",
    "egpc_loop",
    "ep_fit",
    "estimate_fingerprint",
    "fit_hyperparameters",
    "generate_dataset",
    "irs_amplitude",
    "joint_predict",
    "load_config",
    "path_loss_db",
    "predict",
    "predict_label",
    "predict_proba",
    "probit_gaussian_moments",
    "sample_channel",
]
