__version__ = "0.1.0"

from .bootstrap import BootstrapConfig, bootstrap_irf
from .dgp import DgpSpec, generate, simulate
from .errors import DataError, HdsvarError, NumericalError, UsageError
from .inference import FevdInference, ci_boot, ci_gaussian, fevd_network
from .model_core import SparseVarModel, TimeSeriesPanel
from .pipeline import ImpulseInference, PipelineConfig, Target, estimate, evaluate
