"""himon: modular health-indicator monitoring.

Per-sensor denoising LSTM autoencoders score a sliding window of each sensor
stream by reconstruction error; a supervisor aggregates the scores into a
joint indicator. Boundaries are calibrated from an assumed-healthy burn-in
period, so no historical failure data is needed.
"""

from .component import (BOUND_MEAN_PLUS_NINE_SIGMA, BOUND_NINE_SIGMA,
                        ComponentModel, HiRecord, Normalizer, SensorSpec,
                        burn_in_fit, calibrate_bound, compute_hi,
                        fit_normalizer, make_windows, step)
from .data import SegmentedSeries
from .engine import Engine, EngineConfig, RunLog, StepOutput, create_engine, run_replay
from .errors import (ConfigurationError, DataError, DimensionError, HimonError,
                     InsufficientDataError, ModelFormatError, NumericalError,
                     ParseError, SetupError, TrainingError)
from .kernels import BACKEND
from .modelio import load_model, save_model
from .nn import (DaeParams, LstmLayerParams, TrainConfig, TrainReport,
                 adam_step, corrupt, dae_forward, dae_gradient,
                 finite_diff_gradient, init_dae_params, lstm_forward,
                 reconstruction_loss, train_dae)
from .supervisor import (AlarmEvent, JointRecord, SupervisorModel,
                         calibrate_joint_bound, evaluate, joint_hi)

__version__ = "0.1.0"
