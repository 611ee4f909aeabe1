"""Magnetometer-free inertial attitude estimation toolkit."""
from . import quat
from .augment import AugmentConfig, StandardizationStats
from .datasets import Scenario, build_scenario, load_sequence, save_sequence
from .evaluation import EvalReport, evaluate, frequency_sweep, rmse_deg
from .filters import FilterParams, FilterState, accel_init, filter_step, run_filter, tune_filter
from .gru import GruLayerWeights, GruNetwork, init_network, load_weights, network_forward, save_weights
from .imu_sim import ErrorSpec, MotionProfile, generate, inject_errors, prepend_rest, strapdown_gyro
from .resample import RateGridStrategy, jitr_wrap, rate_grid, resample_quat, resample_signal
from .sequence import ImuSequence
from .training import TrainConfig, TrainHistory, train

__version__ = "0.1.0"
