"""Dual-pathway MOx gas-sensing front-end: synthetic traces, behavioral
circuit simulation, time-difference codes and a nearest-centroid decoder."""

from .analog_blocks import LatchRaceError, Rails
from .config import CircuitConfig, default_config, load_config, save_config
from .decoder import Calibration, calibrate, evaluate, infer
from .events import ConcentrationVector, concentration_vector, delta_t_single, inverse_code
from .frontend import BACKENDS, Edge, EventLog, q_out_width, run_array, run_single_sensor
from .signal_model import (
    SensorModelParams,
    SensorTrace,
    Stimulus,
    Trial,
    campaign,
    default_sensor_params,
    load_trials,
    save_trials,
    synthesize_trace,
)

__version__ = "0.1.0"
