"""Hybrid physics/ML maneuvering models for a water-jet surface vessel.

A 3-DOF physical model identified by ridge regression, a feed-forward
residual network trained on top of it, a pure data-driven baseline, and a
synthetic "truth" vessel that stands in for free-running trial data.
"""
__version__ = "0.1.0"

from .hybrid import HybridResidualRegressor, PureDataDrivenRegressor, TrainConfig
from .identification import IdentificationError, RidgeConfig, SwayYawIdentifier, identify_surge, identify_sway_yaw
from .maneuver import ManeuverSpec
from .metrics import rmse, turning_diameter
from .model import ControlInput, MotionState, NondimScheme, Pose, SurgeCoeffs, SwayYawCoeffs, VesselParams
from .network import FfnWeights
from .rollout import PhysicalModel, Trajectory, rollout
from .trials import DisturbanceSpec, TrialLog, generate_trial, standard_dataset

__all__ = [
    "ControlInput",
    "DisturbanceSpec",
    "FfnWeights",
    "HybridResidualRegressor",
    "IdentificationError",
    "ManeuverSpec",
    "MotionState",
    "NondimScheme",
    "PhysicalModel",
    "Pose",
    "PureDataDrivenRegressor",
    "RidgeConfig",
    "SurgeCoeffs",
    "SwayYawCoeffs",
    "SwayYawIdentifier",
    "TrainConfig",
    "TrialLog",
    "Trajectory",
    "VesselParams",
    "generate_trial",
    "identify_surge",
    "identify_sway_yaw",
    "rmse",
    "rollout",
    "standard_dataset",
    "turning_diameter",
]
