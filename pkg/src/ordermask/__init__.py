"""Masked diffusion with learnable per-position noise schedules."""

from ._kernels import BACKEND
from .denoiser import DenoiserConfig, DenoiserParams
from .errors import (
    BudgetError,
    DomainError,
    InvalidInputError,
    OrderMaskError,
    SchemaError,
    UnsupportedRegimeError,
)
from .losses import LossEstimate
from .schedule import MultivariateSchedule, ScheduleParams
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BudgetError",
    "DenoiserConfig",
    "DenoiserParams",
    "DomainError",
    "InvalidInputError",
    "LossEstimate",
    "MultivariateSchedule",
    "OrderMaskError",
    "SchemaError",
    "ScheduleParams",
    "TrainConfig",
    "UnsupportedRegimeError",
    "train",
]
