"""Exciton diffusion in rough bilayer films."""

from ._exciton import (
    DeviceConfig,
    DomainError,
    EstimationTrace,
    InputError,
    InterfaceModel,
    NumericalError,
    UniformDist,
    UnsupportedError,
    closed_form_pl,
    config_hash,
    estimate_sigma_1d,
    expected_pl_asymptotic,
    expected_pl_collocation,
    model_1d_curve,
    run_config,
    solve_1d,
    solve_2d,
)

__all__ = [
    "DeviceConfig",
    "DomainError",
    "EstimationTrace",
    "InputError",
    "InterfaceModel",
    "NumericalError",
    "UniformDist",
    "UnsupportedError",
    "closed_form_pl",
    "config_hash",
    "estimate_sigma_1d",
    "expected_pl_asymptotic",
    "expected_pl_collocation",
    "model_1d_curve",
    "run_config",
    "solve_1d",
    "solve_2d",
]
