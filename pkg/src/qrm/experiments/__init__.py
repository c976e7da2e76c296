"""Forward solvers, manufactured cases and the numerical studies built on them."""

from .carleman_check import CarlemanCheckConfig, carleman_check
from .cases import CASES, CaseSetup, ManufacturedCase
from .forward import forward_heat, forward_wave
from .instability import backward_instability_demo
from .study import ConvergenceReport, convergence_study
from .tat import TatConfig, tat_reconstruct

__all__ = [
    "CASES",
    "CarlemanCheckConfig",
    "CaseSetup",
    "ConvergenceReport",
    "ManufacturedCase",
    "TatConfig",
    "backward_instability_demo",
    "carleman_check",
    "convergence_study",
    "forward_heat",
    "forward_wave",
    "tat_reconstruct",
]
