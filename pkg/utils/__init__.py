"""
Utils 모듈
"""

from .errors import (
    NSKError, DomainError, PositivityError, CFLViolation, ResolutionError,
    NonFiniteError, AlignmentError, SimulationFailure, ConfigError,
)
from .spectral_cache import spectral_cache, SpectralCache
from .progress_tracker import ProgressTracker, StudyStage
from .run_executor import ParallelRunExecutor, RunOutcome

__all__ = [
    'NSKError',
    'DomainError',
    'PositivityError',
    'CFLViolation',
    'ResolutionError',
    'NonFiniteError',
    'AlignmentError',
    'SimulationFailure',
    'ConfigError',
    'spectral_cache',
    'SpectralCache',
    'ProgressTracker',
    'StudyStage',
    'ParallelRunExecutor',
    'RunOutcome',
]
