"""
Core 모듈 - 수치 계산
"""

from .torus_grid import Grid, Field
from .nsk_dynamics import State, Trajectory, simulate, step
from .darcy_limit import StrongLift, lift_strong, solve_gradient_flow
from .entropy_diag import CheckReport, DiagRecord
from .rate_fit import RateFit, rate_fit

__all__ = [
    'Grid',
    'Field',
    'State',
    'Trajectory',
    'simulate',
    'step',
    'StrongLift',
    'lift_strong',
    'solve_gradient_flow',
    'CheckReport',
    'DiagRecord',
    'RateFit',
    'rate_fit',
]
