"""
Services 모듈 - 결과 저장
"""

from .output_writer import write_json, write_frame, write_bytes
from .trajectory_store import (
    diagnostics_frame, write_trajectory, write_gradient_flow, write_field_csv,
    write_field_binary, read_field_binary, read_sweep,
)

__all__ = [
    'write_json',
    'write_frame',
    'write_bytes',
    'diagnostics_frame',
    'write_trajectory',
    'write_gradient_flow',
    'write_field_csv',
    'write_field_binary',
    'read_field_binary',
    'read_sweep',
]
