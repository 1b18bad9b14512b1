"""
궤적 저장소 - 매니페스트, 스냅샷 바이너리, 진단 CSV
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import Params
from core.darcy_limit import gradient_flow_energy
from core.entropy_diag import CSV_COLUMNS, DiagRecord
from core.nsk_dynamics import Trajectory
from core.torus_grid import Field, Grid
from services.output_writer import write_bytes, write_frame, write_json

logger = logging.getLogger(__name__)

BINARY_DTYPE = "<f8"


def diagnostics_frame(records: Sequence[DiagRecord]) -> pd.DataFrame:
    """DiagRecord 목록 → diagnostics.csv 형식"""
    return pd.DataFrame([r.to_row() for r in records], columns=list(CSV_COLUMNS))


def write_field_csv(field: Field, path: Path):
    frame = pd.DataFrame({"x": field.grid.nodes, "value": field.values})
    write_frame(Path(path), frame)


def write_field_binary(field: Field, path: Path):
    """JSON 헤더 한 줄 + float64 배열"""
    header = {
        "n_points": field.grid.n_points,
        "length": field.grid.length,
        "time": field.time,
        "name": field.name,
        "dtype": BINARY_DTYPE,
    }
    payload = (json.dumps(header) + "\n").encode("utf-8") + np.ascontiguousarray(field.values, dtype=BINARY_DTYPE).tobytes()
    write_bytes(Path(path), payload)


def read_field_binary(path: Path) -> Field:
    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("utf-8"))
    values = np.frombuffer(raw[newline + 1:], dtype=header.get("dtype", BINARY_DTYPE)).copy()
    grid = Grid(int(header["n_points"]), float(header["length"]))
    return Field(grid, values, name=header["name"], time=header["time"])


def _grid_dict(grid: Grid) -> Dict[str, Any]:
    return {"n_points": grid.n_points, "length": grid.length, "dim": grid.dim}


def write_trajectory(trajectory: Trajectory, run_dir: Path, write_snapshots: bool = False,
                     extra: Optional[Dict[str, Any]] = None) -> Path:
    """완화/NSK 궤적 저장"""
    run_dir = Path(run_dir)
    snapshot_files: List[Dict[str, str]] = []
    if write_snapshots:
        for index, state in enumerate(trajectory.snapshots):
            names = {}
            for name in ("rho", "m", "J"):
                rel = f"snapshots/{index:05d}_{name}.bin"
                write_field_binary(state.field(name), run_dir / rel)
                names[name] = rel
            snapshot_files.append(names)

    write_frame(run_dir / "diagnostics.csv", diagnostics_frame(trajectory.diagnostics))
    manifest = {
        "kind": trajectory.kind,
        "params": trajectory.params.to_dict(encode_json=True),
        "grid": _grid_dict(trajectory.grid),
        "sample_times": trajectory.times,
        "n_steps": trajectory.n_steps,
        "dt_max": trajectory.dt_max,
        "snapshots": snapshot_files,
        **(extra or {}),
    }
    write_json(run_dir / "manifest.json", manifest)
    logger.info(f"💾 궤적 저장: {run_dir} ({len(trajectory.snapshots)} 샘플)")
    return run_dir


def write_gradient_flow(samples: Sequence[Tuple[float, np.ndarray]], grid: Grid, params: Params,
                        run_dir: Path, write_snapshots: bool = False,
                        extra: Optional[Dict[str, Any]] = None) -> Path:
    """그래디언트 플로우 궤적 저장 (kind: gradient_flow)"""
    run_dir = Path(run_dir)
    rows, snapshot_files = [], []
    for index, (time, rho_bar) in enumerate(samples):
        rows.append({
            "t": time,
            "mass": grid.integrate(rho_bar),
            "energy": gradient_flow_energy(rho_bar, grid, params),
        })
        if write_snapshots:
            rel = f"snapshots/{index:05d}_rho_bar.bin"
            write_field_binary(Field(grid, rho_bar, name="rho_bar", time=time), run_dir / rel)
            snapshot_files.append({"rho_bar": rel})

    write_frame(run_dir / "diagnostics.csv", pd.DataFrame(rows, columns=["t", "mass", "energy"]))
    manifest = {
        "kind": "gradient_flow",
        "params": params.to_dict(encode_json=True),
        "grid": _grid_dict(grid),
        "sample_times": [t for t, _ in samples],
        "snapshots": snapshot_files,
        **(extra or {}),
    }
    write_json(run_dir / "manifest.json", manifest)
    return run_dir


def read_sweep(sweep_dir: Path) -> pd.DataFrame:
    """저장된 스윕 결과 (sweep.csv) 로드"""
    path = Path(sweep_dir) / "sweep.csv"
    if not path.exists():
        raise FileNotFoundError(f"sweep.csv 없음: {path}")
    frame = pd.read_csv(path)
    missing = {"epsilon", "psi_final"} - set(frame.columns)
    if missing:
        raise ValueError(f"sweep.csv 열 누락: {sorted(missing)}")
    return frame
