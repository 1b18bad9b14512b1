import json

import numpy as np
import pandas as pd
import pytest

from config import Params
from core.entropy_diag import CSV_COLUMNS, DiagRecord
from core.nsk_dynamics import State, Trajectory
from core.torus_grid import Field
from services.output_writer import write_json
from services.trajectory_store import (
    diagnostics_frame, read_field_binary, read_sweep, write_field_binary, write_gradient_flow, write_trajectory,
)


def test_binary_field_keeps_header_and_values(tmp_path, grid32):
    values = np.sin(grid32.nodes) + 2.0
    path = tmp_path / "snapshots" / "rho.bin"
    write_field_binary(Field(grid32, values, name="rho", time=0.25), path)
    field = read_field_binary(path)
    assert field.grid == grid32
    assert field.name == "rho"
    assert field.time == 0.25
    np.testing.assert_array_equal(field.values, values)


def test_diagnostics_frame_columns():
    frame = diagnostics_frame([DiagRecord(time=0.0, mass=1.0, energy=2.0)])
    assert list(frame.columns) == list(CSV_COLUMNS)
    assert np.isnan(frame.loc[0, "psi_gamma"])


def test_write_trajectory(tmp_path, grid32, params):
    trajectory = Trajectory(params=params, grid=grid32, dt_max=1e-3, n_steps=10)
    for t in (0.0, 0.01):
        state = State(time=t, rho=np.full(32, 2.0), m=np.zeros(32), J=np.zeros(32), grid=grid32)
        trajectory.append(state, DiagRecord(time=t, mass=4 * np.pi, energy=8 * np.pi))

    run_dir = write_trajectory(trajectory, tmp_path / "run", write_snapshots=True, extra={"status": "ok"})
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["sample_times"] == [0.0, 0.01]
    assert manifest["status"] == "ok"
    assert manifest["params"]["gamma"] == params.gamma
    assert len(manifest["snapshots"]) == 2

    frame = pd.read_csv(run_dir / "diagnostics.csv")
    assert frame["t"].tolist() == [0.0, 0.01]
    restored = read_field_binary(run_dir / manifest["snapshots"][1]["rho"])
    assert restored.time == 0.01


def test_write_gradient_flow(tmp_path, grid32):
    params = Params()
    samples = [(0.0, np.full(32, 2.0)), (0.1, np.full(32, 2.0))]
    run_dir = write_gradient_flow(samples, grid32, params, tmp_path / "gf")
    frame = pd.read_csv(run_dir / "diagnostics.csv")
    assert list(frame.columns) == ["t", "mass", "energy"]
    assert frame["mass"].iloc[0] == pytest.approx(4 * np.pi)
    assert json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))["kind"] == "gradient_flow"


def test_json_writer_maps_nonfinite_to_null(tmp_path):
    path = tmp_path / "out.json"
    write_json(path, {"value": float("nan"), "array": np.arange(3), "scalar": np.float64(1.5)})
    assert json.loads(path.read_text(encoding="utf-8")) == {"value": None, "array": [0, 1, 2], "scalar": 1.5}
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]


class TestReadSweep:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_sweep(tmp_path)

    def test_missing_columns(self, tmp_path):
        pd.DataFrame({"epsilon": [0.1]}).to_csv(tmp_path / "sweep.csv", index=False)
        with pytest.raises(ValueError):
            read_sweep(tmp_path)

    def test_reads_frame(self, tmp_path):
        pd.DataFrame({"epsilon": [0.2, 0.1], "psi_final": [1e-3, 6e-5]}).to_csv(tmp_path / "sweep.csv", index=False)
        assert read_sweep(tmp_path)["epsilon"].tolist() == [0.2, 0.1]
