"""CSV/JSON/SVG round trips and schema validation."""

import json

import numpy as np
import pytest

from koopctl.dictionary import build_dictionary
from koopctl.edmd import SnapshotData, fit_lifted_model
from koopctl.errors import FormatError
from koopctl.io import (
    data_fingerprint,
    emit_plot_svg,
    read_model,
    read_timeseries_csv,
    read_trajectories_csv,
    write_model,
    write_trajectory_csv,
)
from koopctl.systems import Trajectory, VanDerPol, VanDerPolParams, simulate_unforced


def test_csv_single_trajectory_pairs(tmp_path):
    path = tmp_path / "one.csv"
    states = np.array([[0.0, 1.0], [0.5, 0.25], [1.0, -0.125]])
    write_trajectory_csv(path, Trajectory(states=states, inputs=None, dt=None))
    data = read_timeseries_csv(path, want="snapshots")
    assert data.n_samples == 2
    np.testing.assert_array_equal(data.X, states[:-1])
    np.testing.assert_array_equal(data.Y, states[1:])


def test_csv_blank_line_blocks_do_not_pair_across(tmp_path):
    path = tmp_path / "two.csv"
    t1 = Trajectory(states=np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]),
                    inputs=None, dt=None)
    t2 = Trajectory(states=np.array([[9.0, 9.0], [8.0, 8.0], [7.0, 7.0]]),
                    inputs=None, dt=None)
    write_trajectory_csv(path, [t1, t2])
    data = read_timeseries_csv(path, want="snapshots")
    assert data.n_samples == 4
    # no pair spans (2,2) -> (9,9)
    for x, y in zip(data.X, data.Y):
        assert abs(y[0] - x[0]) <= 1.0


def test_csv_round_trip_exact_values(tmp_path):
    vdp = VanDerPol(VanDerPolParams(mu=1.0, dt=0.01))
    traj = simulate_unforced(vdp, np.array([0.3777, -1.2345]), 200)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, traj)
    back = read_trajectories_csv(path)[0]
    assert back.states.tobytes() == traj.states.tobytes()
    assert back.dt == pytest.approx(0.01)


def test_csv_forced_inputs_round_trip(tmp_path):
    states = np.array([[0.0, 0.0], [1.0, 0.5], [0.25, -0.125]])
    inputs = np.array([0.7, -0.3])
    traj = Trajectory(states=states, inputs=inputs, dt=None)
    path = tmp_path / "forced.csv"
    write_trajectory_csv(path, traj)
    back = read_trajectories_csv(path)[0]
    assert back.inputs is not None
    assert back.inputs.tobytes() == inputs.tobytes()


def test_csv_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x1,x2,u\n0,0.0,0.0,\n1,WAT,0.0,\n")
    with pytest.raises(FormatError, match="line 3"):
        read_timeseries_csv(path)


def test_csv_rejects_nonfinite(tmp_path):
    path = tmp_path / "inf.csv"
    path.write_text("t,x1,x2,u\n0,0.0,0.0,\n1,inf,0.0,\n")
    with pytest.raises(FormatError, match="non-finite"):
        read_timeseries_csv(path)


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(FormatError, match="header"):
        read_timeseries_csv(path)


def fitted_model():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(60, 2))
    M_map = np.array([[0.4, 0.3], [-0.3, 0.4]])
    data = SnapshotData(X, X @ M_map.T)
    dic = build_dictionary(2, 2, False)
    model, _ = fit_lifted_model(data, dic, np.zeros((60, 2)))
    return model, data


def test_model_round_trip_bitwise(tmp_path):
    model, data = fitted_model()
    path = tmp_path / "model.json"
    write_model(path, model, provenance={"data_hash": data_fingerprint(data),
                                         "fit_timestamp": None,
                                         "residuals": {}})
    loaded = read_model(path)
    for name in ("A", "B", "C", "W"):
        a = getattr(model, name)
        b = getattr(loaded.model, name)
        assert a.tobytes() == b.tobytes(), name
    np.testing.assert_array_equal(
        loaded.model.dictionary.exponents, model.dictionary.exponents
    )
    np.testing.assert_array_equal(loaded.model.eigenvalues, model.eigenvalues)
    assert loaded.provenance["data_hash"] == data_fingerprint(data)


def test_model_write_is_deterministic(tmp_path):
    model, _ = fitted_model()
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    write_model(p1, model)
    write_model(p2, model)
    assert p1.read_bytes() == p2.read_bytes()


def test_model_truncated_file_reports_position(tmp_path):
    model, _ = fitted_model()
    path = tmp_path / "model.json"
    write_model(path, model)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(FormatError, match="line"):
        read_model(path)


def test_model_unknown_version_rejected(tmp_path):
    model, _ = fitted_model()
    path = tmp_path / "model.json"
    write_model(path, model)
    obj = json.loads(path.read_text())
    obj["format_version"] = 2
    path.write_text(json.dumps(obj))
    with pytest.raises(FormatError, match="format_version"):
        read_model(path)


def test_model_shape_mismatch_rejected(tmp_path):
    model, _ = fitted_model()
    path = tmp_path / "model.json"
    write_model(path, model)
    obj = json.loads(path.read_text())
    obj["matrices"]["A"]["shape"] = [3, 3]
    path.write_text(json.dumps(obj))
    with pytest.raises(FormatError, match="shape"):
        read_model(path)


def test_svg_single_polyline(tmp_path):
    path = tmp_path / "p.svg"
    emit_plot_svg([("s", np.array([[0.0, 0.0], [1.0, 1.0]]))], path)
    text = path.read_text()
    assert text.count("<polyline") == 1
    assert "<svg" in text and "</svg>" in text


def test_svg_two_series_with_legend(tmp_path):
    path = tmp_path / "p2.svg"
    th = np.linspace(0, 2 * np.pi, 50)
    emit_plot_svg(
        [
            ("open loop", np.column_stack([2 * np.cos(th), 2 * np.sin(th)])),
            ("closed loop", np.column_stack([np.exp(-th) * np.cos(th),
                                             np.exp(-th) * np.sin(th)])),
        ],
        path,
        title="comparison",
    )
    text = path.read_text()
    assert text.count("<polyline") == 2
    assert "open loop" in text and "closed loop" in text


def test_svg_rejects_empty_series(tmp_path):
    with pytest.raises(ValueError):
        emit_plot_svg([], tmp_path / "x.svg")


def test_random_trajectory_round_trips(tmp_path):
    rng = np.random.default_rng(77)
    for trial in range(10):
        n = int(rng.integers(2, 30))
        d = int(rng.integers(1, 4))
        states = rng.normal(scale=10.0 ** rng.integers(-8, 9), size=(n, d))
        forced = bool(rng.integers(0, 2))
        inputs = rng.normal(size=n - 1) if forced else None
        dt = float(rng.uniform(0.001, 0.1)) if rng.integers(0, 2) else None
        traj = Trajectory(states=states, inputs=inputs, dt=dt)
        path = tmp_path / f"r{trial}.csv"
        write_trajectory_csv(path, traj)
        back = read_trajectories_csv(path)[0]
        assert back.states.tobytes() == states.tobytes()
        if forced:
            assert back.inputs.tobytes() == inputs.tobytes()
        else:
            assert back.inputs is None


def test_svg_deterministic(tmp_path):
    pts = np.array([[0.0, 1.0], [2.0, -1.0], [3.0, 0.5]])
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_plot_svg([("s", pts)], p1)
    emit_plot_svg([("s", pts)], p2)
    assert p1.read_bytes() == p2.read_bytes()
