"""Persistence: trajectory CSV, model and report JSON, SVG figures.

All numeric serialization uses the shortest round-trip decimal
representation (Python's float repr), so write/read cycles recover the
exact binary values and identical inputs produce byte-identical files.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .edmd import LiftedBilinearModel, SnapshotData
from .errors import FormatError
from .systems import Trajectory

MODEL_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# CSV time series
# ---------------------------------------------------------------------------


def _fmt(x):
    return repr(float(x))


def write_trajectory_csv(path, trajectories):
    """Write one or more trajectories; blocks separated by blank lines.

    Header is t,x1,...,xd,u; the u cell is empty for unforced rows and for
    the final state of a forced run.
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    if not trajectories:
        raise ValueError("need at least one trajectory")
    d = trajectories[0].state_dim
    cols = ["t"] + [f"x{j + 1}" for j in range(d)] + ["u"]
    lines = [",".join(cols)]
    for ti, traj in enumerate(trajectories):
        if traj.state_dim != d:
            raise ValueError("trajectories must share the state dimension")
        if ti > 0:
            lines.append("")
        n_rows = traj.states.shape[0]
        for r in range(n_rows):
            t_val = r * traj.dt if traj.dt is not None else r
            u_cell = ""
            if traj.inputs is not None and r < traj.inputs.shape[0]:
                u_cell = _fmt(traj.inputs[r])
            cells = [_fmt(t_val)] + [_fmt(v) for v in traj.states[r]] + [u_cell]
            lines.append(",".join(cells))
    payload = "\n".join(lines) + "\n"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(payload)
    return path


def _parse_block(rows, d, start_line):
    states = np.empty((len(rows), d))
    inputs = []
    for i, (lineno, cells) in enumerate(rows):
        try:
            states[i] = [float(c) for c in cells[1 : 1 + d]]
        except ValueError as exc:
            raise FormatError(f"line {lineno}: malformed state value") from exc
        u_cell = cells[1 + d]
        if u_cell != "":
            try:
                inputs.append(float(u_cell))
            except ValueError as exc:
                raise FormatError(f"line {lineno}: malformed input value") from exc
    if not np.isfinite(states).all():
        raise FormatError(f"block starting at line {start_line}: non-finite state")
    if inputs and len(inputs) not in (len(rows), len(rows) - 1):
        raise FormatError(
            f"block starting at line {start_line}: input column length mismatch"
        )
    inp = np.asarray(inputs[: len(rows) - 1]) if inputs else None
    if inp is not None and not np.isfinite(inp).all():
        raise FormatError(f"block starting at line {start_line}: non-finite input")
    return states, inp


def read_trajectories_csv(path):
    """Read blank-line-separated trajectory blocks; returns list[Trajectory].

    The time column is used only to recover the step size of flow systems
    (dt = t1 - t0 when it differs from one).
    """
    with open(path, "r", encoding="ascii") as fh:
        raw_lines = fh.read().splitlines()
    if not raw_lines:
        raise FormatError("empty file")
    header = raw_lines[0].split(",")
    if len(header) < 3 or header[0] != "t" or header[-1] != "u":
        raise FormatError(f"line 1: expected header t,x1,...,xd,u, got {raw_lines[0]!r}")
    d = len(header) - 2
    blocks = []
    current = []
    times = []
    cur_times = []
    start = 2
    for lineno, line in enumerate(raw_lines[1:], start=2):
        if line.strip() == "":
            if current:
                blocks.append((start, current))
                times.append(cur_times)
                current, cur_times = [], []
            start = lineno + 1
            continue
        cells = line.split(",")
        if len(cells) != d + 2:
            raise FormatError(f"line {lineno}: expected {d + 2} cells, got {len(cells)}")
        try:
            cur_times.append(float(cells[0]))
        except ValueError as exc:
            raise FormatError(f"line {lineno}: malformed time value") from exc
        current.append((lineno, cells))
    if current:
        blocks.append((start, current))
        times.append(cur_times)
    if not blocks:
        raise FormatError("file holds no data rows")
    out = []
    for (start_line, rows), ts in zip(blocks, times):
        states, inputs = _parse_block(rows, d, start_line)
        dt = None
        if len(ts) >= 2:
            step = ts[1] - ts[0]
            dt = step if abs(step - 1.0) > 1e-12 else None
        out.append(Trajectory(states=states, inputs=inputs, dt=dt))
    return out


def snapshots_from_trajectories(trajectories):
    """Consecutive-pair snapshots; blocks never pair across the gap."""
    xs, ys = [], []
    for traj in trajectories:
        if traj.states.shape[0] >= 2:
            xs.append(traj.states[:-1])
            ys.append(traj.states[1:])
    if not xs:
        raise FormatError("no consecutive pairs in file")
    return SnapshotData(np.vstack(xs), np.vstack(ys))


def read_timeseries_csv(path, want="snapshots"):
    """Read a time-series CSV as snapshot pairs or raw trajectories."""
    trajectories = read_trajectories_csv(path)
    if want == "snapshots":
        return snapshots_from_trajectories(trajectories)
    if want == "trajectories":
        return trajectories
    raise ValueError(f"unknown want={want!r}")


# ---------------------------------------------------------------------------
# model JSON
# ---------------------------------------------------------------------------


def _matrix_to_json(M):
    return {"shape": list(M.shape), "data": [[float(v) for v in row] for row in M]}


def _matrix_from_json(obj, what):
    M = np.asarray(obj["data"], dtype=np.float64)
    if list(M.shape) != list(obj["shape"]):
        raise FormatError(f"{what}: declared shape {obj['shape']} != data {M.shape}")
    return M


def data_fingerprint(data):
    """Stable hash of a snapshot set (content-addressed provenance)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.X).tobytes())
    h.update(np.ascontiguousarray(data.Y).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class ModelFile:
    model: LiftedBilinearModel
    provenance: dict


def write_model(path, model, provenance=None):
    """Serialize a lifted model (format_version 1) with full precision."""
    eigs = model.eigenvalues
    if eigs is None:
        eigs = np.linalg.eigvals(model.A)
    obj = {
        "format_version": MODEL_FORMAT_VERSION,
        "dictionary": model.dictionary.to_json_dict(),
        "matrices": {
            "A": _matrix_to_json(model.A),
            "B": _matrix_to_json(model.B),
            "C": _matrix_to_json(model.C),
            "W": _matrix_to_json(model.W),
        },
        "eigenvalues": [[float(l.real), float(l.imag)] for l in eigs],
        "provenance": provenance or {},
    }
    payload = json.dumps(obj, indent=1, sort_keys=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(payload + "\n")
    return path


def read_model(path):
    """Load a model file; rejects unknown format versions."""
    with open(path, "r", encoding="ascii") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(
                f"model file is not valid JSON at line {exc.lineno}, "
                f"column {exc.colno}"
            ) from exc
    version = obj.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"unsupported model format_version {version!r}; "
            f"this build reads version {MODEL_FORMAT_VERSION}"
        )
    dic = Dictionary.from_json_dict(obj["dictionary"])
    mats = obj["matrices"]
    eigs = np.array([complex(re, im) for re, im in obj["eigenvalues"]])
    model = LiftedBilinearModel(
        A=_matrix_from_json(mats["A"], "A"),
        B=_matrix_from_json(mats["B"], "B"),
        C=_matrix_from_json(mats["C"], "C"),
        W=_matrix_from_json(mats["W"], "W"),
        dictionary=dic,
        eigenvalues=eigs,
    )
    return ModelFile(model=model, provenance=obj.get("provenance", {}))


def write_json(path, obj):
    """Deterministic JSON dump shared by reports and manifests."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")
    return path


def read_json(path):
    with open(path, "r", encoding="ascii") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# SVG figures
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return [float(v) for v in raw]


def emit_plot_svg(series, path, title="", xlabel="x", ylabel="y",
                  width=640, height=480):
    """Standalone SVG with axes, tick labels and a legend.

    series: list of (label, points) with points an (N, 2) array.  Output is
    a deterministic function of the inputs.
    """
    if not series:
        raise ValueError("series list is empty")
    margin = 56
    all_pts = np.vstack([np.asarray(p, dtype=float) for _, p in series])
    if all_pts.ndim != 2 or all_pts.shape[1] != 2:
        raise ValueError("each series must be an (N, 2) point array")
    x_lo, x_hi = float(all_pts[:, 0].min()), float(all_pts[:, 0].max())
    y_lo, y_hi = float(all_pts[:, 1].min()), float(all_pts[:, 1].max())
    if x_hi - x_lo < 1e-30:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi - y_lo < 1e-30:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad_x = 0.04 * (x_hi - x_lo)
    pad_y = 0.04 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - pad_x, x_hi + pad_x
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    def sx(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(
            f'<text x="{width / 2:.1f}" y="24" font-size="16" '
            f'text-anchor="middle" font-family="sans-serif">{title}</text>'
        )
    # axes box
    out.append(
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="black"/>'
    )
    for v in _ticks(x_lo, x_hi):
        px = sx(v)
        out.append(
            f'<line x1="{px:.2f}" y1="{height - margin}" x2="{px:.2f}" '
            f'y2="{height - margin + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{px:.2f}" y="{height - margin + 18}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{v:.3g}</text>'
        )
    for v in _ticks(y_lo, y_hi):
        py = sy(v)
        out.append(
            f'<line x1="{margin - 5}" y1="{py:.2f}" x2="{margin}" '
            f'y2="{py:.2f}" stroke="black"/>'
        )
        out.append(
            f'<text x="{margin - 8}" y="{py + 3:.2f}" font-size="10" '
            f'text-anchor="end" font-family="sans-serif">{v:.3g}</text>'
        )
    out.append(
        f'<text x="{width / 2:.1f}" y="{height - 12}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">{xlabel}</text>'
    )
    out.append(
        f'<text x="16" y="{height / 2:.1f}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 16 {height / 2:.1f})">'
        f"{ylabel}</text>"
    )
    for idx, (label, pts) in enumerate(series):
        pts = np.asarray(pts, dtype=float)
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(f"{sx(px):.2f},{sy(py):.2f}" for px, py in pts)
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
            f'points="{coords}"/>'
        )
        ly = margin + 16 + 16 * idx
        out.append(
            f'<line x1="{width - margin - 120}" y1="{ly - 4}" '
            f'x2="{width - margin - 96}" y2="{ly - 4}" stroke="{color}" '
            f'stroke-width="2"/>'
        )
        out.append(
            f'<text x="{width - margin - 90}" y="{ly}" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    out.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def emit_heatmap_svg(counts, bounds, path, title="", width=560, height=520):
    """Density heatmap (occupancy histogram) as a grid of filled cells.

    counts: (nx, ny) array, row i = x-bin, column j = y-bin; bounds =
    (xmin, xmax, ymin, ymax).  Zero cells stay white; mass is mapped
    through a log-ish gray-to-blue ramp.  Deterministic output.
    """
    counts = np.asarray(counts, dtype=float)
    nx, ny = counts.shape
    xmin, xmax, ymin, ymax = bounds
    margin = 48
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    peak = counts.max()
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{width / 2:.1f}" y="24" font-size="15" '
            f'text-anchor="middle" font-family="sans-serif">{title}</text>'
        )
    cell_w = plot_w / nx
    cell_h = plot_h / ny
    for i in range(nx):
        for j in range(ny):
            v = counts[i, j]
            if v <= 0.0 or peak <= 0.0:
                continue
            # log ramp keeps thin attractors visible
            level = np.log1p(v / peak * 255.0) / np.log(256.0)
            shade = int(240 - 220 * level)
            px = margin + i * cell_w
            py = height - margin - (j + 1) * cell_h
            out.append(
                f'<rect x="{px:.2f}" y="{py:.2f}" width="{cell_w + 0.35:.2f}" '
                f'height="{cell_h + 0.35:.2f}" fill="rgb({shade},{shade},240)"/>'
            )
    out.append(
        f'<rect x="{margin}" y="{margin}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black"/>'
    )
    for frac, value in ((0.0, xmin), (0.5, 0.5 * (xmin + xmax)), (1.0, xmax)):
        px = margin + frac * plot_w
        out.append(
            f'<text x="{px:.1f}" y="{height - margin + 16}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{value:.3g}</text>'
        )
    for frac, value in ((0.0, ymin), (0.5, 0.5 * (ymin + ymax)), (1.0, ymax)):
        py = height - margin - frac * plot_h
        out.append(
            f'<text x="{margin - 6}" y="{py + 3:.1f}" font-size="10" '
            f'text-anchor="end" font-family="sans-serif">{value:.3g}</text>'
        )
    out.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(out) + "\n")
    return path
