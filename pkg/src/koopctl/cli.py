"""Command-line pipeline: gen-data, fit, ctrb, synth, simulate, plot, pipeline.

Exit codes: 0 success, 2 trajectory blow-up, 3 EDMD failure, 4 synthesis
infeasible, 5 synthesis unbounded, 64 usage error.  Every command writes a
manifest JSON (inputs, seeds, package version) next to its outputs, and
KOOPCTL_OUT provides the default output directory.
"""

import argparse
import json
import os
import sys
from importlib import metadata

import numpy as np

from . import io as io_mod
from .controllability import controllability_report
from .dictionary import build_dictionary
from .edmd import fit_lifted_model
from .errors import BlowupError, FitError, FormatError, KoopctlError
from .pipeline import run_henon_recipe, run_vdp_recipe
from .synthesis import SynthesisConfig, solve_detmax
from .systems import (
    Henon,
    HenonParams,
    VanDerPol,
    VanDerPolParams,
    closed_loop_simulate,
    simulate_unforced,
)

EXIT_OK = 0
EXIT_BLOWUP = 2
EXIT_FIT = 3
EXIT_INFEASIBLE = 4
EXIT_UNBOUNDED = 5
EXIT_USAGE = 64

# named state-dependent input maps; constant vectors come via "--g 0,1"
G_REGISTRY = {
    "unit_last": lambda x: np.eye(len(x))[-1],
    "zero": lambda x: np.zeros(len(x)),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _package_version():
    try:
        return metadata.version("koopctl")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "unknown"


def _parse_vector(text, name):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise SystemExit(EXIT_USAGE) from None


def _resolve_g(spec, state_dim):
    if spec in G_REGISTRY:
        return G_REGISTRY[spec]
    vec = _parse_vector(spec, "--g")
    if vec.shape != (state_dim,):
        sys.stderr.write(
            f"--g expects {state_dim} components or a registry name, got {spec!r}\n"
        )
        raise SystemExit(EXIT_USAGE)
    return lambda x: vec


def _make_system(ns):
    if ns.system == "vdp":
        return VanDerPol(VanDerPolParams(mu=ns.mu, dt=ns.dt))
    if ns.system == "henon":
        return Henon(HenonParams(a=ns.a, b=ns.b))
    raise SystemExit(EXIT_USAGE)


def _out_dir(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    return d


def _write_manifest(directory, command, ns, outputs):
    body = {
        "command": command,
        "arguments": {
            k: v for k, v in sorted(vars(ns).items()) if k != "func" and v is not None
        },
        "seed": getattr(ns, "seed", None),
        "package_version": _package_version(),
        "outputs": sorted(outputs),
    }
    io_mod.write_json(os.path.join(directory, f"manifest-{command}.json"), body)


def _cmd_gen_data(ns):
    system = _make_system(ns)
    rng = np.random.default_rng(ns.seed)
    if ns.x0:
        x0s = [_parse_vector(t, "--x0") for t in ns.x0]
    elif ns.random_x0:
        box = 3.0 if ns.system == "vdp" else 0.25
        x0s = list(rng.uniform(-box, box, size=(ns.random_x0, 2)))
    else:
        box = 3.0 if ns.system == "vdp" else 0.25
        x0s = [rng.uniform(-box, box, size=2)]
    trajectories = [simulate_unforced(system, x0, ns.steps) for x0 in x0s]
    io_mod.write_trajectory_csv(ns.out, trajectories)
    _write_manifest(_out_dir(ns.out), "gen-data", ns, [ns.out])
    if ns.verbose:
        pairs = sum(t.n_steps for t in trajectories)
        print(f"wrote {len(trajectories)} trajectories ({pairs} pairs) to {ns.out}")
    return EXIT_OK


def _cmd_fit(ns):
    data = io_mod.read_timeseries_csv(ns.data, want="snapshots")
    dic = build_dictionary(data.state_dim, ns.degree, include_constant=ns.constant)
    g_fn = _resolve_g(ns.g, data.state_dim)
    g_samples = np.array([g_fn(x) for x in data.X])
    model, koop = fit_lifted_model(data, dic, g_samples)
    lifted_x = model.lift_batch(data.X)
    lifted_y = model.lift_batch(data.Y)
    residual = float(
        np.linalg.norm(lifted_y - lifted_x @ model.A.T) / np.linalg.norm(lifted_y)
    )
    io_mod.write_model(
        ns.out,
        model,
        provenance={
            "data_hash": io_mod.data_fingerprint(data),
            "fit_timestamp": None,
            "residuals": {"one_step_relative": residual},
        },
    )
    _write_manifest(_out_dir(ns.out), "fit", ns, [ns.out])
    if ns.verbose:
        print(
            f"fitted model: n={model.lifted_dim}, one-step residual {residual:.3e}"
        )
    return EXIT_OK


def _cmd_ctrb(ns):
    loaded = io_mod.read_model(ns.model)
    report = controllability_report(
        loaded.model, num_samples=ns.samples, seed=ns.seed, radius=ns.radius
    )
    io_mod.write_json(ns.out, report.to_json_dict())
    _write_manifest(_out_dir(ns.out), "ctrb", ns, [ns.out])
    if ns.verbose:
        print(f"certified={report.certified} min rank {report.ranks.min()}")
    return EXIT_OK


def _cmd_synth(ns):
    loaded = io_mod.read_model(ns.model)
    grid = tuple(float(v) for v in ns.eps_grid.split(","))
    cfg = SynthesisConfig(
        theta=ns.theta,
        epsilon_grid=grid,
        q_cap=None if ns.no_cap else ns.q_cap,
        gain_mode=ns.gain_mode,
    )
    result = solve_detmax(loaded.model.A, loaded.model.B, cfg)
    body = result.to_json_dict()
    body["diagnostics"] = {
        "reason": result.diagnostics.get("reason"),
        "uncapped_unbounded": result.diagnostics.get("uncapped_unbounded"),
    }
    io_mod.write_json(ns.out, body)
    _write_manifest(_out_dir(ns.out), "synth", ns, [ns.out])
    if ns.verbose:
        print(f"synthesis status: {result.status}")
    if result.status == "infeasible":
        return EXIT_INFEASIBLE
    if result.status == "unbounded":
        return EXIT_UNBOUNDED
    return EXIT_OK


def _cmd_simulate(ns):
    loaded = io_mod.read_model(ns.model)
    model = loaded.model
    if ns.gain == "zero":
        k = np.zeros(model.lifted_dim)
    else:
        obj = io_mod.read_json(ns.gain)
        if obj.get("k") is None:
            sys.stderr.write(
                f"gain file {ns.gain} holds no usable gain "
                f"(status {obj.get('status')!r})\n"
            )
            return EXIT_INFEASIBLE
        k = np.asarray(obj["k"], dtype=np.float64)
    system = _make_system(ns)
    x0 = _parse_vector(ns.x0, "--x0")
    bounds = None
    if ns.u_min is not None or ns.u_max is not None:
        bounds = (
            -np.inf if ns.u_min is None else ns.u_min,
            np.inf if ns.u_max is None else ns.u_max,
        )
    traj = closed_loop_simulate(system, model, k, x0, ns.steps, u_bounds=bounds)
    io_mod.write_trajectory_csv(ns.out, traj)
    _write_manifest(_out_dir(ns.out), "simulate", ns, [ns.out])
    if ns.verbose:
        print(f"terminal state norm {np.linalg.norm(traj.states[-1]):.3e}")
    return EXIT_OK


def _cmd_plot(ns):
    series = []
    for path in ns.traj:
        for i, traj in enumerate(io_mod.read_trajectories_csv(path)):
            label = os.path.splitext(os.path.basename(path))[0]
            if i > 0:
                label = f"{label}#{i}"
            series.append((label, traj.states[:, :2]))
    io_mod.emit_plot_svg(series, ns.out, title=ns.title, xlabel="x1", ylabel="x2")
    _write_manifest(_out_dir(ns.out), "plot", ns, [ns.out])
    return EXIT_OK


def _cmd_pipeline(ns):
    os.makedirs(ns.out, exist_ok=True)
    if ns.recipe == "vdp":
        summary = run_vdp_recipe(ns.out, seed=ns.seed)
    elif ns.recipe == "henon":
        summary = run_henon_recipe(ns.out, seed=ns.seed)
    else:
        raise SystemExit(EXIT_USAGE)
    _write_manifest(ns.out, "pipeline", ns, [os.path.join(ns.out, "summary.json")])
    if ns.verbose:
        print(json.dumps(summary["synthesis"], indent=1, sort_keys=True))
        print("control source:", summary["control"]["source"])
    return EXIT_OK


def _apply_config(ns, parser):
    if not getattr(ns, "config", None):
        return ns
    try:
        with open(ns.config, "r", encoding="ascii") as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read --config {ns.config}: {exc}")
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(ns, dest):
            parser.error(f"--config key {key!r} matches no flag")
        setattr(ns, dest, value)
    return ns


def build_parser():
    parser = _Parser(prog="koopctl", description=__doc__)
    default_out = os.environ.get("KOOPCTL_OUT", ".")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file overriding flags")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--verbose", action="store_true")

    def system_flags(p):
        p.add_argument("--system", choices=("vdp", "henon"), required=True)
        p.add_argument("--mu", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=0.01)
        p.add_argument("--a", type=float, default=1.4)
        p.add_argument("--b", type=float, default=0.3)

    p = sub.add_parser("gen-data", help="simulate unforced training data")
    common(p)
    system_flags(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--x0", action="append", help="comma-separated state, repeatable")
    p.add_argument("--random-x0", type=int, help="number of random initial states")
    p.add_argument("--out", default=os.path.join(default_out, "data.csv"))
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("fit", help="EDMD fit of the lifted bilinear model")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument(
        "--constant",
        type=lambda s: s.lower() in ("1", "true", "yes"),
        default=False,
        help="include the constant observable (true/false)",
    )
    p.add_argument("--g", default="0,1", help="input map: constant vector or registry name")
    p.add_argument("--out", default=os.path.join(default_out, "model.json"))
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("ctrb", help="sampled accessibility-rank certificate")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--out", default=os.path.join(default_out, "ctrb.json"))
    p.set_defaults(func=_cmd_ctrb)

    p = sub.add_parser("synth", help="determinant-maximization gain synthesis")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--eps-grid", default="0.001,0.01,0.1,1.0,10.0")
    p.add_argument("--q-cap", type=float, default=10.0)
    p.add_argument("--no-cap", action="store_true",
                   help="raw program: report unbounded instead of capping")
    p.add_argument("--gain-mode", choices=("authority", "target", "none"),
                   default="authority")
    p.add_argument("--out", default=os.path.join(default_out, "synth.json"))
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("simulate", help="closed-loop simulation with a gain file")
    common(p)
    system_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--gain", required=True, help="synthesis JSON or 'zero'")
    p.add_argument("--x0", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--u-min", type=float)
    p.add_argument("--u-max", type=float)
    p.add_argument("--out", default=os.path.join(default_out, "trajectory.csv"))
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("plot", help="phase-plane SVG from trajectory CSVs")
    common(p)
    p.add_argument("--traj", action="append", required=True)
    p.add_argument("--title", default="")
    p.add_argument("--out", default=os.path.join(default_out, "plot.svg"))
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("pipeline", help="one-command benchmark reproduction")
    common(p)
    p.add_argument("--recipe", choices=("vdp", "henon"), required=True)
    p.add_argument("--out", default=os.path.join(default_out, "pipeline_out"))
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    ns = _apply_config(ns, parser)
    try:
        code = ns.func(ns)
    except BlowupError as err:
        sys.stderr.write(f"trajectory blow-up: {err} (step {err.step})\n")
        return EXIT_BLOWUP
    except FitError as err:
        sys.stderr.write(f"EDMD failure: {err}\n")
        return EXIT_FIT
    except (FormatError, FileNotFoundError) as err:
        sys.stderr.write(f"input error: {err}\n")
        return EXIT_USAGE
    except KoopctlError as err:
        sys.stderr.write(f"error: {err}\n")
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
