"""Command-line front end: simulate | sweep | analyze | optimize.

Every invocation loads one TOML configuration (defaults are the
reference operating point), stamps outputs with the config hash, seed
and package version — never with wall-clock time, so identical inputs
give byte-identical files — and exits 0 on success, 1 on configuration
errors, 2 on numerical errors, 3 on analysis errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import detection as det
from . import metrics
from . import optimizer as optim
from .config import build_experiment, config_hash, load_config
from .detection import derive_seed
from .errors import OrcaError
from .experiment import MemoryExperiment, split_total_energy


def _provenance(config: dict, seed: int) -> dict:
    return {"version": __version__, "config": config_hash(config), "seed": seed}


def _provenance_lines(config: dict, seed: int) -> list[str]:
    p = _provenance(config, seed)
    return [f"# orcasim {p['version']}; config={p['config']}; seed={p['seed']}"]


def _write_csv(path, header_lines, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(value) for value in row])


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _json_dump(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- simulate ------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    out_dir = args.out or config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)

    experiment = build_experiment(config)
    result = experiment.run()
    header = _provenance_lines(config, seed)

    env = result.retrieved_envelope
    t = env.times
    raw = result.run_result.output_envelope.values
    rows = zip(
        t.tolist(),
        (np.abs(result.run_result.input_envelope.sample(t)) ** 2).tolist(),
        (np.abs(env.values) ** 2).tolist(),
        np.abs(raw).tolist(),
        env.values.real.tolist(),
        env.values.imag.tolist(),
    )
    _write_csv(
        os.path.join(out_dir, "envelopes.csv"),
        header,
        ("time_s", "input_power", "output_power", "output_abs_raw", "output_re", "output_im"),
        rows,
    )

    chain = _detection_chain(config)
    acquisition = config["detection"]["acquisition_time"]
    span = (float(t[0]), float(t[-1]))
    rate = experiment.sequence.repetition_rate_signal
    triple = {
        "input": det.synthesize_histogram(
            experiment.sequence.signal, chain, 0.0, acquisition,
            derive_seed(seed, 0), span=span, repetition_rate=rate,
        ),
        "memory": det.synthesize_histogram(
            env, chain, result.noise_per_window, acquisition,
            derive_seed(seed, 1), span=span, repetition_rate=rate,
        ),
        "noise": det.synthesize_histogram(
            None, chain, result.noise_per_window, acquisition,
            derive_seed(seed, 2), span=span, repetition_rate=rate,
        ),
    }
    for name, histogram in triple.items():
        det.histogram_to_csv(histogram, os.path.join(out_dir, f"{name}_histogram.csv"))

    figures = metrics.compute_figures(
        mu_in=experiment.sequence.signal.mu_in,
        noise_per_window=result.noise_per_window,
        eta_mem=result.eta_mem_window,
        eta_trans=chain.eta_trans,
        eta_det=chain.eta_det,
    )
    payload = {
        "provenance": _provenance(config, seed),
        "eta_read_in": result.eta_read_in_window,
        "eta_read_out": result.eta_read_out_window,
        "eta_read_in_raw": result.eta_read_in,
        "eta_read_out_raw": result.eta_read_out,
        "eta_mem_raw": result.eta_mem,
        **metrics.figures_dict(figures),
    }
    _json_dump(os.path.join(out_dir, "figures.json"), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _detection_chain(config: dict) -> det.DetectionChain:
    from .config import build_detection

    return build_detection(config)


# --- sweep ---------------------------------------------------------------


def _storage_point(experiment: MemoryExperiment, t_s: float):
    res = replace(experiment, sequence=experiment.sequence.with_storage_time(t_s)).run()
    return (t_s, res.eta_read_out, res.eta_mem, res.eta_read_out_window, res.eta_mem_window, "")


def _energy_point(experiment: MemoryExperiment, e_total: float, ratio: float):
    e_in, e_out = split_total_energy(e_total, ratio)
    res = replace(experiment, sequence=experiment.sequence.with_energies(e_in, e_out)).run()
    return (
        e_total, e_in, e_out,
        res.eta_read_in, res.eta_read_out, res.eta_mem,
        res.eta_read_in_window, res.eta_read_out_window, res.eta_mem_window,
        "",
    )


_SWEEP_COLUMNS = {
    "storage_time": (
        "storage_time_s", "eta_read_out", "eta_mem",
        "eta_read_out_window", "eta_mem_window", "error",
    ),
    "energy": (
        "e_total_j", "e_in_j", "e_out_j",
        "eta_read_in", "eta_read_out", "eta_mem",
        "eta_read_in_window", "eta_read_out_window", "eta_mem_window",
        "error",
    ),
    "mu_in": (
        "mu_in", "retrieved_per_pulse", "noise_per_window", "eta_mem_window", "snr", "error",
    ),
}


def _guarded_point(axis: str, experiment: MemoryExperiment, value: float, ratio: float):
    n_columns = len(_SWEEP_COLUMNS[axis])
    try:
        if axis == "storage_time":
            return _storage_point(experiment, value)
        return _energy_point(experiment, value, ratio)
    except OrcaError as exc:
        return tuple([value] + [math.nan] * (n_columns - 2) + [str(exc)])


def _parse_grid(args) -> list[float]:
    if args.values is not None:
        text = args.values.strip()
        return [float(v) for v in text.split(",")] if text else []
    if args.points is not None:
        try:
            start, stop, count = args.points.split(":")
            return np.linspace(float(start), float(stop), int(count)).tolist()
        except ValueError as exc:
            raise OrcaError(f"--points must be start:stop:count, got {args.points!r}") from exc
    raise OrcaError("sweep needs --points or --values")


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    out_dir = args.out or config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    grid = _parse_grid(args)
    experiment = build_experiment(config)
    columns = _SWEEP_COLUMNS[args.axis]
    header = _provenance_lines(config, seed)
    path = os.path.join(out_dir, f"sweep_{args.axis}.csv")

    if args.axis == "mu_in":
        rows = []
        if grid:
            base = experiment.run()
            for mu in grid:
                retrieved = mu * base.eta_mem_window
                rows.append(
                    (mu, retrieved, base.noise_per_window, base.eta_mem_window,
                     metrics.snr(retrieved, base.noise_per_window), "")
                )
        _write_csv(path, header, columns, rows)
        print(path)
        return 0

    call_args = [(args.axis, experiment, value, args.ratio) for value in grid]
    if args.jobs > 1 and len(call_args) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_guarded_point, *zip(*call_args)))
    else:
        rows = [_guarded_point(*ca) for ca in call_args]

    if args.axis == "storage_time":
        rows = list(rows)
        good = [(r[0], r[1]) for r in rows if not r[-1]]
        if len(good) >= 5:
            try:
                fit = det.fit_gaussian_samples(*map(np.array, zip(*good)))
                lifetime = math.sqrt(2.0) * fit.sigma
                header = header + [
                    "# gaussian_fit_columns=amplitude,center_s,sigma_s,baseline,lifetime_1e_s"
                ]
                rows.append(
                    ("# gaussian_fit", fit.amplitude, fit.center, fit.sigma,
                     fit.baseline, repr(lifetime))
                )
            except OrcaError as exc:
                rows.append(("# gaussian_fit", f"failed: {exc}", "", "", "", ""))
    _write_csv(path, header, columns, rows)
    print(path)
    return 0


# --- analyze -------------------------------------------------------------


def cmd_analyze(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    chain = _detection_chain(config)
    window_in = args.window_in
    window_out = (
        args.window_out if args.window_out is not None
        else window_in + config["sequence"]["storage_time"]
    )
    width = config["noise"]["window"]

    histograms = [det.histogram_from_csv(p) for p in (args.input, args.memory, args.noise)]
    extraction = det.extract_efficiencies(
        histograms[0], histograms[1], histograms[2], chain,
        windows=(window_in, window_out), width=width,
    )
    noise_counts = det.window_integrate(histograms[2], window_out, width)
    noise_per_window = noise_counts / histograms[2].trials
    noise_err = math.sqrt(max(noise_counts, 1)) / histograms[2].trials
    figures = metrics.compute_figures(
        mu_in=extraction.mu_in,
        noise_per_window=noise_per_window,
        eta_mem=max(extraction.eta_mem, 0.0),
        mu_in_err=extraction.mu_in_err,
        noise_err=noise_err,
        eta_mem_err=extraction.eta_mem_err,
        eta_trans=chain.eta_trans,
        eta_det=chain.eta_det,
    )
    payload = {
        "provenance": _provenance(config, seed),
        "eta_read_in": extraction.eta_read_in,
        "eta_read_in_err": extraction.eta_read_in_err,
        "eta_read_out": extraction.eta_read_out,
        "eta_read_out_err": extraction.eta_read_out_err,
        "consistent": extraction.consistent,
        "flags": list(extraction.flags),
        **metrics.figures_dict(figures),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _json_dump(os.path.join(args.out, "analysis.json"), payload)
    return 0


# --- optimize ------------------------------------------------------------


def cmd_optimize(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    out_dir = args.out or config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    section = config["optimizer"]
    experiment = build_experiment(config)
    mode = args.mode or section["mode"]

    if mode == "ratio":
        best_r, best_value = optim.optimize_ratio(
            experiment,
            (section["r_min"], section["r_max"]),
            budget=section["budget"],
            objective=section["objective"],
        )
        payload = {
            "provenance": _provenance(config, seed),
            "mode": "ratio",
            "best_ratio": best_r,
            "best_value": best_value,
            "objective": section["objective"],
        }
    else:
        param = _parameterization(section, experiment)
        trace_path = os.path.join(out_dir, "optimize_trace.csv")
        result = optim.optimize_control(
            section["objective"],
            param,
            experiment,
            budget=section["budget"],
            seed=seed,
            target=section["target"],
            restarts=section["restarts"],
            trace_path=trace_path,
        )
        payload = {
            "provenance": _provenance(config, seed),
            "mode": "shape",
            "objective": result.objective,
            "basis": param.basis.value,
            "best_params": dict(zip(param.param_names(), result.best_params.tolist())),
            "best_value": result.best_value,
            "converged": result.converged,
            "n_evaluations": result.n_evaluations,
            "n_failures": result.n_failures,
        }
    _json_dump(os.path.join(out_dir, "best_params.json"), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _parameterization(section: dict, experiment) -> optim.ControlParameterization:
    basis = optim.PulseBasis(section["basis"])
    budget_j = section["energy_budget"]
    if basis is optim.PulseBasis.PIECEWISE:
        n = int(section["n_knots"])
        span = section["knot_span"]
        return optim.ControlParameterization(
            basis=basis,
            bounds=[(0.0, 1.0)] * n,
            total_energy_budget=budget_j,
            knot_times=np.linspace(-span, span, n),
        )
    template = experiment.sequence.control_in
    bounds = [
        (template.center_time - 1e-9, template.center_time + 1e-9),
        (0.2 * template.fwhm, 5.0 * template.fwhm),
        (0.01 * budget_j, budget_j),
    ]
    if basis is optim.PulseBasis.CHIRPED_GAUSSIAN:
        bounds.append((-1e21, 1e21))
    return optim.ControlParameterization(
        basis=basis, bounds=bounds, total_energy_budget=budget_j
    )


# --- entry point ----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orcasim",
        description="Telecom-band ladder-memory simulator and analysis toolkit",
    )
    parser.add_argument("--version", action="version", version=f"orcasim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")

    p = sub.add_parser("simulate", parents=[common], help="one storage/retrieval run")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="tabulate a parameter sweep")
    p.add_argument("--axis", required=True, choices=sorted(_SWEEP_COLUMNS))
    p.add_argument("--points", help="grid as start:stop:count")
    p.add_argument("--values", help="comma-separated grid values")
    p.add_argument("--ratio", type=float, default=3.3, help="read-out/read-in energy ratio")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("analyze", parents=[common], help="extract figures from histograms")
    p.add_argument("input", help="control-off reference histogram CSV")
    p.add_argument("memory", help="control-on histogram CSV")
    p.add_argument("noise", help="signal-blocked histogram CSV")
    p.add_argument("--window-in", type=float, default=0.0, help="input window centre, s")
    p.add_argument("--window-out", type=float, help="read-out window centre, s")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("optimize", parents=[common], help="control-pulse optimization")
    p.add_argument("--mode", choices=("shape", "ratio"))
    p.set_defaults(fn=cmd_optimize)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OrcaError as exc:
        _emit_error(exc, exc.exit_code)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - defensive catch-all
        _emit_error(exc, 2)
        return 2


def _emit_error(exc: Exception, code: int) -> None:
    print(
        json.dumps(
            {"error": type(exc).__name__, "message": str(exc), "exit_code": code},
            sort_keys=True,
        ),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
