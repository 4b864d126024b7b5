"""Derivative-free optimization of control-pulse parameters.

The objective is a full storage/retrieval solve, so searches are
simplex-based (Nelder-Mead) with seeded restarts rather than
gradient-driven.  Shapes are parameterized three ways: a Gaussian
(centre, duration, energy), a piecewise-linear amplitude profile on
fixed knots at pinned energy, and a chirped Gaussian adding a quadratic
temporal phase.  Every candidate respects its bounds and the total
energy budget by construction.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigurationError, OptimizationError, SolverError
from .experiment import ExperimentResult, MemoryExperiment
from .pulses import ControlPulse, PulseShape


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigurationError(message)


class PulseBasis(enum.Enum):
    GAUSSIAN = "gaussian"
    PIECEWISE = "piecewise"
    CHIRPED_GAUSSIAN = "chirped_gaussian"


OBJECTIVES = ("eta_mem", "eta_read_in")


@dataclass(frozen=True, eq=False)
class ControlParameterization:
    """Maps a bounded parameter vector to a control pulse.

    gaussian:          params = (center_s, fwhm_s, energy_j)
    chirped_gaussian:  params = (center_s, fwhm_s, energy_j, chirp_rate)
    piecewise:         params = knot amplitudes (dimensionless shape,
                       >= 0, linearly interpolated on ``knot_times``);
                       the pulse carries the full energy budget, so only
                       the shape is searched.

    ``bounds`` rows are (lo, hi) per parameter; rows with lo == hi pin
    that parameter (it is excluded from the simplex).  Energy bounds are
    clipped to the budget so every candidate is feasible.
    """

    basis: PulseBasis
    bounds: np.ndarray
    total_energy_budget: float
    knot_times: np.ndarray | None = None

    def __post_init__(self):
        basis = self.basis if isinstance(self.basis, PulseBasis) else PulseBasis(self.basis)
        object.__setattr__(self, "basis", basis)
        bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        _require(
            bounds.ndim == 2 and bounds.shape[1] == 2,
            f"bounds must be (n_params, 2), got shape {bounds.shape}",
        )
        _require(bool(np.all(bounds[:, 0] <= bounds[:, 1])), "each bound needs lo <= hi")
        _require(
            math.isfinite(self.total_energy_budget) and self.total_energy_budget > 0,
            "energy budget must be positive",
        )
        if basis is PulseBasis.PIECEWISE:
            _require(self.knot_times is not None, "piecewise basis needs knot_times")
            knots = np.asarray(self.knot_times, dtype=float)
            _require(
                knots.ndim == 1 and knots.size >= 2 and bool(np.all(np.diff(knots) > 0)),
                "knot_times must be strictly increasing with >= 2 entries",
            )
            _require(
                bounds.shape[0] == knots.size,
                f"piecewise needs one bound per knot ({knots.size}), got {bounds.shape[0]}",
            )
            _require(bool(np.all(bounds[:, 0] >= 0.0)), "knot amplitudes must be >= 0")
            object.__setattr__(self, "knot_times", knots)
        else:
            expected = 3 if basis is PulseBasis.GAUSSIAN else 4
            _require(
                bounds.shape[0] == expected,
                f"{basis.value} basis has {expected} parameters, got {bounds.shape[0]}",
            )
            # energy parameter may never exceed the budget
            bounds[2] = np.clip(bounds[2], 0.0, self.total_energy_budget)
        object.__setattr__(self, "bounds", bounds)

    @property
    def n_params(self) -> int:
        return int(self.bounds.shape[0])

    def param_names(self) -> tuple[str, ...]:
        if self.basis is PulseBasis.PIECEWISE:
            return tuple(f"knot_{i}" for i in range(self.n_params))
        names = ("center_s", "fwhm_s", "energy_j")
        return names if self.basis is PulseBasis.GAUSSIAN else names + ("chirp_rate",)

    def initial_params(self, template: ControlPulse) -> np.ndarray:
        """Feasible starting point resembling the template pulse."""
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if self.basis is PulseBasis.PIECEWISE:
            shape = np.exp(-((self.knot_times - template.center_time) ** 2)
                           / (4.0 * template.sigma_t**2))
            return np.clip(shape, lo, hi)
        start = [template.center_time, template.fwhm, min(template.energy, self.total_energy_budget)]
        if self.basis is PulseBasis.CHIRPED_GAUSSIAN:
            start.append(template.chirp_rate)
        return np.clip(np.asarray(start, dtype=float), lo, hi)

    def build_control(self, params, template: ControlPulse) -> ControlPulse:
        """Control pulse realizing a parameter vector."""
        params = np.asarray(params, dtype=float)
        _require(params.shape == (self.n_params,), f"expected {self.n_params} parameters")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(params < lo - 1e-12) or np.any(params > hi + 1e-12):
            raise ConfigurationError(f"parameters {params} violate bounds")
        if self.basis is PulseBasis.PIECEWISE:
            if not np.any(params > 0.0):
                raise ConfigurationError("piecewise shape is identically zero")
            return replace(
                template,
                shape=PulseShape.USER_TABLE,
                table=(self.knot_times, params.astype(complex)),
                energy=self.total_energy_budget,
                chirp_rate=0.0,
            )
        center, fwhm, energy = params[0], params[1], params[2]
        _require(energy <= self.total_energy_budget * (1.0 + 1e-9), "energy exceeds budget")
        chirp = params[3] if self.basis is PulseBasis.CHIRPED_GAUSSIAN else template.chirp_rate
        transform_limit = template.fwhm / template.stretch
        return replace(
            template,
            shape=PulseShape.GAUSSIAN,
            table=None,
            center_time=center,
            energy=energy,
            stretch=fwhm / transform_limit,
            chirp_rate=chirp,
        )


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    """Outcome of a bounded derivative-free search."""

    best_params: np.ndarray
    best_value: float
    trace: list
    converged: bool
    n_evaluations: int
    n_failures: int
    objective: str

    def best_so_far(self) -> np.ndarray:
        """Monotone non-decreasing running maximum of the trace values."""
        values = np.array([row[-1] for row in self.trace], dtype=float)
        return np.maximum.accumulate(np.where(np.isnan(values), -np.inf, values))


def _objective_value(result: ExperimentResult, objective: str) -> float:
    if objective == "eta_mem":
        return result.eta_mem_window
    if objective == "eta_read_in":
        return result.eta_read_in_window
    raise ConfigurationError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


def _evaluated_experiment(
    base: MemoryExperiment, param: ControlParameterization, params, target: str
) -> MemoryExperiment:
    seq = base.sequence
    template = seq.control_in if target == "control_in" else seq.control_out
    control = param.build_control(params, template)
    if target == "control_in":
        new_seq = replace(seq, control_in=control, ratio_R=None)
    else:
        new_seq = replace(seq, control_out=control, ratio_R=None)
    return replace(base, sequence=new_seq)


def optimize_control(
    objective: str,
    param: ControlParameterization,
    base_experiment: MemoryExperiment,
    budget: int,
    seed: int = 0,
    target: str = "control_in",
    initial_params=None,
    restarts: int = 2,
    trace_path=None,
) -> OptimizationResult:
    """Maximize a memory efficiency over a pulse parameterization.

    Runs bounded Nelder-Mead from the initial point, then from seeded
    perturbations of the best-so-far ("restarts"), stopping when the
    evaluation budget is spent.  Every evaluation lands in the trace as
    (index, *params, value); failed solves count against the budget with
    value NaN.  With ``trace_path`` pointing at a previous trace file,
    its evaluations are loaded first and the search resumes from the
    recorded best (the budget covers old plus new evaluations).
    """
    _require(objective in OBJECTIVES, f"objective must be one of {OBJECTIVES}")
    _require(target in ("control_in", "control_out"), "target must be a control pulse")
    _require(
        budget >= 10 * param.n_params,
        f"budget {budget} below 10 x {param.n_params} parameters",
    )
    _require(restarts >= 0, "restarts must be >= 0")

    template = (
        base_experiment.sequence.control_in
        if target == "control_in"
        else base_experiment.sequence.control_out
    )
    if initial_params is None:
        initial_params = param.initial_params(template)
    x0 = np.asarray(initial_params, dtype=float)

    trace: list = []
    state = {"best_x": None, "best_f": -math.inf, "failures": 0}
    if trace_path is not None and os.path.exists(trace_path):
        for row in load_trace(trace_path, param.n_params):
            trace.append(row)
            value = row[-1]
            if not math.isnan(value) and value > state["best_f"]:
                state["best_f"] = value
                state["best_x"] = np.asarray(row[1:-1], dtype=float)

    def evaluate(x: np.ndarray) -> float:
        x = np.clip(x, param.bounds[:, 0], param.bounds[:, 1])
        try:
            result = _evaluated_experiment(base_experiment, param, x, target).run()
            value = _objective_value(result, objective)
        except SolverError:
            state["failures"] += 1
            value = math.nan
        trace.append((len(trace), *x.tolist(), value))
        if not math.isnan(value) and value > state["best_f"]:
            state["best_f"] = value
            state["best_x"] = x.copy()
        return -value if not math.isnan(value) else 1e6

    remaining = budget - len(trace)
    if remaining <= 0 and state["best_x"] is None:
        raise OptimizationError("resumed trace exhausted the budget without a single success")

    evaluate(x0)

    free = param.bounds[:, 0] < param.bounds[:, 1]
    converged = False
    if not np.any(free):
        converged = True  # nothing to optimize; the initial point is the answer
    else:
        rng = np.random.default_rng(seed)
        lo, hi = param.bounds[:, 0], param.bounds[:, 1]
        span = np.where(free, hi - lo, 0.0)
        starts = max(1, restarts + 1)
        for attempt in range(starts):
            remaining = budget - len(trace)
            if remaining <= 2 * param.n_params:
                break
            if attempt == 0 or state["best_x"] is None:
                start = x0
            else:
                start = np.clip(
                    state["best_x"] + rng.normal(0.0, 0.15, size=param.n_params) * span,
                    lo,
                    hi,
                )
            per_restart = remaining if attempt == starts - 1 else remaining // (starts - attempt)
            f_scale = max(abs(state["best_f"]), 0.01)
            result = minimize(
                evaluate,
                start,
                method="Nelder-Mead",
                bounds=list(zip(lo, hi)),
                options={
                    "maxfev": per_restart,
                    "xatol": 1e-6,
                    "fatol": 1e-4 * f_scale,
                    "adaptive": param.n_params > 4,
                },
            )
            converged = converged or bool(result.success)

    if state["best_x"] is None:
        raise OptimizationError(
            f"all {len(trace)} evaluations failed ({state['failures']} solver errors)"
        )
    if trace_path is not None:
        save_trace(trace_path, trace, param.param_names())
    return OptimizationResult(
        best_params=state["best_x"],
        best_value=state["best_f"],
        trace=trace,
        converged=converged,
        n_evaluations=len(trace),
        n_failures=state["failures"],
        objective=objective,
    )


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def optimize_ratio(
    base_experiment: MemoryExperiment,
    r_range: tuple[float, float],
    budget: int = 40,
    objective: str = "eta_mem",
    objective_fn=None,
) -> tuple[float, float]:
    """Golden-section search for the best read-out/read-in ratio.

    The total control energy of the base sequence is held fixed while R
    redistributes it.  Returns (best_R, best objective value).  The
    bracket shrinks by the golden ratio each evaluation, so ``budget``
    evaluations resolve the optimum to (hi-lo) * 0.618**(budget-2).
    ``objective_fn`` (R -> value) replaces the solver objective when
    given, which lets the search be exercised on closed-form surrogates.
    """
    lo, hi = r_range
    _require(0.0 < lo < hi and math.isfinite(hi), f"invalid ratio range {r_range!r}")
    _require(budget >= 6, "ratio search needs a budget of at least 6")
    _require(objective in OBJECTIVES, f"objective must be one of {OBJECTIVES}")

    total = base_experiment.sequence.total_control_energy
    _require(total > 0.0, "base sequence has no control energy to redistribute")

    cache: dict[float, float] = {}

    def evaluate(ratio: float) -> float:
        if ratio in cache:
            return cache[ratio]
        if objective_fn is not None:
            value = float(objective_fn(ratio))
        else:
            e_in = total / (1.0 + ratio)
            seq = base_experiment.sequence.with_energies(e_in, total - e_in)
            try:
                result = replace(base_experiment, sequence=seq).run()
                value = _objective_value(result, objective)
            except SolverError:
                value = math.nan
        cache[ratio] = value
        return value

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = evaluate(c), evaluate(d)
    spent = 2
    while spent < budget and (b - a) > 1e-3 * (hi - lo):
        if math.isnan(fc) or (not math.isnan(fd) and fd > fc):
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = evaluate(d)
        else:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = evaluate(c)
        spent += 1

    candidates = [(v, r) for r, v in cache.items() if not math.isnan(v)]
    if not candidates:
        raise OptimizationError("every ratio evaluation failed")
    best_value, best_r = max(candidates)
    return best_r, best_value


def save_trace(path, trace, param_names) -> None:
    """Write an evaluation trace as CSV (index, params..., objective)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("index", *param_names, "objective"))
        for row in trace:
            writer.writerow(row)


def load_trace(path, n_params: int) -> list:
    """Read a trace written by :func:`save_trace`."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and len(header) != n_params + 2:
            raise ConfigurationError(
                f"trace file {path} has {len(header)} columns, expected {n_params + 2}"
            )
        for line in reader:
            rows.append((int(line[0]), *(float(v) for v in line[1:])))
    return rows
