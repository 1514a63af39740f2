"""Comparative benchmark driver: runs, CSV logs, summary file and figures."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .adaptation import LearningRate
from .config import BenchmarkSpec, ControllerConfig
from .network import param_count
from .simulate import TrajectoryLog, csv_metrics, percent_improvement, run_simulation, write_csv
from .stability import RemainderPolynomial, check_gain_condition, set_radii, stability_constants

log = logging.getLogger(__name__)

INVARIANT_RTOL = 1e-9
MACHINE_MARKER = "# --- machine-readable ---"


@dataclass
class BenchmarkResult:
    summary: dict
    csv_paths: dict[str, Path] = field(default_factory=dict)
    plot_paths: list[Path] = field(default_factory=list)
    summary_path: Optional[Path] = None

    @property
    def ok(self) -> bool:
        return self.summary["status"] == "ok"


def run_label(name: str, seed: int) -> str:
    return f"{name}_seed{seed}"


def _invariant_failures(spec: BenchmarkSpec, ctrl: ControllerConfig, trace: TrajectoryLog) -> list[str]:
    failures = []
    if not all(np.all(np.isfinite(a)) for a in (trace.q, trace.q_dot, trace.u, trace.theta_norm)):
        failures.append("non-finite state or input")
    if ctrl.kind != "PD":
        bound = ctrl.theta_bar * (1.0 + INVARIANT_RTOL)
        if trace.theta_norm.max() > bound:
            failures.append(f"||theta_hat|| reached {trace.theta_norm.max()!r} > {ctrl.theta_bar!r}")
    _, ref = spec.scenario.build()
    if np.linalg.norm(trace.q_d, axis=1).max() > ref.q_bar_d * (1.0 + INVARIANT_RTOL):
        failures.append("reference position exceeded its declared bound")
    if np.linalg.norm(trace.q_d_dot, axis=1).max() > ref.q_dot_bar_d * (1.0 + INVARIANT_RTOL):
        failures.append("reference velocity exceeded its declared bound")
    return failures


def _run_one(spec: BenchmarkSpec, name: str, seed: int, out_dir: str):
    ctrl = spec.controller(name)
    label = run_label(name, seed)
    path = Path(out_dir) / f"{label}.csv"
    try:
        trace = run_simulation(spec.sim_config(ctrl, seed))
    except Exception as exc:  # recorded, other runs proceed
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}, None, None
    write_csv(trace, path)
    entry = {"status": "ok", **csv_metrics(path)}
    failures = _invariant_failures(spec, ctrl, trace)
    if failures:
        entry["status"] = "invariant-violation"
        entry["error"] = "; ".join(failures)
    return entry, trace, path


def controller_stability(spec: BenchmarkSpec, ctrl: ControllerConfig) -> Optional[dict]:
    if ctrl.kind == "PD":
        return None
    n = len(spec.scenario.offset)
    p = param_count(ctrl.network(n))
    _, ref = spec.scenario.build()
    omega_bar = spec.scenario.omega_bar if spec.scenario.disturbance != "none" else 0.0
    consts = stability_constants(
        ctrl.gains, LearningRate.scalar(ctrl.gamma, p), omega_bar, spec.eps_bar,
        ctrl.theta_bar, ref.q_bar_d, ref.q_dot_bar_d, spec.lambda_v,
    )
    poly = RemainderPolynomial(spec.a2, spec.a1, spec.a0, ctrl.theta_bar)
    check = check_gain_condition(consts, poly)
    radii = set_radii(consts, poly)
    return {
        "parameters": p,
        "lambda1": consts.lambda1,
        "lambda_phi": consts.lambda_phi,
        "delta": consts.delta,
        "k_min": consts.k_min,
        "lambda_V": consts.lambda_V,
        "ultimate_radius": consts.ultimate_radius,
        "gain_condition": check.satisfied,
        "gain_margin": check.margin,
        "set_status": radii.status,
        "D_radius": radii.D_radius,
        "S_radius": radii.S_radius,
        "Omega_radius": radii.Omega_radius,
    }


def run_benchmark(
    spec: BenchmarkSpec,
    out_dir,
    plots: bool = True,
    workers: int = 1,
    only: Optional[Sequence[str]] = None,
) -> BenchmarkResult:
    """Run every (controller, seed) pair and write CSVs plus ``summary.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [c.name for c in spec.controllers if only is None or c.name in only]
    tasks = [(name, seed) for seed in spec.seeds for name in names]

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, spec, n, s, str(out)) for n, s in tasks]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_one(spec, n, s, str(out)) for n, s in tasks]

    runs, traces, csv_paths = {}, {}, {}
    for (name, seed), (entry, trace, path) in zip(tasks, outcomes):
        label = run_label(name, seed)
        runs[label] = entry
        if trace is not None:
            traces[label] = trace
            csv_paths[label] = path

    for name, seed in tasks:
        entry = runs[run_label(name, seed)]
        base = runs.get(run_label(spec.baseline, seed))
        if entry["status"] == "failed" or base is None or base["status"] == "failed":
            continue
        for metric in ("rms_error", "mean_error", "final_window_rms"):
            entry[f"percent_improvement_{metric}"] = percent_improvement(base[metric], entry[metric])

    stability = {
        c.name: controller_stability(spec, c) for c in spec.controllers if c.name in names and c.kind != "PD"
    }
    status = "ok" if all(e["status"] == "ok" for e in runs.values()) else "failed"
    summary = {
        "status": status,
        "baseline": spec.baseline,
        "error_statistics": "rms_error = sqrt(mean ||e||^2); mean_error = mean ||e||; "
        "final_window_rms = rms over the last 20% of the run; "
        "percent_improvement_X = 100 (baseline - controller) / baseline",
        "runs": runs,
        "stability": stability,
    }
    summary_path = out / "summary.txt"
    summary_path.write_text(format_summary(summary))

    plot_paths = []
    if plots:
        plot_paths = emit_plots(traces, out)
    return BenchmarkResult(summary, csv_paths, plot_paths, summary_path)


def _flat_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_summary(summary: dict) -> str:
    lines = ["# resnet-adaptive benchmark summary"]
    for key in ("status", "baseline", "error_statistics"):
        lines.append(f"{key}={summary[key]}")
    for label, entry in summary["runs"].items():
        for k, v in entry.items():
            lines.append(f"run.{label}.{k}={_flat_value(v)}")
    for name, consts in summary["stability"].items():
        for k, v in consts.items():
            lines.append(f"stability.{name}.{k}={_flat_value(v)}")
    lines.append(MACHINE_MARKER)
    lines.append(json.dumps(_jsonable(summary), sort_keys=True))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def read_summary(path) -> dict:
    """Parse the machine-readable block of a summary file."""
    text = Path(path).read_text()
    block = text.split(MACHINE_MARKER, 1)[1]
    return json.loads(block)


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def emit_plots(traces: dict[str, TrajectoryLog], out_dir) -> list[Path]:
    """Tracking-error overlay plus planar trajectory figures, as SVG."""
    out = Path(out_dir)
    if not traces:
        log.warning("no trajectories to plot")
        return []
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception as exc:  # degrade to CSV-only
        log.warning("plotting unavailable (%s); CSV logs only", exc)
        return []

    paths = []
    meta = {"Date": None, "Creator": None}
    try:
        with matplotlib.rc_context({"svg.hashsalt": "resnet-adaptive", "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(8, 4))
            for label, tr in traces.items():
                ax.plot(tr.t, tr.e_norm, lw=1.0, label=label)
            ax.set_xlabel("t [s]")
            ax.set_ylabel("||e|| [m]")
            ax.set_title("Tracking error")
            ax.legend()
            fig.tight_layout()
            path = out / "tracking_error.svg"
            fig.savefig(path, metadata=meta)
            plt.close(fig)
            paths.append(path)

            first = next(iter(traces.values()))
            xlim, ylim = _trajectory_limits(traces.values())
            fig, ax = plt.subplots(figsize=(8, 4))
            ax.plot(first.q_d[:, 0], first.q_d[:, 1], "k--", lw=1.2, label="reference")
            for label, tr in traces.items():
                ax.plot(tr.q[:, 0], tr.q[:, 1], lw=0.8, label=label)
            _finish_planar(ax, xlim, ylim)
            path = out / "trajectories.svg"
            fig.savefig(path, metadata=meta)
            plt.close(fig)
            paths.append(path)

            for label, tr in traces.items():
                fig, ax = plt.subplots(figsize=(8, 4))
                ax.plot(tr.q_d[:, 0], tr.q_d[:, 1], "k--", lw=1.2, label="reference")
                ax.plot(tr.q[:, 0], tr.q[:, 1], lw=0.8, label=label)
                _finish_planar(ax, xlim, ylim)
                path = out / f"trajectory_{label}.svg"
                fig.savefig(path, metadata=meta)
                plt.close(fig)
                paths.append(path)
    except Exception as exc:
        log.warning("plotting failed (%s); CSV logs only", exc)
    return paths


def _trajectory_limits(traces) -> tuple[tuple[float, float], tuple[float, float]]:
    traces = list(traces)
    xs = np.concatenate([np.r_[tr.q[:, 0], tr.q_d[:, 0]] for tr in traces])
    ys = np.concatenate([np.r_[tr.q[:, 1], tr.q_d[:, 1]] for tr in traces])
    pad = 0.5
    return (xs.min() - pad, xs.max() + pad), (ys.min() - pad, ys.max() + pad)


def _finish_planar(ax, xlim, ylim):
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    ax.set_aspect("equal")
    ax.set_xlabel("q1 [m]")
    ax.set_ylabel("q2 [m]")
    ax.legend(loc="upper right")
    ax.figure.tight_layout()
