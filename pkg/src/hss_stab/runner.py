"""Command dispatch and result export for the analysis pipeline."""

from __future__ import annotations

import datetime
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    classify_eigenvalues,
    detect_spurious,
    eigen_decompose,
    evaluate_htf,
    stability_verdict,
    sweep_parameter,
)
from .errors import ConfigurationError
from .pipeline import SystemModel, assemble_system
from .scenario import Scenario

COMMANDS = ("eig", "htf", "sweep", "classify", "spurious")

EIGEN_COLUMNS = (
    "index",
    "re",
    "im",
    "dominant_component",
    "dominant_harmonic",
    "classification",
    "spurious_flag",
)
TRACE_COLUMNS = ("param_value", "trace_id", "re", "im")
MATRIX_COLUMNS = ("row", "col", "re", "im")


@dataclass(frozen=True)
class ResultSet:
    kind: str  # "eigenvalues" | "traces" | "matrix"
    columns: tuple[str, ...]
    records: tuple[tuple, ...]
    meta: dict = field(default_factory=dict)


def _num(x) -> str:
    """17 significant digits: round-trip exact for doubles."""
    return f"{float(x):.17g}"


def _dominant_info(solution, order):
    """Per-eigenvalue dominant component and harmonic block from vector energy."""
    model_labels = solution.labels
    count = len({h for _, h in model_labels}) if model_labels else 1
    channels = len(model_labels) // count if count else 0
    comps = [name.split(".", 1)[0] for name, _ in model_labels[:channels]]
    orders = sorted({h for _, h in model_labels})
    out = []
    for idx in order:
        v = solution.vectors[:, idx]
        energy = np.abs(v.reshape(count, channels)) ** 2 if channels else np.zeros((count, 0))
        h_dom = orders[int(np.argmax(energy.sum(axis=1)))] if channels else 0
        by_comp: dict[str, float] = {}
        for ch, comp in enumerate(comps):
            by_comp[comp] = by_comp.get(comp, 0.0) + float(energy[:, ch].sum())
        comp_dom = max(sorted(by_comp), key=lambda k: by_comp[k]) if by_comp else ""
        out.append((comp_dom, h_dom))
    return out


def _eigen_records(system: SystemModel, scenario: Scenario):
    solution = eigen_decompose(system.model)
    order = np.lexsort((solution.eigenvalues.imag, -solution.eigenvalues.real))
    lam = solution.eigenvalues[order]
    dominant = _dominant_info(solution, order)
    verdict = stability_verdict(lam, scenario.analysis.stability_margin)
    records = tuple(
        (i, lam[i].real, lam[i].imag, dominant[i][0], dominant[i][1], "", "")
        for i in range(lam.size)
    )
    return records, verdict, lam


def run_command(command: str, scenario: Scenario, **options) -> ResultSet:
    """Assemble the scenario and run one analysis command."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command '{command}' (choose from {COMMANDS})")
    jobs = int(options.get("jobs") or 1)

    if command == "eig":
        system = assemble_system(scenario)
        records, verdict, _ = _eigen_records(system, scenario)
        meta = {
            "command": "eig",
            "stable": verdict.stable,
            "stability_margin": verdict.margin,
            "n_unstable": verdict.n_unstable,
            "worst_re": None if verdict.worst_eigenvalue is None else verdict.worst_eigenvalue.real,
        }
        return ResultSet("eigenvalues", EIGEN_COLUMNS, records, meta)

    if command == "htf":
        s_point = options.get("s")
        if s_point is None:
            raise ConfigurationError("htf needs a Laplace point (--s)")
        system = assemble_system(scenario)
        ports = options.get("ports")
        g = evaluate_htf(system.model, complex(s_point), ports)
        records = tuple(
            (i, k, g[i, k].real, g[i, k].imag)
            for i in range(g.shape[0])
            for k in range(g.shape[1])
        )
        meta = {"command": "htf", "s": str(complex(s_point)), "shape": list(g.shape)}
        return ResultSet("matrix", MATRIX_COLUMNS, records, meta)

    if command == "sweep":
        path, values = _sweep_spec(scenario, options)
        trace = sweep_parameter(
            scenario,
            path,
            values,
            refine_on_crossing=bool(options.get("refine_on_crossing", True)),
            jobs=jobs,
        )
        records = tuple(
            (trace.values[k], t, trace.traces[t, k].real, trace.traces[t, k].imag)
            for k in range(len(trace.values))
            for t in range(trace.traces.shape[0])
        )
        meta = {
            "command": "sweep",
            "parameter": path,
            "steps": len(trace.values),
            "unresolved_steps": int(trace.unresolved.any(axis=0).sum()),
        }
        return ResultSet("traces", TRACE_COLUMNS, records, meta)

    if command == "classify":
        control = tuple(options.get("control_parameters") or scenario.analysis.control_parameters)
        hardware = tuple(options.get("hardware_parameters") or scenario.analysis.hardware_parameters)
        eps = options.get("epsilon")
        if eps is None:
            eps = scenario.analysis.classification_tolerance
        result = classify_eigenvalues(
            scenario, control, hardware, epsilon=eps, jobs=jobs
        )
        system = assemble_system(scenario)
        solution = eigen_decompose(system.model)
        perm, _ = _align(solution.eigenvalues, result.eigenvalues)
        dominant = _dominant_info(solution, perm)
        records = tuple(
            (
                i,
                result.eigenvalues[i].real,
                result.eigenvalues[i].imag,
                dominant[i][0],
                dominant[i][1],
                result.labels[i],
                "",
            )
            for i in range(result.eigenvalues.size)
        )
        meta = {
            "command": "classify",
            "epsilon": result.epsilon,
            "control_parameters": list(control),
            "hardware_parameters": list(hardware),
            "counts": {
                label: int(sum(1 for l in result.labels if l == label))
                for label in ("CDV", "CDI", "DI", "unresolved")
            },
        }
        return ResultSet("eigenvalues", EIGEN_COLUMNS, records, meta)

    # spurious
    delta = options.get("delta")
    if delta is None:
        delta = scenario.analysis.spurious_tolerance
    report = detect_spurious(
        scenario,
        hmax_probe=options.get("hmax_probe"),
        delta=delta,
    )
    system = assemble_system(scenario)
    solution = eigen_decompose(system.model)
    perm, _ = _align(solution.eigenvalues, report.eigenvalues)
    dominant = _dominant_info(solution, perm)
    verdict = stability_verdict(
        report.eigenvalues, scenario.analysis.stability_margin, spurious=report.spurious
    )
    records = tuple(
        (
            i,
            report.eigenvalues[i].real,
            report.eigenvalues[i].imag,
            dominant[i][0],
            dominant[i][1],
            "",
            "spurious" if report.spurious[i] else ("boundary" if report.boundary_suspect[i] else "ok"),
        )
        for i in range(report.eigenvalues.size)
    )
    meta = {
        "command": "spurious",
        "hmax": report.hmax,
        "hmax_probe": report.hmax_probe,
        "delta": report.delta,
        "n_spurious": int(report.spurious.sum()),
        "n_boundary_suspect": int(report.boundary_suspect.sum()),
        "stable": verdict.stable,
    }
    return ResultSet("eigenvalues", EIGEN_COLUMNS, records, meta)


def _align(lam_from, lam_to):
    from .analysis import match_eigenvalues

    perm, cost = match_eigenvalues(lam_to, lam_from)
    return perm, cost


def _sweep_spec(scenario: Scenario, options):
    name = options.get("sweep_name")
    if name:
        if name not in scenario.sweeps:
            raise ConfigurationError(
                f"scenario defines no sweep '{name}' (has {sorted(scenario.sweeps)})"
            )
        sw = scenario.sweeps[name]
        return sw.path, sw.values
    path = options.get("parameter")
    values = options.get("values")
    if not path or values is None:
        raise ConfigurationError("sweep needs --sweep NAME or --param PATH --values ...")
    return path, tuple(float(v) for v in values)


def export_results(results: ResultSet, fmt: str, destination, timestamp: bool = True) -> None:
    """Write a result set as CSV or JSON; numbers round-trip exactly."""
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"unknown export format '{fmt}'")
    if not results.records:
        raise ConfigurationError("refusing to export an empty result set")
    text = _to_csv(results, timestamp) if fmt == "csv" else _to_json(results, timestamp)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _num(value)
    return str(value)


def _to_csv(results: ResultSet, timestamp: bool) -> str:
    buf = io.StringIO()
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat()
        buf.write(f"# generated {now}\n")
    for key in sorted(results.meta):
        buf.write(f"# {key}={json.dumps(results.meta[key], sort_keys=True)}\n")
    buf.write(",".join(results.columns) + "\n")
    for rec in results.records:
        buf.write(",".join(_format_cell(v) for v in rec) + "\n")
    return buf.getvalue()


def _to_json(results: ResultSet, timestamp: bool) -> str:
    def clean(value):
        if isinstance(value, (np.integer,)):
            return int(value)
        if isinstance(value, (np.floating,)):
            return float(value)
        return value

    doc = {
        "kind": results.kind,
        "meta": dict(sorted(results.meta.items())),
        "columns": list(results.columns),
        "records": [
            {col: clean(v) for col, v in zip(results.columns, rec)}
            for rec in results.records
        ],
    }
    if timestamp:
        doc["generated"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
