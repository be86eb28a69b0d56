"""Command-line interface: ``pra check|smax|solve|dynamic|generate``.

Exit codes: 0 ok, 1 domain-infeasible, 2 input error, 3 model infeasible,
4 timeout, 5 dynamic run terminated.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .combinatorics import InfeasibleCensusError, check_feasibility, s_max_value
from .core import Instance, InstanceError, census, dump_assignment, dump_instance, load_instance, _parse_text
from .dynamic import DynamicConfig, DynamicError, run_dynamic, write_iterations_csv
from .formulations import VARIANTS, FormulationError, Variant, build, evaluate_objectives, extract_assignment
from .generator import GeneratorParams, generate
from .solver import BackendFailure, SolveLimits, Status, make_backend, solve, verify

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_MODEL_INFEASIBLE, EXIT_TIMEOUT, EXIT_TERMINATED = range(6)


@dataclass
class RunReport:
    instance: str
    rows: list[dict[str, Any]] = field(default_factory=list)  # one per period
    summary: dict[str, Any] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK

    def to_dict(self) -> dict:
        return asdict(self)


def _period_rows(instance: Instance, with_smax: bool) -> list[dict[str, Any]]:
    rows = []
    for t in instance.periods:
        c = census(instance, t)
        verdict = check_feasibility(c)
        row = {"t": t, "F": c.F, "M": c.M, "F_priv": c.F_priv, "M_priv": c.M_priv,
               "feasible": verdict.feasible, "method": verdict.method.value}
        if with_smax:
            if verdict.feasible:
                row["s_max"], row["s_max_method"] = s_max_value(c)
            else:
                row["s_max"], row["s_max_method"] = None, None
        rows.append(row)
    return rows


def _instance_name(path: str, instance: Instance) -> str:
    return instance.name or Path(path).stem


def _out_path(args, path: str, suffix: str, multi: bool) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    if multi:
        out.mkdir(parents=True, exist_ok=True)
        return out / f"{Path(path).stem}{suffix}"
    return out


# ---------------------------------------------------------------------------
# commands, each returning a RunReport for one instance


def cmd_check(args, path: str, multi: bool = False) -> RunReport:
    inst = load_instance(path)
    rows = _period_rows(inst, with_smax=False)
    bad = [r["t"] for r in rows if not r["feasible"]]
    return RunReport(_instance_name(path, inst), rows, {"infeasible_periods": bad},
                     exit_code=EXIT_INFEASIBLE if bad else EXIT_OK)


def cmd_smax(args, path: str, multi: bool = False) -> RunReport:
    inst = load_instance(path)
    rows = _period_rows(inst, with_smax=True)
    bad = [r["t"] for r in rows if not r["feasible"]]
    summary: dict[str, Any] = {"infeasible_periods": bad}
    if not bad:
        summary["s_max_total"] = sum(r["s_max"] for r in rows)
    return RunReport(_instance_name(path, inst), rows, summary,
                     exit_code=EXIT_INFEASIBLE if bad else EXIT_OK)


def _backend(args):
    if args.backend == "external" or (args.backend_cmd and args.backend is None):
        return make_backend("external", args.backend_cmd)
    return make_backend(args.backend or "scipy")


def cmd_solve(args, path: str, multi: bool = False) -> RunReport:
    inst = load_instance(path)
    variant = Variant.parse(args.variant, with_conflicts=args.conflicts, with_objective_cuts=args.cuts)
    rows = _period_rows(inst, with_smax=False)
    report = RunReport(_instance_name(path, inst), rows)
    if not all(r["feasible"] for r in rows):
        report.summary = {"variant": variant.id, "status": "CombinatoriallyInfeasible"}
        report.exit_code = EXIT_INFEASIBLE
        return report
    model = build(inst, variant)
    result = solve(model, _backend(args), SolveLimits(time_limit=args.time_limit))
    report.summary = {"variant": variant.id, "status": result.status.value,
                      "objectives": {o.label: v for o, v in zip(model.objectives, result.objective_values)},
                      "wall_time_s": round(result.wall_time, 6), "variables": len(model.vars),
                      "constraints": len(model.constraints)}
    if result.status == Status.BACKEND_ERROR:
        raise BackendFailure(result.message)
    if result.status == Status.INFEASIBLE:
        report.exit_code = EXIT_MODEL_INFEASIBLE
        return report
    if not result.has_values:
        report.exit_code = EXIT_TIMEOUT
        return report
    if not verify(model, result):
        raise BackendFailure("solution failed verification")
    optimal = result.status == Status.OPTIMAL
    f_trans, f_priv = evaluate_objectives(inst, model, result.values, variant, optimal=optimal)
    report.summary.update(f_trans=f_trans, f_priv=f_priv)
    out = _out_path(args, path, ".assignment.json", multi)
    if out is not None:
        dump_assignment(extract_assignment(inst, model, result.values, variant), out)
        report.outputs.append(str(out))
    report.exit_code = EXIT_OK if optimal else EXIT_TIMEOUT
    return report


def cmd_dynamic(args, path: str, multi: bool = False) -> RunReport:
    inst = load_instance(path)
    backend = _backend(args) if (args.backend or args.backend_cmd) else None
    config = DynamicConfig(ostar_time_limit=args.time_limit or 20.0, backend=backend,
                           stage_time_limit=args.stage_time_limit)
    result = run_dynamic(inst, config)
    report = RunReport(_instance_name(path, inst), result.rows())
    report.summary = {"f_trans": result.f_trans, "f_priv": result.f_priv, "s_max": result.s_max,
                      "ratio": round(result.ratio, 6), "iterations": len(result.steps),
                      "terminated_at": result.terminated_at,
                      "total_wall_time_s": round(sum(s.wall_time for s in result.steps), 6)}
    out = _out_path(args, path, ".iterations.csv", multi)
    if out is not None:
        write_iterations_csv(result, out)
        report.outputs.append(str(out))
    if args.chart:
        chart = Path(args.chart)
        if multi:
            chart.mkdir(parents=True, exist_ok=True)
            chart = chart / f"{Path(path).stem}.svg"
        chart.write_text(runtime_svg([s.wall_time for s in result.steps], title=report.instance))
        report.outputs.append(str(chart))
    report.exit_code = EXIT_OK if result.completed else EXIT_TERMINATED
    return report


def _parse_mix(text: str) -> dict[int, float]:
    mix = {}
    for part in text.split(","):
        cap, _, frac = part.partition(":")
        mix[int(cap)] = float(frac)
    return mix


def generator_params(args) -> GeneratorParams:
    doc: dict[str, Any] = {}
    if args.params:
        p = Path(args.params)
        doc.update(_parse_text(p.read_text(), p.suffix))
    flags = {"n_rooms": args.rooms, "days": args.days, "mean_daily_arrivals": args.arrivals,
             "median_los": args.median_los, "median_lead_time": args.median_lead,
             "private_fraction": args.private, "emergency_fraction": args.emergency,
             "female_fraction": args.female, "burn_in": args.burn_in, "seed": args.seed}
    doc.update({k: v for k, v in flags.items() if v is not None})
    if args.capacity_mix:
        doc["capacity_mix"] = _parse_mix(args.capacity_mix)
    return GeneratorParams.from_dict(doc)


# ---------------------------------------------------------------------------
# SVG


def runtime_svg(times: Sequence[float], title: str = "", width: int = 720, height: int = 320) -> str:
    """Line chart of per-iteration runtimes with a box plot on the right."""
    pad_l, pad_r, pad_t, pad_b, box_w = 56, 96, 28, 36, 40
    plot_w, plot_h = width - pad_l - pad_r, height - pad_t - pad_b
    top = max(max(times, default=0.0), 1e-9)
    n = len(times)

    def xy(i: int, v: float) -> tuple[float, float]:
        x = pad_l + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)
        return x, pad_t + plot_h * (1 - v / top)

    def esc(s: str) -> str:
        return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<text x="{pad_l}" y="16" font-size="13">{esc(title)} runtime per iteration (s)</text>',
             f'<line x1="{pad_l}" y1="{pad_t + plot_h}" x2="{pad_l + plot_w}" y2="{pad_t + plot_h}" stroke="black"/>',
             f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + plot_h}" stroke="black"/>']
    for k in range(5):
        v = top * k / 4
        _, y = xy(0, v)
        parts.append(f'<text x="{pad_l - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
        parts.append(f'<line x1="{pad_l}" y1="{y:.1f}" x2="{pad_l + plot_w}" y2="{y:.1f}" stroke="#ddd"/>')
    if n:
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in (xy(i, v) for i, v in enumerate(times)))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.2"/>')
        parts.append(f'<text x="{pad_l + plot_w / 2}" y="{height - 8}" text-anchor="middle">iteration (1..{n})</text>')
        s = sorted(times)

        def q(p: float) -> float:
            pos = p * (n - 1)
            lo = int(pos)
            hi = min(lo + 1, n - 1)
            return s[lo] + (s[hi] - s[lo]) * (pos - lo)

        bx = pad_l + plot_w + (pad_r - box_w) / 2
        y_min, y_q1, y_med, y_q3, y_max = (xy(0, q(p))[1] for p in (0, 0.25, 0.5, 0.75, 1))
        cx = bx + box_w / 2
        parts += [f'<line x1="{cx}" y1="{y_max:.1f}" x2="{cx}" y2="{y_min:.1f}" stroke="black"/>',
                  f'<rect x="{bx}" y="{y_q3:.1f}" width="{box_w}" height="{max(y_q1 - y_q3, 0.5):.1f}" '
                  f'fill="#aec7e8" stroke="black"/>',
                  f'<line x1="{bx}" y1="{y_med:.1f}" x2="{bx + box_w}" y2="{y_med:.1f}" stroke="black" stroke-width="2"/>']
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# plumbing


def _print_report(report: RunReport, as_json: bool, stream=None) -> None:
    stream = stream or sys.stdout
    if as_json:
        stream.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
        return
    stream.write(f"# {report.instance}\n")
    if report.rows:
        cols = list(report.rows[0])
        stream.write("\t".join(cols) + "\n")
        for row in report.rows:
            stream.write("\t".join("" if row.get(c) is None else str(row.get(c)) for c in cols) + "\n")
    for k, v in report.summary.items():
        stream.write(f"{k}: {v}\n")
    for o in report.outputs:
        stream.write(f"wrote {o}\n")


def _run_one(command: Callable, args, path: str, multi: bool) -> RunReport:
    try:
        return command(args, path, multi)
    except (InstanceError, OSError, ValueError, FormulationError) as exc:
        where = f" at {exc.path}" if isinstance(exc, InstanceError) and exc.path else ""
        return RunReport(Path(path).stem, summary={"error": f"{exc}{where}"}, exit_code=EXIT_INPUT)
    except (BackendFailure, DynamicError) as exc:
        return RunReport(Path(path).stem, summary={"error": str(exc)}, exit_code=EXIT_INPUT)


COMMANDS = {"check": cmd_check, "smax": cmd_smax, "solve": cmd_solve, "dynamic": cmd_dynamic}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pra", description="Patient-to-room assignment toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, instances=True):
        if instances:
            p.add_argument("--instance", "-i", action="append", required=True,
                           help="instance file (JSON or YAML); repeat for batches")
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes for batches")
        p.add_argument("--out", "-o", help="output file (directory when several instances are given)")
        p.add_argument("--json", action="store_true", help="print reports as JSON lines")

    def solving(p):
        p.add_argument("--backend", choices=("embedded", "scipy", "external"), default=None,
                       help="solver backend (default: scipy, or external when --backend-cmd is set)")
        p.add_argument("--backend-cmd", help="external solver command template with {model_path} "
                                             "{solution_path} [{time_limit}]")
        p.add_argument("--time-limit", type=float, default=None)

    p = sub.add_parser("check", help="per-period combinatorial feasibility")
    common(p)
    p = sub.add_parser("smax", help="single-room maxima per period and in total")
    common(p)
    p = sub.add_parser("solve", help="solve one formulation")
    common(p)
    solving(p)
    p.add_argument("--variant", default="H", choices=VARIANTS + ("O*", "P*"))
    p.add_argument("--conflicts", action="store_true", help="add conflict-pair rows")
    p.add_argument("--cuts", action="store_true", help="add per-period single-room cuts")
    p = sub.add_parser("dynamic", help="rolling-horizon run")
    common(p)
    solving(p)
    p.set_defaults(time_limit=None)
    p.add_argument("--stage-time-limit", type=float, default=None, help="per-stage limit for P, Pstar and H")
    p.add_argument("--chart", help="write an SVG runtime chart here")
    p = sub.add_parser("generate", help="synthetic instance")
    common(p, instances=False)
    p.add_argument("--params", help="parameter document (JSON or YAML)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--days", type=int)
    p.add_argument("--rooms", type=int)
    p.add_argument("--capacity-mix", help="e.g. 1:0.25,2:0.75")
    p.add_argument("--arrivals", type=float, help="mean arrivals per day")
    p.add_argument("--median-los", type=float)
    p.add_argument("--median-lead", type=float)
    p.add_argument("--private", type=float)
    p.add_argument("--emergency", type=float)
    p.add_argument("--female", type=float)
    p.add_argument("--burn-in", type=int)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK

    if args.command == "generate":
        try:
            inst = generate(generator_params(args))
        except (ValueError, OSError, InstanceError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        text = dump_instance(inst, args.out)
        if args.out:
            print(f"wrote {args.out} ({len(inst.patients)} patients, {len(inst.ward)} rooms, T={inst.horizon})")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    command = COMMANDS[args.command]
    paths = args.instance
    multi = len(paths) > 1
    if args.jobs > 1 and multi:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_run_one, [command] * len(paths), [args] * len(paths), paths,
                                    [multi] * len(paths)))
    else:
        reports = [_run_one(command, args, p, multi) for p in paths]
    for r in reports:
        _print_report(r, args.json)
        if "error" in r.summary:
            print(f"error ({r.instance}): {r.summary['error']}", file=sys.stderr)
    return max(r.exit_code for r in reports)


if __name__ == "__main__":
    sys.exit(main())
