"""Command-line front end: analyze, sweep, roofline export, verify.

Exit codes: 0 success, 1 analysis error (bad input), 2 verification failure.
Serialized outputs use a fixed field order and shortest round-trip float
formatting, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from fractions import Fraction

from . import baselines, hwdb, kernels, roofline, transform

GSTENCIL = 1e9


class CliError(Exception):
    """Bad command-line input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _parse_sparsity(text: str) -> float:
    try:
        value = float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise CliError(f"cannot parse sparsity {text!r}: {exc}") from exc
    if not (0.0 < value <= 1.0):
        raise CliError(f"sparsity must lie in (0, 1], got {text!r}")
    return value


def _parse_range(text: str):
    parts = text.split(":")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError("too many ':'")
    except ValueError as exc:
        raise CliError(f"cannot parse range {text!r} (expected N or LO:HI): {exc}") from exc
    if lo < 1 or hi < lo:
        raise CliError(f"invalid fusion-depth range {text!r}")
    return range(lo, hi + 1)


def _parse_band(text: str):
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise CliError(f"cannot parse band {text!r} (expected LO:HI): {exc}") from exc
    if not (0 < lo <= hi):
        raise CliError(f"invalid neutral band {text!r}")
    return (lo, hi)


def _parse_mma(text: str) -> transform.MmaShape:
    m = re.fullmatch(r"m(\d+)n(\d+)k(\d+)", text)
    if not m:
        raise CliError(f"cannot parse MMA shape {text!r} (expected e.g. m8n8k4)")
    return transform.MmaShape(*(int(g) for g in m.groups()))


def _add_common_args(p):
    p.add_argument("--shape", choices=kernels.KERNEL_SHAPES, default="box")
    p.add_argument("--dim", type=int, default=2, help="grid dimensionality")
    p.add_argument("--radius", type=int, default=1, help="stencil radius")
    p.add_argument("--dtype", choices=sorted(roofline.DTYPES), default="double")
    p.add_argument("--weights", help="CSV file of offset coordinates plus weight")
    p.add_argument(
        "--scheme",
        choices=transform.SCHEME_KINDS,
        default="flattening",
        help="operand construction scheme used to derive sparsity",
    )
    p.add_argument("--mma", help="MMA tile, e.g. m8n8k4 (default: per-dtype preset)")
    p.add_argument(
        "--sparsity",
        help="override operand sparsity, e.g. 0.5 or 15/32 (skips scheme construction)",
    )
    p.add_argument("--profile", default=hwdb.A100_NAME, help="hardware profile name")
    p.add_argument("--profiles-file", help="TOML profile file (entries shadow built-ins)")
    p.add_argument(
        "--units",
        default="cuda,tensor",
        help="comma list of units to report: cuda,tensor,sparse",
    )
    p.add_argument("--neutral-band", default="0.9:1.1", help="speedup band reported neutral")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out", help="write output to this path instead of stdout")


def build_parser() -> _Parser:
    parser = _Parser(prog="stencilroof", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="single-configuration scenario report")
    _add_common_args(p)
    p.add_argument("--t", type=int, default=1, help="temporal fusion depth")

    p = sub.add_parser("sweep", help="per-depth table over a fusion range")
    _add_common_args(p)
    p.add_argument("--t-range", default="1:8", help="fusion depths, LO:HI inclusive")

    p = sub.add_parser("roofline", help="export roofline polylines and workload markers")
    _add_common_args(p)
    p.add_argument(
        "--t-range", default="1:8",
        help="fusion depths for workload markers, LO:HI or 'none' for polylines only",
    )

    p = sub.add_parser("verify", help="run the built-in golden checks")
    p.add_argument("--profile", default=hwdb.A100_NAME)
    p.add_argument("--profiles-file")
    p.add_argument("--out")
    return parser


def _resolve_units(text: str):
    alias = {"cuda": roofline.UNIT_CUDA, "tensor": roofline.UNIT_TENSOR,
             "sparse": roofline.UNIT_SPARSE, "sparse_tensor": roofline.UNIT_SPARSE}
    units = []
    for item in text.split(","):
        item = item.strip()
        if item not in alias:
            raise CliError(f"unknown unit {item!r} (expected cuda, tensor or sparse)")
        if alias[item] not in units:
            units.append(alias[item])
    if roofline.UNIT_TENSOR not in units and roofline.UNIT_SPARSE not in units:
        raise CliError("at least one of tensor/sparse must be requested")
    return units


def _build_config(args, steps: int):
    """Resolve CLI arguments into the kernel, fused kernel and model inputs."""
    weights = None
    if args.weights:
        weights = kernels.load_weights_csv(args.weights, args.dim)
    try:
        kernel = kernels.make_kernel(args.shape, args.dim, args.radius, weights)
        fused = kernels.fuse(kernel, steps)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    redundancy = kernels.fusion_redundancy(kernel, steps)

    if args.sparsity is not None:
        sparsity = _parse_sparsity(args.sparsity)
        scheme_label = f"override ({args.sparsity})"
    else:
        if args.mma:
            mma = _parse_mma(args.mma)
        elif args.scheme == "flattening":
            mma = transform.MMA_DOUBLE if args.dtype == "double" else transform.MMA_FLOAT
        else:
            mma = transform.MMA_DECOMPOSITION_DEFAULT
        scheme = transform.TransformScheme(args.scheme, mma)
        try:
            operands = transform.build_operands(fused, scheme)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        sparsity = operands.sparsity
        scheme_label = f"{args.scheme} (mma m{mma.m}n{mma.n}k{mma.k})"

    try:
        profile = hwdb.get_profile(args.profile, args.profiles_file)
    except hwdb.ProfileError as exc:
        raise CliError(str(exc)) from exc
    if args.dtype not in profile.dtypes:
        raise CliError(
            f"profile {profile.name!r} has no datatype {args.dtype!r} "
            f"(available: {sorted(profile.dtypes)})"
        )
    units = _resolve_units(args.units)
    return kernel, fused, redundancy, sparsity, scheme_label, profile, units


def _report_for(args, steps: int):
    kernel, fused, redundancy, sparsity, scheme_label, profile, units = _build_config(args, steps)
    peaks = profile.dtypes[args.dtype]
    tc_unit = roofline.UNIT_SPARSE if roofline.UNIT_SPARSE in units else roofline.UNIT_TENSOR
    if tc_unit == roofline.UNIT_SPARSE and peaks.tc_sparse is None:
        raise CliError(
            f"profile {profile.name!r} has no sparse matrix-unit peak for {args.dtype!r}"
        )
    report = roofline.analyze(
        points=kernel.point_count,
        dtype_size=roofline.DTYPES[args.dtype].size,
        steps=steps,
        redundancy=redundancy,
        sparsity=sparsity,
        bandwidth=profile.bandwidth,
        peak_cuda=peaks.cuda,
        peak_tensor=peaks.tc_dense,
        peak_sparse=peaks.tc_sparse if roofline.UNIT_SPARSE in units else None,
        tc_unit=tc_unit,
        fused_points=fused.point_count,
        neutral_band=_parse_band(args.neutral_band),
    )
    return report, scheme_label, profile


def _unit_dict(res: roofline.UnitResult) -> dict:
    return {
        "unit": res.unit,
        "intensity": res.point.intensity,
        "ridge": res.point.ridge,
        "bound": res.point.bound,
        "p_raw": res.point.p_raw,
        "p_actual": res.point.p_actual,
        "rate_bound_gstencils": res.rate_bound / GSTENCIL,
    }


def _report_dict(report: roofline.ScenarioReport, scheme_label, profile, args, steps) -> dict:
    units = [_unit_dict(report.cu)]
    for unit in (roofline.UNIT_TENSOR, roofline.UNIT_SPARSE):
        if unit in report.extra_units:
            units.append(_unit_dict(report.extra_units[unit]))
    return {
        "config": {
            "shape": args.shape,
            "dim": args.dim,
            "radius": args.radius,
            "dtype": args.dtype,
            "t": steps,
            "points": report.points,
            "fused_points": report.fused_points,
            "redundancy": report.redundancy,
            "sparsity": report.sparsity,
            "scheme": scheme_label,
            "profile": profile.name,
            "comparison_unit": report.tc_unit,
        },
        "units": units,
        "scenario": report.scenario,
        "speedup_ratio": report.speedup_ratio,
        "sweet_spot": report.sweet_spot,
        "verdict": report.verdict,
        "recommendation": report.recommendation,
    }


def _render_analyze_table(data: dict) -> str:
    cfg = data["config"]
    lines = [
        f"stencil        : {cfg['shape']} {cfg['dim']}d r={cfg['radius']} "
        f"(K={cfg['points']}), fused t={cfg['t']} -> {cfg['fused_points']} points",
        f"datatype       : {cfg['dtype']}",
        f"profile        : {cfg['profile']}",
        f"scheme         : {cfg['scheme']}",
        f"redundancy     : {cfg['redundancy']:.4f}",
        f"sparsity       : {cfg['sparsity']:.4f}",
        "",
        f"{'unit':<14}{'intensity':>10}{'ridge':>7}{'bound':>9}"
        f"{'P_raw':>12}{'P_actual':>12}{'rate bound':>16}",
    ]
    for u in data["units"]:
        lines.append(
            f"{u['unit']:<14}{u['intensity']:>10.2f}{round(u['ridge']):>7}{u['bound']:>9}"
            f"{u['p_raw']:>12.3e}{u['p_actual']:>12.3e}"
            f"{u['rate_bound_gstencils']:>11.1f} GSt/s"
        )
    lines += [
        "",
        f"scenario       : {data['scenario']}",
        f"speedup ratio  : {data['speedup_ratio']:.4f}",
        f"sweet spot     : {'yes' if data['sweet_spot'] else 'no'}",
        f"verdict        : {data['verdict']}",
        f"recommendation : {data['recommendation']}",
        "",
        "note: rates are model upper bounds, not measurements",
    ]
    return "\n".join(lines) + "\n"


_ANALYZE_CSV_FIELDS = (
    "unit", "intensity", "ridge", "bound", "p_raw", "p_actual",
    "rate_bound_gstencils", "scenario", "speedup_ratio", "sweet_spot",
    "verdict", "recommendation",
)


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render_analyze_csv(data: dict) -> str:
    rows = [",".join(_ANALYZE_CSV_FIELDS)]
    for u in data["units"]:
        record = dict(u)
        record.update(
            scenario=data["scenario"],
            speedup_ratio=data["speedup_ratio"],
            sweet_spot=data["sweet_spot"],
            verdict=data["verdict"],
            recommendation=data["recommendation"],
        )
        rows.append(",".join(_csv_cell(record[f]) for f in _ANALYZE_CSV_FIELDS))
    return "\n".join(rows) + "\n"


def cmd_analyze(args) -> tuple:
    report, scheme_label, profile = _report_for(args, args.t)
    data = _report_dict(report, scheme_label, profile, args, args.t)
    if args.format == "json":
        return json.dumps(data, indent=2) + "\n", 0
    if args.format == "csv":
        return _render_analyze_csv(data), 0
    return _render_analyze_table(data), 0


_SWEEP_FIELDS = (
    "t", "redundancy", "sparsity", "i_cuda", "i_tc", "bound_cuda", "bound_tc",
    "scenario", "speedup_ratio", "sweet_spot", "t_star",
)


def cmd_sweep(args) -> tuple:
    depths = _parse_range(args.t_range)
    rows = []
    t_star = None
    for steps in depths:
        report, scheme_label, profile = _report_for(args, steps)
        if t_star is None:
            peaks = profile.dtypes[args.dtype]
            t_star = roofline.min_fusion_depth(
                report.points, report.dtype_size, peaks.cuda, profile.bandwidth
            )
        rows.append({
            "t": steps,
            "redundancy": report.redundancy,
            "sparsity": report.sparsity,
            "i_cuda": report.cu.point.intensity,
            "i_tc": report.tc.point.intensity,
            "bound_cuda": report.cu.point.bound,
            "bound_tc": report.tc.point.bound,
            "scenario": report.scenario,
            "speedup_ratio": report.speedup_ratio,
            "sweet_spot": report.sweet_spot,
            "t_star": t_star,
        })
    if args.format == "json":
        return json.dumps({"rows": rows, "t_star": t_star}, indent=2) + "\n", 0
    if args.format == "csv":
        out = [",".join(_SWEEP_FIELDS)]
        for row in rows:
            out.append(",".join(_csv_cell(row[f]) for f in _SWEEP_FIELDS))
        return "\n".join(out) + "\n", 0
    lines = [
        f"{'t':>3}{'redund.':>9}{'sparsity':>10}{'I_cuda':>9}{'I_tc':>10}"
        f"{'cuda':>8}{'tc':>8}{'scen':>6}{'ratio':>9}{'sweet':>7}"
    ]
    for row in rows:
        marker = " <- compute-bound transition" if row["t"] == t_star else ""
        lines.append(
            f"{row['t']:>3}{row['redundancy']:>9.3f}{row['sparsity']:>10.4f}"
            f"{row['i_cuda']:>9.2f}{row['i_tc']:>10.2f}{row['bound_cuda']:>8}"
            f"{row['bound_tc']:>8}{row['scenario']:>6}{row['speedup_ratio']:>9.3f}"
            f"{'yes' if row['sweet_spot'] else 'no':>7}{marker}"
        )
    lines.append(f"minimum depth to scalar compute-bound: t* = {t_star}")
    return "\n".join(lines) + "\n", 0


def cmd_roofline(args) -> tuple:
    depths = [] if args.t_range == "none" else _parse_range(args.t_range)
    reports = []
    for steps in depths:
        report, _, profile = _report_for(args, steps)
        reports.append(report)
    try:
        profile = hwdb.get_profile(args.profile, args.profiles_file)
    except hwdb.ProfileError as exc:
        raise CliError(str(exc)) from exc
    if args.dtype not in profile.dtypes:
        raise CliError(f"profile {profile.name!r} has no datatype {args.dtype!r}")
    peaks = profile.dtypes[args.dtype]
    units = _resolve_units(args.units)

    markers = []
    for report in reports:
        for res in [report.cu] + list(report.extra_units.values()):
            if res.unit in units:
                markers.append({
                    "t": report.steps,
                    "unit": res.unit,
                    "intensity": res.point.intensity,
                    "p_raw": res.point.p_raw,
                    "p_actual": res.point.p_actual,
                })
    intensities = [m["intensity"] for m in markers]

    unit_peaks = {roofline.UNIT_CUDA: peaks.cuda, roofline.UNIT_TENSOR: peaks.tc_dense}
    if peaks.tc_sparse is not None:
        unit_peaks[roofline.UNIT_SPARSE] = peaks.tc_sparse
    polylines = {}
    for unit in units:
        if unit not in unit_peaks:
            raise CliError(f"profile {profile.name!r} lacks a peak for unit {unit!r}")
        peak = unit_peaks[unit]
        ridge = peak / profile.bandwidth
        lo = min([ridge / 10.0] + intensities)
        hi = max([ridge * 10.0] + intensities)
        polylines[unit] = {
            "peak": peak,
            "ridge": ridge,
            "bandwidth": profile.bandwidth,
            "polyline": [
                [lo, profile.bandwidth * lo],
                [ridge, peak],
                [hi, peak],
            ],
        }
    data = {"profile": profile.name, "dtype": args.dtype,
            "units": polylines, "workloads": markers}
    if args.format == "csv":
        rows = ["record,unit,t,intensity,performance_raw,performance_actual"]
        for unit, pl in polylines.items():
            for i, p in pl["polyline"]:
                rows.append(f"polyline,{unit},,{i!r},{p!r},{p!r}")
        for m in markers:
            rows.append(
                f"workload,{m['unit']},{m['t']},{m['intensity']!r},"
                f"{m['p_raw']!r},{m['p_actual']!r}"
            )
        return "\n".join(rows) + "\n", 0
    return json.dumps(data, indent=2) + "\n", 0


def cmd_verify(args) -> tuple:
    try:
        profile = hwdb.get_profile(args.profile, args.profiles_file)
    except hwdb.ProfileError as exc:
        raise CliError(str(exc)) from exc
    results = baselines.run_all_checks(profile)
    lines = []
    failures = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        failures += 0 if res.passed else 1
        detail = f"  ({res.detail})" if (res.detail and not res.passed) else ""
        lines.append(f"[{status}] {res.name}{detail}")
    lines.append(f"{len(results) - failures}/{len(results)} checks passed")
    return "\n".join(lines) + "\n", (2 if failures else 0)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "analyze": cmd_analyze,
            "sweep": cmd_sweep,
            "roofline": cmd_roofline,
            "verify": cmd_verify,
        }[args.command]
        output, code = handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (hwdb.ProfileError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(output)
    else:
        sys.stdout.write(output)
    return code


if __name__ == "__main__":
    sys.exit(main())
