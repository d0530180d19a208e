"""Command-line front end: ``reachlab <command> [options]``.

Exit codes: 0 success, 1 error (bad input, failed preconditions), 2 a
verdict or tolerance check failed under ``--assert``. Reports are JSON
(sorted keys) or CSV and embed the run configuration and format version,
so identical inputs and options give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .curvature import DiscreteCurvature, curvature_report
from .flow import run_flow, trace_jsonl, verify_ede
from .formats import FormatError, ObjData, read_obj, read_rgrid, write_obj, write_rgrid
from .grid import distance_transform, outer_margin, parallel_set, volume
from .reach import convex_roundtrip, is_convex, reach_normal_pairs, reach_semigroup
from .regularity import regularity_reach_crosscheck
from .shapes import _KINDS, PointedSample, ShapeSpec, ground_truth, make_curve, make_grid, make_mesh
from .steiner import alternating_fit, fit_grid, fit_steiner, sample_volumes, snap_offsets, tau_fit

FORMAT_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2

_SHAPE_PARAMS = ("radius", "half_width", "rounding", "a", "b", "half_length", "major", "minor")
_NOT_CONFIG = {"command", "config", "output", "format", "handler"}


class CliError(Exception):
    pass


# -- serialization --------------------------------------------------------


def _clean(x):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _flatten(x, prefix=""):
    if isinstance(x, dict):
        for k in sorted(x):
            yield from _flatten(x[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(x, list):
        for i, v in enumerate(x):
            yield from _flatten(v, f"{prefix}.{i}")
    else:
        yield prefix, x


def render(report, fmt):
    report = _clean(report)
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in _flatten(report):
        w.writerow([k, "" if v is None else repr(v) if isinstance(v, float) else v])
    return out.getvalue()


def _config_of(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _envelope(args, result):
    return {"format_version": FORMAT_VERSION, "reachlab": __version__, "command": args.command,
            "config": _config_of(args), "result": result}


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# -- input helpers --------------------------------------------------------


def _sample_from_obj(data):
    if data.lines is None:
        raise CliError("OBJ carrier has no closed polylines (l records)")
    if data.normals is None or len(data.normals) != len(data.vertices):
        raise CliError("OBJ carrier needs one vn per v")
    flagged = np.zeros(len(data.vertices), bool)
    if data.flagged is not None:
        flagged[np.asarray(data.flagged, dtype=np.int64)] = True
    return PointedSample(data.vertices, data.normals, flagged, tuple(data.lines))


def _parse_range(text, h):
    """``lo:hi[:step]`` into snapped offsets; without a step, 17 uniform offsets."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise CliError(f"offset range {text!r} must be lo:hi or lo:hi:step")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else None
    except ValueError:
        raise CliError(f"offset range {text!r} is not numeric") from None
    if not hi > lo:
        raise CliError("offset range needs lo < hi")
    if step is None:
        pts = np.linspace(lo, hi, 17)
    else:
        if not step > 0:
            raise CliError("offset step must be positive")
        pts = lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1)
    return lo, hi, snap_offsets(pts.tolist(), h)


def _floats(text, what):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise CliError(f"{what} must be a comma-separated list of numbers") from None


# -- commands -------------------------------------------------------------


def cmd_gen(args):
    params = {k: getattr(args, k) for k in _SHAPE_PARAMS if getattr(args, k) is not None}
    if args.center is not None:
        params["center"] = tuple(_floats(args.center, "--center"))
    dim = args.dim or _KINDS[args.shape][0][0]
    spec = ShapeSpec.of(args.shape, dim=dim, resolution=args.h, **params)
    result = {"spec": spec.to_dict()}
    if spec.kind != "torus":
        g, truth = make_grid(spec, args.h, args.s_max)
        if args.grid_out is None:
            raise CliError("gen needs --grid-out (or -g) for the RGRID file")
        write_rgrid(g, args.grid_out)
        result.update(size=list(g.size), spacing=g.spacing, origin=list(g.origin), count=g.count)
    else:
        truth = ground_truth(spec)
    result["truth"] = truth.to_dict()
    if args.obj is not None:
        if dim == 2:
            ps = make_curve(spec, args.samples)
            data = ObjData(ps.points, ps.normals, [lp.tolist() for lp in ps.loops], None,
                           np.flatnonzero(ps.flagged))
        else:
            mesh, _ = make_mesh(spec, args.subdivisions)
            data = ObjData(mesh.vertices, None, None, mesh.faces, None)
        write_obj(data, args.obj)
        result["obj_vertices"] = len(data.vertices)
    return result, []


def cmd_parallel(args):
    g = read_rgrid(args.input)
    out = parallel_set(g, args.s)
    if args.grid_out:
        write_rgrid(out, args.grid_out)
    return {"s": args.s, "volume": volume(out), "count": out.count, "input_volume": volume(g)}, []


def cmd_steiner_fit(args):
    g = read_rgrid(args.input)
    h = g.spacing
    if args.s is None:
        lo, hi = 0.0, outer_margin(g) - 2 * h
        offsets = snap_offsets(np.linspace(lo, hi, args.count).tolist(), h)
    else:
        lo, hi, offsets = _parse_range(args.s, h)
    zero = {"auto": min(offsets) == 0.0, "on": True, "off": False}[args.zero_step]
    fit = fit_steiner(sample_volumes(g, offsets), g.dim, zero_step=zero)
    tau = tau_fit(g, max(abs(lo), abs(hi)))
    res = fit.to_dict()
    res["tau_fit"] = tau
    failures = []
    if args.expect is not None:
        want = _floats(args.expect, "--expect")
        if len(want) != g.dim + 1:
            raise CliError(f"--expect needs {g.dim + 1} coefficients")
        rel = [abs(c - w) / max(abs(w), 1e-300) for c, w in zip(fit.coeffs, want)]
        res["relative_errors"] = rel
        failures += [f"c_{k} relative error {e:.4g} > {args.rtol}" for k, e in enumerate(rel) if e > args.rtol]
    if fit.max_residual > tau:
        failures.append(f"max_residual {fit.max_residual:.4g} > tau_fit {tau:.4g}")
    return res, failures


def cmd_reach(args):
    failures = []
    if args.input.lower().endswith(".obj"):
        est = reach_normal_pairs(_sample_from_obj(read_obj(args.input)), drop_flagged=args.drop_flagged)
        threshold = args.min_reach
    else:
        g = read_rgrid(args.input)
        if args.r_max is None:
            raise CliError("--r-max is required for grid input")
        est = reach_semigroup(g, args.r_max, args.mode)
        threshold = args.min_reach if args.min_reach is not None else args.r_max - 2 * g.spacing
    res = est.to_dict()
    if threshold is not None:
        res["threshold"] = threshold
        if est.value < threshold:
            failures.append(f"reach {est.value:.6g} < {threshold:.6g}")
    return res, failures


def cmd_regularity(args):
    ps = _sample_from_obj(read_obj(args.input))
    rep = regularity_reach_crosscheck(ps, probes=args.probes, window=args.window, kappa=args.kappa, alpha=args.alpha)
    res = rep.to_dict()
    return res, [] if rep.consistent else ["regularity and reach verdicts disagree"]


def cmd_curvature(args):
    dc = DiscreteCurvature.from_obj(read_obj(args.input))
    rep = curvature_report(dc, args.chi)
    failures = []
    if rep.gauss_bonnet_residual is not None and rep.gauss_bonnet_residual > args.gb_tol:
        failures.append(f"gauss_bonnet_residual {rep.gauss_bonnet_residual:.3g} > {args.gb_tol}")
    return rep.to_dict(), failures


def cmd_flow(args):
    g = read_rgrid(args.input)
    carrier = _sample_from_obj(read_obj(args.carrier)) if args.carrier else None
    dt = None if args.dt in (None, "auto") else float(args.dt)
    trace = run_flow(g, dt=dt, horizon_cap=args.horizon_cap, reach=args.reach, carrier=carrier)
    ede = verify_ede(trace)
    summary = {"ede_residual": ede, "ede_relative": ede / trace.W_values[0], "affine_r2": trace.affine_r2(),
               "speeds": trace.speeds()}
    failures = []
    if args.expect_terminal and trace.terminal_class != args.expect_terminal:
        failures.append(f"terminal_class {trace.terminal_class} != {args.expect_terminal}")
    if args.ede_rtol is not None and summary["ede_relative"] > args.ede_rtol:
        failures.append(f"ede_relative {summary['ede_relative']:.4g} > {args.ede_rtol}")
    return {"trace": trace, "summary": summary}, failures


def crosscheck(g, r, carrier=None, count=17):
    """Run every reach test at radius ``r`` and compare their verdicts.

    Boundary verdicts (alternating fit, boundary semigroup reach, convex
    roundtrip, regularity vs normal-pair reach) must agree. A set whose
    outer Steiner fit holds while its own semigroup test finds a violation
    is reported as ``outer-Steiner-only``.
    """
    h = g.spacing
    field = distance_transform(g)
    verdicts, details = {}, {}
    _, alt = alternating_fit(g, r, count, field)
    verdicts["alternating_fit"] = alt.holds
    details["alternating_fit"] = alt.to_dict()
    outer = fit_grid(g, 0.0, r, count, field)
    tau = tau_fit(g, r)
    outer_holds = outer.max_residual <= tau
    details["outer_fit"] = {"holds": outer_holds, "max_residual": outer.max_residual, "tau_fit": tau,
                            "coeffs": list(outer.coeffs)}
    rb = reach_semigroup(g, r, "boundary", field)
    verdicts["reach_boundary"] = rb.value >= r - 2 * h
    details["reach_boundary"] = rb.to_dict()
    rs = reach_semigroup(g, r, "set", field)
    set_ok = rs.value >= r - 2 * h
    details["reach_set"] = rs.to_dict()
    if is_convex(g):
        rt = convex_roundtrip(g, r, field, check_convex=False)
        verdicts["roundtrip"] = rt.ok
        details["roundtrip"] = rt.to_dict()
    if carrier is not None:
        rep = regularity_reach_crosscheck(carrier)
        spacing = rep.reach.details["spacing"]
        verdicts["regularity"] = bool(rep.regular and rep.reach.value >= r - 2 * spacing)
        details["regularity"] = rep.to_dict()
    vals = set(verdicts.values())
    disagree = []
    if len(vals) == 1:
        classification = "unanimous_positive" if vals.pop() else "unanimous_negative"
    else:
        classification = "disagreement"
        pos = sorted(k for k, v in verdicts.items() if v)
        neg = sorted(k for k, v in verdicts.items() if not v)
        disagree = [{"positive": p, "negative": q} for p in pos for q in neg]
    if classification == "unanimous_negative" and outer_holds and not set_ok:
        classification = "outer-Steiner-only"
    return {"r": r, "verdicts": verdicts, "classification": classification, "disagreements": disagree,
            "outer_fit_holds": outer_holds, "set_reach_ok": set_ok, "details": details}


def cmd_crosscheck(args):
    g = read_rgrid(args.input)
    carrier = _sample_from_obj(read_obj(args.carrier)) if args.carrier else None
    res = crosscheck(g, args.r, carrier, args.count)
    failures = [] if res["classification"] != "disagreement" else ["reach verdicts disagree"]
    return res, failures


# -- parser ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1; code 2 is reserved for ``--assert`` failures."""

    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _glue_negative_values(argv):
    """Join ``--opt -0.8:...`` into ``--opt=-0.8:...`` so ranges may start negative."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _common(p):
    p.add_argument("--config", help="JSON file of option values (keys as option names with underscores)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="report format")
    p.add_argument("-o", "--output", help="report path (default stdout)")
    p.add_argument("--assert", dest="check", action="store_true", help="exit 2 when a verdict or tolerance fails")


def build_parser():
    ap = _Parser(prog="reachlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"reachlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a shape fixture as RGRID (and OBJ)")
    p.add_argument("--shape", required=True, choices=sorted(_KINDS))
    p.add_argument("--dim", type=int)
    for name in _SHAPE_PARAMS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    p.add_argument("--center")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--s-max", type=float, default=1.0, help="largest outer offset the grid must hold")
    p.add_argument("-g", "--grid-out")
    p.add_argument("--obj", help="also write the boundary as OBJ (polyline in 2D, mesh in 3D)")
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--subdivisions", type=int, default=3)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("parallel", help="parallel set A_s of a grid")
    p.add_argument("input")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("-g", "--grid-out")
    p.set_defaults(handler=cmd_parallel)

    p = sub.add_parser("steiner-fit", help="fit V(A_s) by a polynomial of degree n")
    p.add_argument("input")
    p.add_argument("--s", help="offsets lo:hi[:step]")
    p.add_argument("--count", type=int, default=17)
    p.add_argument("--zero-step", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--expect", help="comma-separated expected coefficients c_0..c_n")
    p.add_argument("--rtol", type=float, default=0.02)
    p.set_defaults(handler=cmd_steiner_fit)

    p = sub.add_parser("reach", help="reach by the semigroup test (RGRID) or normal pairs (OBJ)")
    p.add_argument("input")
    p.add_argument("--mode", choices=("set", "boundary"), default="set")
    p.add_argument("--r-max", type=float)
    p.add_argument("--drop-flagged", action="store_true")
    p.add_argument("--min-reach", type=float)
    p.set_defaults(handler=cmd_reach)

    p = sub.add_parser("regularity", help="second-difference regularity vs normal-pair reach of an OBJ curve")
    p.add_argument("input")
    p.add_argument("--probes", type=int, default=8)
    p.add_argument("--window", type=float)
    p.add_argument("--kappa", type=float, default=1.25)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(handler=cmd_regularity)

    p = sub.add_parser("curvature", help="quermassintegrals from curvature of an OBJ polyline or mesh")
    p.add_argument("input")
    p.add_argument("--chi", type=float, help="expected Euler characteristic of the body")
    p.add_argument("--gb-tol", type=float, default=1e-8)
    p.set_defaults(handler=cmd_curvature)

    p = sub.add_parser("flow", help="mean-breadth flow trace (JSON lines)")
    p.add_argument("input")
    p.add_argument("--dt", default="auto")
    p.add_argument("--horizon-cap", type=float)
    p.add_argument("--reach", type=float)
    p.add_argument("--carrier", help="OBJ boundary sample of the same body")
    p.add_argument("--expect-terminal", choices=("lower_dimensional", "zero_reach_boundary", "truncated"))
    p.add_argument("--ede-rtol", type=float, help="bound on the EDE residual relative to the initial W")
    p.set_defaults(handler=cmd_flow)

    p = sub.add_parser("crosscheck", help="compare all reach verdicts at radius r")
    p.add_argument("input")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--carrier")
    p.add_argument("--count", type=int, default=17)
    p.set_defaults(handler=cmd_crosscheck)

    for p in sub.choices.values():
        _common(p)
    return ap


def _apply_config(ap, argv):
    """Load ``--config`` into the subcommand's defaults; unknown keys are errors."""
    pre, _ = ap.parse_known_args(argv)
    if not getattr(pre, "config", None):
        return ap.parse_args(argv)
    with open(pre.config, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{pre.config}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise CliError("config must be a JSON object")
    sp = ap._subparsers._group_actions[0].choices[pre.command]
    known = {a.dest for a in sp._actions} - _NOT_CONFIG - {"help"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    sp.set_defaults(**cfg)
    return ap.parse_args(argv)


def main(argv=None):
    ap = build_parser()
    try:
        args = _apply_config(ap, _glue_negative_values(sys.argv[1:] if argv is None else list(argv)))
        result, failures = args.handler(args)
        if args.command == "flow":
            trace = result["trace"]
            if args.format == "json":
                head = dict(_envelope(args, result["summary"]), kind="header")
                text = json.dumps(_clean(head), sort_keys=True) + "\n" + trace_jsonl(trace)
            else:
                out = io.StringIO()
                w = csv.writer(out, lineterminator="\n")
                w.writerow(["t", "W", "d_H_step", "volume"])
                for rec in trace.records()[:-1]:
                    w.writerow([repr(rec["t"]), repr(rec["W"]), "" if rec["d_H_step"] is None else repr(rec["d_H_step"]),
                                repr(rec["volume"])])
                text = out.getvalue() + render(_envelope(args, dict(result["summary"], **trace.records()[-1])), "csv")
        else:
            text = render(_envelope(args, result), args.format)
        _emit(text, args.output)
    except (CliError, FormatError, ValueError, OSError) as exc:
        print(f"reachlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.check and failures:
        for f in failures:
            print(f"reachlab: assertion failed: {f}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
