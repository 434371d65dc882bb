"""Command-line front end: ``rapm {validate,solve,certify,compare} CONFIG``.

Exit codes: 0 success, 1 a requested check failed, 2 usage or config
error, 3 runtime error (divergence, I/O).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import bench
from .config import MANIFEST_VERSION, ConfigError, load_config
from .oracles import F_eta_value, ParameterError, lipschitz_L_eta, validate_problem
from .problems import CSVFormatError, verify_weak_sharpness
from .numerics import DimensionError
from .prox import Box
from .solvers import BudgetScaled, DivergenceError, SolverConfig, solve

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class _Out:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, *args):
        if not self.quiet:
            print(*args)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(a) for a in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if np.isfinite(v):
            return v
        return "nan" if np.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(a) for k, a in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(a) for a in v]
    return v


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {path}: {e.strerror or e}") from e
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")


def _trace_paths(out_dir, prefix, cfgs):
    seen = {}
    paths = []
    for c in cfgs:
        seen[c.variant] = seen.get(c.variant, 0) + 1
        suffix = "" if seen[c.variant] == 1 else f"_{seen[c.variant]}"
        paths.append(bench.trace_csv_path(os.path.join(out_dir, prefix), c.variant + suffix))
    return paths


def _x0(cfg, p):
    x0 = cfg.data.get("x0")
    return np.zeros(p.dimension) if x0 is None else np.array(x0, dtype=np.float64)


def _problem_info(p):
    info = {"key": p.key, "dimension": p.dimension, "L_h": p.lower.lipschitz, "L_f": p.upper.lipschitz}
    gt = p.ground_truth
    if gt is not None:
        info["ground_truth"] = {
            "f_star": gt.f_star,
            "h_bar_star": gt.h_bar_star,
            "alpha": gt.alpha,
            "grad_f_at_xstar_norm": gt.grad_f_at_xstar_norm,
            "x_star": gt.x_star,
        }
    return info


def _run_info(tr, p, path, series):
    info = dict(tr.metadata())
    info["L_eta"] = lipschitz_L_eta(p, tr.eta) if np.isfinite(tr.eta) else None
    info["records"] = len(tr)
    info["trace_csv"] = os.path.basename(path)
    info["final_subopt"] = series["subopt"][-1]
    info["final_infeas"] = series["infeas"][-1]
    if "eta0" in tr.extra:
        info["eta0"] = tr.extra["eta0"]
    return info


def _run_solvers(cfg, p, ref, prefix, out):
    cfgs = cfg.solver_configs()
    x0 = _x0(cfg, p)
    for c in cfgs:
        c.x0 = x0
    paths = _trace_paths(cfg.output_dir, prefix, cfgs)
    results = []
    for c, path in zip(cfgs, paths):
        try:
            tr = solve(p, c)
        except DivergenceError as e:
            if e.trace is not None and len(e.trace):
                bench.write_trace_csv(e.trace, bench.evaluate_trace(e.trace, ref, p), path, cfg.data["include_timings"])
            raise
        series = bench.evaluate_trace(tr, ref, p)
        bench.write_trace_csv(tr, series, path, cfg.data["include_timings"])
        out(
            f"{c.variant:<10} K={c.K:<6} eta={tr.eta:.6g} gamma={tr.gamma:.6g} "
            f"subopt={series['subopt'][-1]:.3e} infeas={series['infeas'][-1]:.3e}"
        )
        results.append((c, tr, series, path))
    return x0, results


def _manifest(cfg, command, p, x0, ref, runs, extra=None):
    m = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "config": cfg.data,
        "problem": _problem_info(p),
        "x0": x0,
        "reference": ref.as_dict() if ref is not None else None,
        "runs": runs,
    }
    if extra:
        m.update(extra)
    return m


def cmd_validate(cfg, out):
    p = cfg.build_problem()
    v = cfg.data["validation"]
    rep = validate_problem(p, seed=v["seed"], n_samples=v["n_samples"])
    out(rep.table())
    ok = rep.passed
    gt = p.ground_truth
    if cfg.data["certify"]["weak_sharpness"] and gt is not None and gt.alpha is not None:
        ws = verify_weak_sharpness(p, seed=v["seed"])
        out(ws.table())
        ok = ok and ws.passed
    out("all checks passed" if ok else "CHECK FAILURE")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_solve(cfg, out):
    p = cfg.build_problem()
    _ensure_dir(cfg.output_dir)
    ref = bench.compute_reference(p, cfg.data["reference_budget"], _x0(cfg, p))
    x0, results = _run_solvers(cfg, p, ref, "trace_", out)
    runs = [_run_info(tr, p, path, s) for _, tr, s, path in results]
    _write_json(os.path.join(cfg.output_dir, "manifest_solve.json"), _manifest(cfg, "solve", p, x0, ref, runs))
    return EXIT_OK


def _corrupt(tr, p, k):
    # move x_k by 1e-2 toward the middle of dom(omega) so it stays feasible
    op = p.nonsmooth
    if isinstance(op, Box):
        centre = 0.5 * (op.lo + op.hi)
    else:
        centre = np.zeros(p.dimension)
    x = tr.x[k]
    d = centre - x
    nd = np.linalg.norm(d)
    if nd == 0:
        d = np.zeros_like(x)
        d[0] = 1.0
        nd = 1.0
    z = x + 1e-2 * d / nd
    tr.x[k] = z
    tr.f[k], tr.h[k], tr.omega[k] = p.f(z), p.h(z), p.omega(z)
    tr.F_eta[k] = F_eta_value(p, tr.eta, z)


def cmd_certify(cfg, out):
    p = cfg.build_problem()
    cert = cfg.data["certify"]
    x0 = _x0(cfg, p)
    targets = [c for c in cfg.solver_configs() if c.variant == "RAPM"]
    if not targets:
        first = cfg.solver_configs()[0]
        targets = [SolverConfig("RAPM", first.K, first.eta_mode, first.gamma_rule)]
    ok = True
    runs = []
    for c in targets:
        c.record_every = 1
        c.x0 = x0
        tr = solve(p, c)
        k_bad = cfg.data["debug"]["corrupt_iterate"]
        if k_bad is not None:
            _corrupt(tr, p, min(k_bad, tr.K))
        out(f"== RAPM K={c.K} eta={tr.eta:.6g} gamma={tr.gamma:.6g}")
        info = {"K": c.K, "eta": tr.eta, "gamma": tr.gamma}
        reports = []
        if cert["lemma_chain"]:
            reports.append(("lemma_chain", bench.certify_lemma_chain(tr, p)))
        if cert["rate_envelopes"]:
            if p.ground_truth is not None:
                reports.append(("rate_envelopes", bench.certify_rate_envelopes(tr, p)))
            else:
                out("rate envelopes: n/a (no closed-form ground truth)")
                info["rate_envelopes"] = "not applicable"
        if cert["budget_bounds"] and isinstance(c.eta_mode, BudgetScaled):
            reports.append(("budget_bounds", bench.certify_budget_bounds(tr, p)))
        for name, rep in reports:
            out(rep.table())
            ok = ok and rep.passed
            info[name] = {
                ch.name: {"worst_margin": ch.worst_margin, "at_k": ch.worst_k, "passed": ch.passed, "applicable": ch.applicable}
                for ch in rep.checks
            }
        runs.append(info)
    if cfg.data["output_dir"]:
        try:
            _ensure_dir(cfg.output_dir)
            _write_json(
                os.path.join(cfg.output_dir, "manifest_certify.json"),
                _manifest(cfg, "certify", p, x0, None, runs, {"passed": ok}),
            )
        except OSError as e:
            print(f"warning: {e}", file=sys.stderr)
    out("all certificates passed" if ok else "CERTIFICATE FAILURE")
    return EXIT_OK if ok else EXIT_CHECK


def _summary_rows(results):
    rows = []
    for c, tr, s, _ in results:
        row = {"variant": c.variant, "K": c.K, "final_subopt": s["subopt"][-1], "final_infeas": s["infeas"][-1]}
        for label, key in (("subopt", "subopt"), ("infeas", "abs_infeas")):
            try:
                row[f"slope_{label}"] = bench.estimate_rate(s["k"], s[key]).slope
            except bench.TraceError:
                row[f"slope_{label}"] = float("nan")
            for th in (1e-3, 1e-6):
                it = bench.iterations_to_threshold(s["k"], s[key], th)
                row[f"iters_{label}_{th:g}"] = "not reached" if it is None else it
        if "subopt_avg" in s:
            row["final_subopt_avg"] = s["subopt_avg"][-1]
            row["final_infeas_avg"] = s["infeas_avg"][-1]
        rows.append(row)
    for metric in ("final_subopt", "final_infeas"):
        vals = [abs(r[metric]) if np.isfinite(r[metric]) else np.inf for r in rows]
        order = sorted(range(len(rows)), key=lambda i: vals[i])
        for rank, i in enumerate(order, start=1):
            rows[i][f"rank_{metric[6:]}"] = rank
    return rows


SUMMARY_COLUMNS = (
    "variant",
    "K",
    "final_subopt",
    "final_infeas",
    "rank_subopt",
    "rank_infeas",
    "slope_subopt",
    "slope_infeas",
    "iters_subopt_0.001",
    "iters_subopt_1e-06",
    "iters_infeas_0.001",
    "iters_infeas_1e-06",
)


def _fmt_cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def cmd_compare(cfg, out):
    if len(cfg.data["solvers"]) < 2:
        raise ConfigError("invalid config at solvers: compare needs at least two solvers")
    p = cfg.build_problem()
    _ensure_dir(cfg.output_dir)
    ref = bench.compute_reference(p, cfg.data["reference_budget"], _x0(cfg, p))
    x0, results = _run_solvers(cfg, p, ref, "compare_", out)
    rows = _summary_rows(results)
    with open(os.path.join(cfg.output_dir, "summary.csv"), "w") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(_fmt_cell(r[c]) for c in SUMMARY_COLUMNS) + "\n")
    out(f"{'variant':<10} {'subopt':>11} {'infeas':>11} {'rank':>5} {'slope':>7}  to 1e-3 / 1e-6")
    for r in rows:
        out(
            f"{r['variant']:<10} {r['final_subopt']:>11.3e} {r['final_infeas']:>11.3e} "
            f"{r['rank_subopt']:>2}/{r['rank_infeas']:<2} {r['slope_subopt']:>7.2f}  "
            f"{r['iters_subopt_0.001']} / {r['iters_subopt_1e-06']}"
        )
    runs = [_run_info(tr, p, path, s) for _, tr, s, path in results]
    _write_json(
        os.path.join(cfg.output_dir, "manifest_compare.json"),
        _manifest(cfg, "compare", p, x0, ref, runs, {"summary": rows}),
    )
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "certify": cmd_certify, "compare": cmd_compare}


def build_parser():
    ap = argparse.ArgumentParser(prog="rapm", description="Simple bilevel solver benchmark.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("config", help="JSON run configuration (or a manifest from an earlier run)")
    ap.add_argument("--output-dir", help="override output_dir from the config")
    ap.add_argument("--seed", type=int, help="override the problem seed")
    ap.add_argument("--quiet", action="store_true", help="only print errors")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    out = _Out(args.quiet)
    try:
        cfg = load_config(args.config, output_dir=args.output_dir, seed=args.seed)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, CSVFormatError, ParameterError, DimensionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
