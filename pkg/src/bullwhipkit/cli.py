"""Command-line interface.

Every subcommand writes CSV outputs plus ``manifest.yaml`` into the output
directory (``--out``, else ``$BULLWHIPKIT_OUTPUT_DIR``, else the current
directory).  ``bullwhipkit rerun <manifest>`` repeats a run from its manifest.
Exit status: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import os
import sys
from pathlib import Path

import yaml

from . import __version__, analysis, benchmark, experiments, metrics
from . import registry as _registry
from .config import ChainConfig, builtin_chain, load_chain
from .engine import IP_TIMINGS, STARTS, run_montecarlo

OUTPUT_ENV = "BULLWHIPKIT_OUTPUT_DIR"

DEMAND_ALIASES = {"ar1": "semiconductor_ar1", "iid": "iid_normal", "beer": "beer_game",
                  "arma": "arma", "replay": "replay"}
FORECASTER_ALIASES = {"naive": "naive", "moving_average": "moving_average",
                      "exp_smoothing": "exponential_smoothing",
                      "exponential_smoothing": "exponential_smoothing",
                      "global_constant": "global_constant", "path_constant": "path_constant"}
POLICY_ALIASES = {"out": "order_up_to", "pout": "proportional_out", "smoothing_out": "smoothing_out",
                  "constant": "constant_order"}
METRIC_ORDER = ("bwr", "cum_bwr", "nsamp", "fill_rate", "tc", "chen_lower_bound")


class CliError(RuntimeError):
    pass


# --- argument parsing ---------------------------------------------------------------


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pairs(text):
    try:
        out = []
        for item in text.split(","):
            L, p = item.split(":")
            out.append([int(L), int(p)])
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected L:p pairs like 2:10,4:10, got {text!r}") from None


def _keyval(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return [k.strip(), yaml.safe_load(v)]


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_common(p):
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("--threads", type=_nonneg, default=1, help="worker threads, 0 = auto")


def _add_chain(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--chain", default="semiconductor_4tier", help="built-in chain name")
    g.add_argument("--chain-file", help="chain YAML file")
    p.add_argument("--bh-ratio", type=float, help="normalized costs h=1/(1+r), b=r/(1+r)")


def _add_sim(p, N_default):
    _add_chain(p)
    p.add_argument("--demand", choices=sorted(DEMAND_ALIASES), default="ar1")
    p.add_argument("--demand-file", help="replay CSV (value column)")
    p.add_argument("--noise", type=float, default=0.05, help="replay noise fraction")
    p.add_argument("--demand-param", type=_keyval, action="append", default=[],
                   metavar="KEY=VALUE", help="demand generator parameter override")
    p.add_argument("--forecaster", choices=sorted(FORECASTER_ALIASES), default="naive")
    p.add_argument("--fc-window", type=int, default=10)
    p.add_argument("--fc-alpha", type=float, default=0.3)
    p.add_argument("--policy", choices=sorted(POLICY_ALIASES), default="out")
    p.add_argument("--policy-alpha", type=float, default=0.3)
    p.add_argument("--constant-q", type=float, help="constant order quantity (default: prior mean)")
    p.add_argument("--cost", choices=["newsvendor", "perishable"], default="newsvendor")
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--buffer", type=float, default=50.0)
    p.add_argument("--T", type=_positive, default=156)
    p.add_argument("--N", type=_positive, default=N_default)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--burn-in", type=_nonneg, default=0)
    p.add_argument("--ip-timing", choices=list(IP_TIMINGS) + ["post_receipt"], default="pre_demand")
    p.add_argument("--start", choices=STARTS, default="steady_state")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bullwhipkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bullwhipkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="single path: trajectory and metrics CSV")
    _add_sim(p, 1)
    _add_common(p)

    p = sub.add_parser("montecarlo", help="N paths: per-echelon metric summary CSV")
    _add_sim(p, 1000)
    p.add_argument("--trajectories", action="store_true", help="also write the long trajectory CSV")
    _add_common(p)

    p = sub.add_parser("benchmark", help="policy x forecaster benchmark from a spec file")
    p.add_argument("--spec", required=True, help="benchmark spec YAML")
    p.add_argument("--stat", choices=benchmark.STATS)
    p.add_argument("--format", choices=benchmark.FORMATS, action="append",
                   help="extra table formats besides csv")
    _add_common(p)

    p = sub.add_parser("sweep", help="benchmark once per value of one component parameter")
    p.add_argument("--spec", required=True)
    p.add_argument("--component", required=True, help="category:name, e.g. policy:proportional_out")
    p.add_argument("--param", required=True, help="parameter name (bh_ratio for cost ratio sweeps)")
    p.add_argument("--values", required=True, type=_float_list)
    p.add_argument("--stat", choices=benchmark.STATS)
    _add_common(p)

    p = sub.add_parser("validate-chen", help="single echelon BWR vs the Chen lower bound")
    p.add_argument("--pairs", type=_pairs, default=[list(x) for x in experiments.CHEN_PAIRS])
    p.add_argument("--N", type=_positive, default=2000)
    p.add_argument("--T", type=_positive, default=520)
    p.add_argument("--mu", type=float, default=100.0)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("validate-filtering", help="delta-method CV predictions vs Monte Carlo")
    p.add_argument("--N", type=_positive, default=1000)
    p.add_argument("--T", type=_positive, default=156)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("scale", help="serial vs batch timing harness")
    p.add_argument("--n", type=_int_list, default=[])
    p.add_argument("--t", type=_int_list, default=[])
    p.add_argument("--k", type=_int_list, default=[])
    p.add_argument("--base", type=_int_list, default=[1000, 156, 4], help="base N,T,K")
    p.add_argument("--no-serial", action="store_true")
    p.add_argument("--repeats", type=_positive, default=1)
    _add_common(p)

    p = sub.add_parser("list", help="print the component catalog")
    p.add_argument("--category", choices=_registry.CATEGORIES)

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the manifest's directory)")
    return parser


# --- helpers ------------------------------------------------------------------------


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _workers(args) -> int:
    n = getattr(args, "threads", 1)
    return (os.cpu_count() or 1) if n == 0 else n


def _chain(args) -> ChainConfig:
    chain = load_chain(args.chain_file) if args.chain_file else builtin_chain(args.chain)
    if args.bh_ratio is not None:
        chain = chain.with_cost_ratio(args.bh_ratio)
    return chain


def _components(args):
    dname = DEMAND_ALIASES[args.demand]
    dparams = {k: v for k, v in args.demand_param}
    if dname == "replay":
        dparams.setdefault("path", args.demand_file)
        dparams.setdefault("noise_fraction", args.noise)
    elif args.demand_file:
        raise CliError("--demand-file requires --demand replay")
    fname = FORECASTER_ALIASES[args.forecaster]
    fparams = {"window": args.fc_window} if fname == "moving_average" else \
        {"alpha": args.fc_alpha} if fname == "exponential_smoothing" else {}
    pname = POLICY_ALIASES[args.policy]
    pparams = {"alpha": args.policy_alpha} if pname in ("proportional_out", "smoothing_out") else \
        {"quantity": args.constant_q} if pname == "constant_order" else {}
    cparams = {"gamma": args.gamma, "buffer": args.buffer} if args.cost == "perishable" else {}
    resolved = {}
    objs = {}
    for cat, name, params in (("demand", dname, dparams), ("forecaster", fname, fparams),
                              ("policy", pname, pparams), ("cost", args.cost, cparams)):
        entry = _registry.REGISTRY.entry(cat, name)
        full = {**entry.defaults, **params}
        resolved[cat] = {"name": name, "params": full}
        objs[cat] = _registry.get(cat, name, params)
    return objs, resolved


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _write_outputs(out: Path, files: dict, args, resolved: dict) -> None:
    for name, text in files.items():
        benchmark.write_atomic(out / name, text)
    args_d = {k: v for k, v in vars(args).items() if k not in ("out", "func")}
    manifest = {
        "toolkit": "bullwhipkit",
        "version": __version__,
        "command": args.command,
        "args": args_d,
        "resolved": resolved,
        "outputs": {name: _sha256(text) for name, text in sorted(files.items())},
    }
    benchmark.write_atomic(out / "manifest.yaml", yaml.safe_dump(manifest, sort_keys=True))


def _metric_table(result) -> str:
    buf = io.StringIO()
    buf.write("echelon,metric,mean,median,std,cv\n")
    for k in range(1, result.K + 1):
        for name in METRIC_ORDER:
            mv = _registry.get("metric", name).compute(result, k)
            buf.write(f"{k},{name},{mv.mean!r},{mv.median!r},{mv.std!r},{mv.cv!r}\n")
    return buf.getvalue()


def _print_summary(result):
    print(f"{'echelon':>7} {'bwr':>10} {'cum_bwr':>12} {'nsamp':>10} {'fill':>7} {'tc':>12}")
    for k in range(1, result.K + 1):
        print(f"{k:>7} {metrics.bwr(result, k).mean:>10.4g} "
              f"{metrics.cumulative_bwr(result, k).mean:>12.4g} {metrics.nsamp(result, k).mean:>10.4g} "
              f"{metrics.fill_rate(result, k).mean:>7.3f} {metrics.echelon_cost(result, k).mean:>12.4g}")


# --- subcommands --------------------------------------------------------------------


def _run_sim(args, single: bool):
    chain = _chain(args)
    objs, resolved = _components(args)
    resolved["chain"] = chain.to_dict()
    N = 1 if single else args.N
    res = run_montecarlo(chain, objs["demand"], objs["forecaster"], objs["policy"], objs["cost"],
                         T=args.T, N=N, seed=args.seed, burn_in=args.burn_in,
                         workers=_workers(args), ip_timing=args.ip_timing, start=args.start)
    files = {"metrics.csv": _metric_table(res)}
    if single or getattr(args, "trajectories", False):
        files["trajectory.csv"] = res.to_csv()
    _write_outputs(_out_dir(args), files, args, resolved)
    _print_summary(res)
    return 0


def cmd_simulate(args):
    return _run_sim(args, single=True)


def cmd_montecarlo(args):
    return _run_sim(args, single=False)


def _load_bench_spec(args, embedded=None):
    spec = benchmark.BenchmarkSpec.from_dict(embedded) if embedded else benchmark.load_spec(args.spec)
    changes = {}
    if getattr(args, "stat", None):
        changes["stat"] = args.stat
    if args.threads != 1:
        changes["workers"] = _workers(args)
    if changes:
        from dataclasses import replace
        spec = replace(spec, **changes)
    return spec


def cmd_benchmark(args, embedded=None):
    spec = _load_bench_spec(args, embedded)
    records = benchmark.run_benchmark(spec)
    files = {"benchmark.csv": benchmark.render_table(records, "csv")}
    ext = {"latex": "tex", "markdown": "md"}
    for fmt in args.format or []:
        if fmt != "csv":
            files[f"benchmark.{ext[fmt]}"] = benchmark.render_table(records, fmt)
    resolved = {"spec": _spec_dict(spec), "demand_hash": records.demand_hash}
    _write_outputs(_out_dir(args), files, args, resolved)
    sys.stdout.write(benchmark.render_table(records, "markdown"))
    for pair, err in records.errors.items():
        print(f"error: {err}", file=sys.stderr)
    return 0


def _spec_dict(spec):
    d = spec.to_dict()
    d["workers"] = 1  # workers never change results
    return d


def cmd_sweep(args, embedded=None):
    spec = _load_bench_spec(args, embedded)
    try:
        category, name = args.component.split(":")
    except ValueError:
        raise CliError(f"--component must look like category:name, got {args.component!r}") from None
    values = [int(v) if float(v).is_integer() and args.param in ("window", "step_period") else v
              for v in args.values]
    runs = benchmark.sweep_parameter(spec, (category, name), args.param, values)
    buf = io.StringIO()
    buf.write("param_value," + ",".join(benchmark.CSV_COLUMNS) + "\n")
    for v, records in runs.items():
        body = benchmark.render_table(records, "csv").splitlines()[1:]
        for line in body:
            buf.write(f"{v!r},{line}\n")
    _write_outputs(_out_dir(args), {"sweep.csv": buf.getvalue()}, args, {"spec": _spec_dict(spec)})
    sys.stdout.write(buf.getvalue())
    return 0


def cmd_validate_chen(args):
    rows = experiments.validate_chen([tuple(p) for p in args.pairs], N=args.N, T=args.T, mu=args.mu,
                                     sigma=args.sigma, seed=args.seed, workers=_workers(args))
    text = experiments.chen_csv(rows)
    _write_outputs(_out_dir(args), {"chen.csv": text}, args, {})
    for r in rows:
        print(f"L={r.L:>2} p={r.p:>2} bound={r.bound:.4f} simulated={r.simulated:.4f} "
              f"error={r.rel_error:+.3%}")
    return 0


def cmd_validate_filtering(args):
    res, rep = experiments.filtering_experiment(args.N, args.T, args.seed, _workers(args))
    conc = analysis.cumulative_concentration_report(res)
    files = {"filtering.csv": rep.to_csv()}
    _write_outputs(_out_dir(args), files, args, {"chain": res.config.to_dict()})
    sys.stdout.write(rep.to_csv())
    print(f"cumulative: predicted_cv={conc.predicted_cv:.4f} naive_cv={conc.naive_cv:.4f} "
          f"empirical_cv={conc.empirical_cv:.4f}")
    return 0


def cmd_scale(args):
    if len(args.base) != 3:
        raise CliError("--base needs N,T,K")
    axes = {"N": args.n, "T": args.t, "K": args.k}
    if not any(axes.values()):
        axes = {"N": [100, 200, 400]}
    rows = benchmark.run_scaling_harness(axes, tuple(args.base), serial=not args.no_serial,
                                         repeats=args.repeats)
    text = benchmark.scaling_csv(rows)
    _write_outputs(_out_dir(args), {"scaling.csv": text}, args, {})
    sys.stdout.write(text)
    return 0


def cmd_list(args):
    cats = [args.category] if args.category else list(_registry.CATEGORIES)
    for cat in cats:
        print(f"[{cat}]")
        for name in _registry.list_registered(cat):
            e = _registry.REGISTRY.entry(cat, name)
            defaults = ", ".join(f"{k}={v}" for k, v in e.defaults.items())
            print(f"  {name:<22} {e.description}" + (f" ({defaults})" if defaults else ""))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
    "validate-chen": cmd_validate_chen,
    "validate-filtering": cmd_validate_filtering,
    "scale": cmd_scale,
    "list": cmd_list,
}


def cmd_rerun(args):
    path = Path(args.manifest)
    with path.open(encoding="utf-8") as fh:
        manifest = yaml.safe_load(fh)
    if not isinstance(manifest, dict) or manifest.get("command") not in COMMANDS:
        raise CliError(f"{path}: not a bullwhipkit manifest")
    ns = argparse.Namespace(**manifest["args"])
    ns.command = manifest["command"]
    ns.out = args.out or str(path.parent)
    embedded = (manifest.get("resolved") or {}).get("spec")
    if ns.command in ("benchmark", "sweep"):
        return COMMANDS[ns.command](ns, embedded)
    return COMMANDS[ns.command](ns)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        if args.command == "rerun":
            return cmd_rerun(args)
        return COMMANDS[args.command](args)
    except Exception as exc:
        print(f"bullwhipkit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
