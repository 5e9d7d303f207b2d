"""Command line entry point: ``sim run``, ``sim sweep``, ``sim model``, ``sim list``."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import math
import os
import sys

from . import analytics
from .config import (_HIDDEN, ConfigError, ScenarioConfig, _number, coerce, get_value, keys,
                     serialize, set_value)
from .runner import resolve, run, stock_names, with_overrides

SWEEP_COLUMNS = ("mice_fct_mean_us", "mice_fct_p50_us", "mice_fct_p99_us", "mice_completed",
                 "mice_incomplete", "bottleneck_utilization", "pause_total", "cnm_count", "fb_mean",
                 "drop_ratio", "retransmits", "timeouts")


def _g(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _print_summary(report, out) -> None:
    rows = [
        ("mice FCT mean / p50 / p99 (us)",
         f"{_g(report.mice_fct_mean_us)} / {_g(report.mice_fct_p50_us)} / {_g(report.mice_fct_p99_us)}"),
        ("mice completed / incomplete", f"{report.mice_completed} / {report.mice_incomplete}"),
        (f"utilization {report.bottleneck or '-'}", _g(report.bottleneck_utilization)),
    ]
    for name, u in sorted(report.group_utilization.items()):
        rows.append((f"utilization {name}", _g(u)))
    rows += [
        ("PAUSE frames (window / total)", f"{report.pause_window} / {report.pause_total}"),
        ("CNMs, mean Fb", f"{report.cnm_count}, {_g(report.fb_mean)}"),
        ("dropped frames (mice, elephant)", f"{report.dropped_frames[0]}, {report.dropped_frames[1]}"),
        ("drop ratio (run / window)", f"{_g(report.drop_ratio)} / {_g(report.drop_ratio_window)}"),
        ("bytes conserved", "yes" if report.conserved else "NO"),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}", file=out)


# ----------------------------------------------------------------------- run

def cmd_run(args) -> int:
    cfg = resolve(args.scenario)
    cfg = with_overrides(cfg, seed=args.seed, horizon_ms=args.horizon, warmup_ms=args.warmup)
    out = args.out or os.path.join(cfg.sim.out_dir, cfg.name)
    result = run(cfg, out)
    print(f"{cfg.name}: seed {cfg.sim.seed}, {cfg.sim.horizon_ms:g} ms, "
          f"{result.events} events -> {out}")
    _print_summary(result.report, sys.stdout)
    return 0


# --------------------------------------------------------------------- sweep

def sweepable(key: str) -> bool:
    if key not in keys() or key in _HIDDEN:
        return False
    default = get_value(ScenarioConfig(), key)
    return isinstance(default, (int, float)) and not isinstance(default, bool)


def sweep_point(cfg, key: str, text: str, index: int, out_dir: str | None = None) -> dict:
    """Run point ``index`` of a sweep; depends only on its own arguments."""
    point = copy.deepcopy(cfg)
    try:
        value = coerce(text, get_value(ScenarioConfig(), key))
    except ValueError as e:
        raise ConfigError(f"--values: {key}: {e}") from None
    set_value(point, key, value)
    if key != "sim.seed":
        point.sim.seed = cfg.sim.seed ^ index
    point.validate()
    where = os.path.join(out_dir, f"{key}={text.strip()}") if out_dir else None
    result = run(point, where)
    row = {"param": key, "value": text.strip(), "seed": point.sim.seed}
    for col in SWEEP_COLUMNS:
        row[col] = getattr(result.report, col)
    return row


def sweep(cfg, key: str, values: list[str], out_dir: str | None = None) -> list[dict]:
    """One run per value; the seed of point i is the base seed XOR i."""
    if not sweepable(key):
        numeric = [k for k in keys() if sweepable(k)]
        raise ConfigError(f"{key!r} is not a sweepable numeric key; choose from: {', '.join(numeric)}")
    return [sweep_point(cfg, key, text, i, out_dir) for i, text in enumerate(values)]


def format_sweep(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("param", "value", "seed") + SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r["param"], r["value"], r["seed"]] + [_g(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = resolve(args.scenario)
    cfg = with_overrides(cfg, seed=args.seed, horizon_ms=args.horizon, warmup_ms=args.warmup)
    values = [v for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values needs at least one value")
    out = args.out or os.path.join(cfg.sim.out_dir, f"{cfg.name}-sweep")
    text = format_sweep(sweep(cfg, args.param, values, out))
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "sweep.csv"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------- model

MODEL_KEYS = {"K", "S", "rho", "K0", "n", "j", "lam", "r", "C"}


def parse_params(text: str) -> dict[str, float]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValueError(f"expected name=value, got {part!r}")
        name, value = (s.strip() for s in part.split("=", 1))
        if name not in MODEL_KEYS:
            raise ValueError(f"unknown model parameter {name!r}; known: {', '.join(sorted(MODEL_KEYS))}")
        out[name] = float(_number(value))
    return out


def _need(p: dict, *names: str) -> None:
    missing = [n for n in names if n not in p]
    if missing:
        raise ValueError(f"missing model parameter(s): {', '.join(missing)}")


def model_rows(eq: int, p: dict, oracle_samples: int = 0, seed: int = 0) -> tuple[list[str], list[list]]:
    if eq in (1, 2):
        _need(p, "K", "S", "rho")
        mp = analytics.ModelParams(K=p["K"], S=p["S"], rho=p["rho"], K0=p.get("K0", 0.0),
                                   n=int(p.get("n", 32)), lam=p.get("lam", 0.0), C=p.get("C", 10e9))
        if eq == 1:
            head = ["eq", "K", "S", "rho", "closed_form"]
            row = [1, p["K"], p["S"], p["rho"], analytics.pfc_trigger_probability(mp)]
        else:
            j = int(p.get("j", 1))
            head = ["eq", "K", "K0", "S", "rho", "n", "j", "closed_form", "log10"]
            row = [2, p["K"], mp.K0, p["S"], p["rho"], mp.n, j,
                   analytics.congestion_tree_probability(mp, j),
                   analytics.log_congestion_tree_probability(mp, j) / math.log(10)]
        if oracle_samples:
            if eq == 2 and int(p.get("j", 1)) != 1:
                raise ValueError("the Monte-Carlo oracle covers a single port (j = 1) only")
            mu = mp.mu
            est = analytics.mm1_monte_carlo(mp.rho * mu, mu, mp.K, mp.S, oracle_samples, seed)
            head += ["oracle", "ci_low", "ci_high", "samples"]
            row += [est.value, est.low, est.high, est.samples]
        return head, [row]
    if eq == 3:
        _need(p, "lam", "S", "r")
        lam, S, r = p["lam"], p["S"], p["r"]
        head = ["eq", "lam", "S", "r", "closed_form", "closed_form_exp_sizes"]
        row = [3, lam, S, r, analytics.rate_decrease_probability(S, r, analytics.exponential_cdf(lam)),
               analytics.rate_decrease_probability_exp(lam, S, r)]
        if oracle_samples:
            est = analytics.rate_decrease_monte_carlo(lam, S, r, oracle_samples, seed)
            head += ["oracle", "ci_low", "ci_high", "samples"]
            row += [est.value, est.low, est.high, est.samples]
        return head, [row]
    raise ValueError(f"--eq must be 1, 2 or 3, got {eq}")


def cmd_model(args) -> int:
    head, rows = model_rows(args.eq, parse_params(args.params), args.oracle_samples, args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(head)
    for row in rows:
        w.writerow([_g(x) for x in row])
    return 0


# ---------------------------------------------------------------------- list

def cmd_list(args) -> int:
    if args.name:
        sys.stdout.write(serialize(resolve(args.name)))
        return 0
    for name in stock_names():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description="DCB fabric simulator and queueing model")
    sub = parser.add_subparsers(dest="command", required=True)

    def sim_opts(p):
        p.add_argument("scenario", help="scenario file, or the name of a stock scenario")
        p.add_argument("--seed", type=int, help="override sim.seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--horizon", type=float, metavar="MS", help="override sim.horizon_ms")
        p.add_argument("--warmup", type=float, metavar="MS", help="override sim.warmup_ms")

    p = sub.add_parser("run", help="run one scenario and write CSV/JSON outputs")
    sim_opts(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario once per value of one numeric key")
    sim_opts(p)
    p.add_argument("--param", required=True, metavar="KEY", help="dotted key, e.g. isolation.mice_share")
    p.add_argument("--values", required=True, help="comma separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("model", help="closed-form probabilities, optionally checked by Monte-Carlo")
    p.add_argument("--eq", type=int, required=True, choices=(1, 2, 3),
                   help="1: P(ingress queue crosses K); 2: P(pause cascades j hops); "
                        "3: P(next arrival lands before the queue drains)")
    p.add_argument("--params", required=True,
                   help="K=..,S=..,rho=..[,K0=,n=,j=] for 1/2; lam=..,S=..,r=.. for 3; sizes take KB/MB")
    p.add_argument("--oracle-samples", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("list", help="list stock scenarios, or print one with all defaults filled in")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, OSError) as e:
        print(f"sim: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
