"""Command-line experiment runner.

Every experiment writes deterministic CSV and/or JSON artifacts into the output
directory (``--out-dir``, else ``$DISSGADGETS_OUT_DIR``, else ``./results``).
Parameters can come from a TOML or JSON config file; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from . import classical as cl
from . import cutoff as co
from . import transfer as tr
from ._accel import backend_name
from .gadgets import InitializerConfig, TimerConfig

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

OUT_DIR_ENV = "DISSGADGETS_OUT_DIR"
EXPERIMENTS = (
    "initializer",
    "timer",
    "cutoff-profile",
    "sharp-threshold",
    "concat-error",
    "trunc-normal",
    "imperfect-init",
    "transfer",
    "oracle-suite",
    "acceptance",
)
# acceptance criteria re-run by --check for each experiment
CHECKS_FOR = {
    "initializer": ("01", "02", "07"),
    "timer": ("03",),
    "cutoff-profile": ("04",),
    "sharp-threshold": ("05",),
    "concat-error": ("06",),
    "trunc-normal": ("08",),
    "imperfect-init": ("09",),
    "transfer": ("10",),
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def parse_grid(text):
    """'start:stop:step' (inclusive) or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid {text!r} must be start:stop:step")
        a, b, h = (float(p) for p in parts)
        if h <= 0 or b < a:
            raise argparse.ArgumentTypeError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((b - a) / h + 1e-9)) + 1
        return [round(a + i * h, 12) for i in range(n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def load_config(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            try:
                data = tomllib.loads(raw.decode())
            except tomllib.TOMLDecodeError:
                data = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a table/object")
    return data


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_json(path, data):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiments; each returns (summary dict, list of written files)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def exp_initializer(a, out):
    cfg = InitializerConfig(a.M, a.omega, a.Gamma)
    gen = cl.initializer_generator(cfg.M, cfg.omega, cfg.Gamma)
    p0 = cl.worst_case_product_input(cfg.M, a.delta, a.c)
    rows = []
    p, t_prev = p0.vector(), 0.0
    for t in sorted(a.t_grid):
        p = cl.evolve_classical(gen, p, t - t_prev)
        t_prev = t
        bound, mu = cl.initializer_certificate(cfg, a.delta, a.c, t)
        rows.append((t, cl.center_excited(p, cfg.M), bound))
    path = out / "initializer.csv"
    write_csv(path, ["t", "center_excited", "certificate"], rows)
    summary = {"M": cfg.M, "mu": mu, "mu_binomial": cl.binomial_mu(cfg.M, cfg.xi, a.delta, a.c), "xi": cfg.xi}
    return summary, [path]


def exp_timer(a, out):
    TimerConfig(a.N, a.gamma)
    prof = co.cutoff_profile(a.N, a.gamma, a.x_grid)
    path = out / "timer.csv"
    write_csv(path, ["x", "t", "deviation", "one_minus_phi", "remainder"], list(prof.rows()))
    return {"N": a.N, "sup_remainder": prof.sup_remainder, "window_constant": prof.window_constant}, [path]


def exp_cutoff_profile(a, out):
    profs = _map(lambda N: co.cutoff_profile(N, a.gamma, a.x_grid), a.N_list, a.threads)
    rows = [(p.N,) + r for p in profs for r in p.rows()]
    path = out / "cutoff_profile.csv"
    write_csv(path, ["N", "x", "t", "deviation", "one_minus_phi", "remainder"], rows)
    sups = {str(p.N): p.sup_remainder for p in profs}
    ratios = [profs[i + 1].sup_remainder / profs[i].sup_remainder for i in range(len(profs) - 1)]
    summary = {"sup_remainder": sups, "ratios": ratios, "window_constant": {str(p.N): p.window_constant for p in profs}}
    jpath = out / "cutoff_profile.json"
    write_json(jpath, summary)
    return summary, [path, jpath]


def exp_sharp_threshold(a, out):
    rows = [(c, N, co.sharp_threshold(c, N, a.gamma)) for c in a.c_list for N in a.N_list]
    path = out / "sharp_threshold.csv"
    write_csv(path, ["c", "N", "occupation"], rows)
    return {"rows": len(rows)}, [path]


def exp_concat_error(a, out):
    rows = []
    for N in a.N_list:
        for l in range(1, a.l_max + 1):
            r = co.concatenation_error(l, N, a.gamma)
            rows.append((N, l, r.early, r.late, r.alpha, r.beta, r.early_degree, r.late_degree))
    path = out / "concat_error.csv"
    write_csv(path, ["N", "l", "early", "late", "alpha", "beta", "early_degree", "late_degree"], rows)
    total = co.total_mistrigger(a.L, a.N_total, a.gamma)
    summary = {"L": a.L, "N": a.N_total, "total_mistrigger": total, "uncertified": sum(r[6] is None or r[7] is None for r in rows)}
    jpath = out / "concat_error.json"
    write_json(jpath, summary)
    return summary, [path, jpath]


def exp_trunc_normal(a, out):
    combos = [(al, be, N) for al in a.alpha_list for be in a.beta_list for N in a.N_list]
    res = _map(lambda c: co.truncated_normal_overlap(c[2], c[0], c[1], a.omega, a.Gamma), combos, a.threads)
    rows = [(c[0], c[1], c[2], r.log_numeric, r.log_bound, r.log_numeric <= r.log_bound, r.regime) for c, r in zip(combos, res)]
    path = out / "trunc_normal.csv"
    write_csv(path, ["alpha", "beta", "N", "log_numeric", "log_bound", "dominated", "regime"], rows)
    slopes = {}
    for al in a.alpha_list:
        for be in a.beta_list:
            sel = [r for c, r in zip(combos, res) if c[0] == al and c[1] == be]
            if len(sel) >= 2:
                s = co.log_slope([r.N for r in sel], [r.log_numeric for r in sel])
                slopes[f"{al},{be}"] = {"slope": s, "predicted": -al * al / (2 * be)}
    jpath = out / "trunc_normal.json"
    write_json(jpath, {"xi": 1.0 + a.Gamma / a.omega, "slopes": slopes})
    return {"combinations": len(rows), "all_dominated": all(r[5] for r in rows)}, [path, jpath]


def exp_imperfect_init(a, out):
    rows = []
    for eps in a.eps_list:
        r = co.imperfect_init_shift(a.N, eps, a.t, a.gamma)
        rows.append((eps, r.ideal, r.perturbed, r.shift, r.first_order_estimate, r.first_order_coeff, r.residual))
    path = out / "imperfect_init.csv"
    write_csv(path, ["eps", "ideal", "perturbed", "shift", "N_eps", "first_order_coeff", "residual"], rows)
    return {"N": a.N, "t": a.t}, [path]


def _transfer_input(a, seed):
    if a.input is not None:
        theta, phi = a.input
        return tr.bloch_state(theta, phi)
    return tr.random_qubit(np.random.default_rng(seed))


def exp_transfer(a, out):
    seeds = [a.seed + i for i in range(a.seeds)]

    def one(seed):
        phi = _transfer_input(a, seed)
        if a.n == 3 and not a.bus:
            return seed, tr.run_transfer3(phi, a.omega, a.eq_tol)
        return seed, tr.run_transfer_n(phi, a.n, a.omega, a.eq_tol)

    runs = _map(one, seeds, a.threads)
    fids = [r.fidelity for _, r in runs]
    report = {
        "n": a.n,
        "protocol": "bus" if (a.bus or a.n != 3) else "registry",
        "seeds": seeds,
        "min_fidelity": min(fids),
        "mean_fidelity": float(np.mean(fids)),
        "runs": [dict(seed=s, **r.to_json_dict()) for s, r in runs],
    }
    path = out / "transfer.json"
    write_json(path, report)
    return {"min_fidelity": report["min_fidelity"], "mean_fidelity": report["mean_fidelity"]}, [path]


def _write_check_table(path, results):
    write_csv(path, ["check", "passed", "detail"], [(r.name, r.passed, r.detail) for r in results])


def exp_oracle_suite(a, out):
    res = checks.run_oracles(a.max_qubits)
    path = out / "oracle_suite.csv"
    _write_check_table(path, res)
    for r in res:
        print(r.line())
    return {"passed": sum(r.passed for r in res), "total": len(res), "_results": res}, [path]


def exp_acceptance(a, out):
    res = checks.run_acceptance(a.only)
    path = out / "acceptance.csv"
    _write_check_table(path, res)
    for r in res:
        print(r.line())
    return {"passed": sum(r.passed for r in res), "total": len(res), "_results": res}, [path]


RUNNERS = {
    "initializer": exp_initializer,
    "timer": exp_timer,
    "cutoff-profile": exp_cutoff_profile,
    "sharp-threshold": exp_sharp_threshold,
    "concat-error": exp_concat_error,
    "trunc-normal": exp_trunc_normal,
    "imperfect-init": exp_imperfect_init,
    "transfer": exp_transfer,
    "oracle-suite": exp_oracle_suite,
    "acceptance": exp_acceptance,
}


# ---------------------------------------------------------------------------
# argument parser


def _pair(text):
    vals = parse_grid(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated values")
    return tuple(vals)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file with experiment parameters")
    common.add_argument("--out-dir", help=f"artifact directory (default ${OUT_DIR_ENV} or ./results)")
    common.add_argument("--check", action="store_true", help="exit nonzero if the related acceptance checks fail")
    common.add_argument("--threads", type=int, default=None, help="worker threads for sweeps")
    common.add_argument("--seed", type=int, default=None)

    p = argparse.ArgumentParser(prog="dissgadgets", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="experiment", required=True)

    s = sub.add_parser("initializer", parents=[common], help="classical initializer run vs certificate")
    s.add_argument("--M", type=int)
    s.add_argument("--omega", type=float)
    s.add_argument("--Gamma", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--c", type=float)
    s.add_argument("--t-grid", type=parse_grid)

    s = sub.add_parser("timer", parents=[common], help="single timer cutoff profile")
    s.add_argument("--N", type=int)
    s.add_argument("--gamma", type=float)
    s.add_argument("--x-grid", type=parse_grid)

    s = sub.add_parser("cutoff-profile", parents=[common], help="cutoff profiles for several N")
    s.add_argument("--N-list", type=parse_int_list)
    s.add_argument("--gamma", type=float)
    s.add_argument("--x-grid", type=parse_grid)

    s = sub.add_parser("sharp-threshold", parents=[common], help="occupation at c * N / gamma")
    s.add_argument("--c-list", type=parse_grid)
    s.add_argument("--N-list", type=parse_int_list)
    s.add_argument("--gamma", type=float)

    s = sub.add_parser("concat-error", parents=[common], help="mis-trigger tails of a concatenated schedule")
    s.add_argument("--N-list", type=parse_int_list)
    s.add_argument("--l-max", type=int)
    s.add_argument("--L", type=int)
    s.add_argument("--N-total", type=int)
    s.add_argument("--gamma", type=float)

    s = sub.add_parser("trunc-normal", parents=[common], help="truncated-normal input overlaps")
    s.add_argument("--alpha-list", type=parse_grid)
    s.add_argument("--beta-list", type=parse_grid)
    s.add_argument("--N-list", type=parse_int_list)
    s.add_argument("--omega", type=float)
    s.add_argument("--Gamma", type=float)

    s = sub.add_parser("imperfect-init", parents=[common], help="trigger shift from imperfect timer input")
    s.add_argument("--N", type=int)
    s.add_argument("--eps-list", type=parse_grid)
    s.add_argument("--t", type=float)
    s.add_argument("--gamma", type=float)

    s = sub.add_parser("transfer", parents=[common], help="dissipative state transfer runs")
    s.add_argument("--n", type=int)
    s.add_argument("--seeds", type=int)
    s.add_argument("--input", type=_pair, help="Bloch angles theta,phi (default: random per seed)")
    s.add_argument("--omega", type=float)
    s.add_argument("--eq-tol", type=float)
    s.add_argument("--bus", action="store_true", default=None, help="use the bus protocol also for n=3")

    s = sub.add_parser("oracle-suite", parents=[common], help="small oracle comparisons")
    s.add_argument("--max-qubits", type=int)

    s = sub.add_parser("acceptance", parents=[common], help="run the acceptance criteria")
    s.add_argument("--only", nargs="*", help="substrings selecting criteria")

    s = sub.add_parser("run", help="run the experiment named in a config file")
    s.add_argument("config_file")
    s.add_argument("--out-dir")
    s.add_argument("--check", action="store_true")
    s.add_argument("--threads", type=int, default=None)
    return p


DEFAULTS = {
    "initializer": dict(M=100, omega=1.0, Gamma=1.0, delta=0.5, c=0.5, t_grid=parse_grid("0:30:1")),
    "timer": dict(N=256, gamma=1.0, x_grid=parse_grid("-3:3:0.25")),
    "cutoff-profile": dict(N_list=[64, 256, 1024], gamma=1.0, x_grid=parse_grid("-3:3:0.05")),
    "sharp-threshold": dict(c_list=[0.5, 0.8, 0.9, 1.0, 1.1, 1.25, 2.0], N_list=[64, 256, 1024, 4096], gamma=1.0),
    "concat-error": dict(N_list=[100, 400, 1600], l_max=20, L=10, N_total=10**4, gamma=1.0),
    "trunc-normal": dict(alpha_list=[0.25, 0.5, 0.75], beta_list=[0.1, 0.5], N_list=[50, 100, 200], omega=1.0, Gamma=1e4),
    "imperfect-init": dict(N=8, eps_list=[1e-3, 1e-4], t=8.0, gamma=1.0),
    "transfer": dict(n=3, seeds=1, input=None, omega=1.0, eq_tol=tr.DEFAULT_EQ_TOL, bus=False),
    "oracle-suite": dict(max_qubits=5),
    "acceptance": dict(only=None),
}
GRID_KEYS = {"t_grid", "x_grid", "c_list", "alpha_list", "beta_list", "eps_list"}
INT_LIST_KEYS = {"N_list"}


def _coerce(key, value):
    if key in GRID_KEYS and isinstance(value, str):
        return parse_grid(value)
    if key in INT_LIST_KEYS and isinstance(value, str):
        return parse_int_list(value)
    if key == "input" and isinstance(value, str):
        return _pair(value)
    return value


def resolve(args, config):
    """Merge defaults < config file < explicit flags and validate."""
    exp = args.experiment
    params = dict(DEFAULTS[exp])
    if config:
        section = config.get(exp, config)
        for k, v in section.items():
            key = k.replace("-", "_")
            if key in ("experiment", "out_dir", "threads", "seed", "check"):
                continue
            if key not in params:
                raise ConfigError(f"unknown parameter {k!r} for experiment {exp!r}")
            params[key] = _coerce(key, v)
    for k in params:
        v = getattr(args, k, None)
        if v is not None:
            params[k] = v
    ns = argparse.Namespace(**params)
    ns.threads = args.threads if args.threads is not None else (config or {}).get("threads")
    seed = args.seed if getattr(args, "seed", None) is not None else (config or {}).get("seed", 0)
    ns.seed = int(seed)
    _validate(exp, ns)
    return ns


def _validate(exp, a):
    try:
        if exp == "initializer":
            InitializerConfig(a.M, a.omega, a.Gamma)
            if not (0 < a.delta <= 1 and 0 < a.c <= 1):
                raise ValueError("delta and c must lie in (0, 1]")
            if min(a.t_grid) < 0:
                raise ValueError("times must be nonnegative")
        elif exp == "timer":
            TimerConfig(a.N, a.gamma)
        elif exp in ("cutoff-profile", "sharp-threshold"):
            for N in a.N_list:
                TimerConfig(N, a.gamma)
        elif exp == "concat-error":
            if a.l_max < 1 or a.L < 1 or min(a.N_list) < 2 or a.N_total < 2:
                raise ValueError("need l_max, L >= 1 and N >= 2")
        elif exp == "trunc-normal":
            if any(not 0 < al <= 1 for al in a.alpha_list) or any(b <= 0 for b in a.beta_list):
                raise ValueError("need alpha in (0, 1] and beta > 0")
        elif exp == "imperfect-init":
            if any(not 0 <= e <= 0.1 for e in a.eps_list):
                raise ValueError("eps must lie in [0, 0.1]")
            TimerConfig(a.N, a.gamma)
        elif exp == "transfer":
            if a.n < 3 or a.n % 2 == 0:
                raise ValueError("n must be odd and >= 3")
            if a.seeds < 1:
                raise ValueError("need at least one seed")
        elif exp == "oracle-suite":
            if a.max_qubits < 0:
                raise ValueError("max-qubits must be nonnegative")
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(args, config):
    d = args.out_dir or (config or {}).get("out_dir") or os.environ.get(OUT_DIR_ENV) or "results"
    path = Path(d)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc}") from None
    return path


def run_experiment(args):
    """Run one parsed command; returns the process exit status."""
    config = None
    if args.experiment == "run":
        config = load_config(args.config_file)
        name = config.get("experiment")
        if name not in RUNNERS:
            raise ConfigError(f"unknown experiment {name!r}; expected one of {', '.join(EXPERIMENTS)}")
        args = argparse.Namespace(experiment=name, out_dir=args.out_dir, check=args.check, threads=args.threads, seed=None)
    elif getattr(args, "config", None):
        config = load_config(args.config)
        name = config.get("experiment", args.experiment)
        if name != args.experiment:
            raise ConfigError(f"config is for experiment {name!r}, not {args.experiment!r}")
    params = resolve(args, config)
    out = _out_dir(args, config)
    summary, files = RUNNERS[args.experiment](params, out)
    results = summary.pop("_results", None)
    printable = {k: v for k, v in summary.items()}
    print(json.dumps({"experiment": args.experiment, "backend": backend_name(), **printable}, sort_keys=True, default=str))
    for f in files:
        print(f"wrote {f}")
    status = 0
    if args.check:
        if results is None:
            results = checks.run_acceptance(CHECKS_FOR.get(args.experiment, ()))
            for r in results:
                print(r.line())
        if not all(r.passed for r in results):
            status = 1
    return status


VALUE_FLAGS = ("--x-grid", "--t-grid", "--c-list", "--alpha-list", "--beta-list", "--eps-list", "--input")


def _join_negative_values(argv):
    # let grids such as "--x-grid -3:3:0.25" through argparse's option detection
    out, i = [], 0
    while i < len(argv):
        if argv[i] in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))
    try:
        return run_experiment(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
