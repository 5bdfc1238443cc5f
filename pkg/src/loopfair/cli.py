"""Command-line entry points: `simulate`, `ergodicity`, `analyze`.

All output files carry the config hash and seed on a leading comment line,
use a fixed column order, `\n` endings, and shortest-round-trip decimal
formatting, so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import RunConfig, load_config
from .credit import load_income_table, run_experiment
from .errors import ConfigError, DataError, DomainError, NumericError
from .markov import ergodicity_report, parse_spec_file, simulate as markov_simulate, validate
from .metrics import two_proportion_pvalue
from .numerics import SeededRng

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def _write_csv(path, header_cols, rows, config_hash, seed):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={config_hash} seed={seed}\n")
        fh.write(",".join(header_cols) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _read_csv(path):
    """Returns (config_hash, seed, header, rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        meta = fh.readline().strip()
        if not meta.startswith("# config_hash="):
            raise DataError(f"{path}: missing metadata line")
        parts = dict(p.split("=", 1) for p in meta[2:].split())
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    return parts["config_hash"], int(parts["seed"]), header, rows


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    table = load_income_table(cfg.income_table, cfg.sim.years, cfg.sim.races)

    result = run_experiment(cfg.sim, table, bin_width=cfg.bin_width, epsilon=cfg.epsilon)
    chash, seed = cfg.config_hash(), cfg.sim.seed

    os.makedirs(args.out, exist_ok=True)
    years = cfg.sim.years

    rows = []
    for t, trial in enumerate(result.trials):
        for k, year in enumerate(years):
            for u in range(cfg.sim.users):
                rows.append([
                    str(t), str(k), str(year), str(u), trial.races[u],
                    _fmt(trial.incomes[k, u]), str(int(trial.decisions[k, u])),
                    str(int(trial.repaid[k, u])), _fmt(trial.adr_users[k, u]),
                ])
    _write_csv(os.path.join(args.out, "users.csv"),
               ["trial", "k", "year", "user_id", "race", "income", "decision", "repaid", "adr"],
               rows, chash, seed)

    rows = []
    for t, trial in enumerate(result.trials):
        for k, year in enumerate(years):
            for race in cfg.sim.races:
                rows.append([str(t), str(k), str(year), race,
                             _fmt(trial.group_adr[race][k])])
    _write_csv(os.path.join(args.out, "groups.csv"),
               ["trial", "k", "year", "race", "adr_group"], rows, chash, seed)

    rows = []
    for k, year in enumerate(years):
        for race in cfg.sim.races:
            rows.append([str(k), str(year), race,
                         _fmt(result.group_mean[race][k]), _fmt(result.group_std[race][k])])
    _write_csv(os.path.join(args.out, "summary.csv"),
               ["k", "year", "race", "mean_adr", "std_adr"], rows, chash, seed)

    rows = []
    edges = result.density_edges
    for k in range(len(years)):
        for b in range(len(edges) - 1):
            rows.append([str(k), _fmt(edges[b]), _fmt(edges[b + 1]),
                         str(int(result.density_counts[k, b]))])
    _write_csv(os.path.join(args.out, "density.csv"),
               ["k", "bin_lower", "bin_upper", "count"], rows, chash, seed)

    report = {
        "config_hash": chash,
        "seed": seed,
        "version": __version__,
        "trials": cfg.sim.trials,
        "group_final_adr": {
            race: [trial.group_adr[race][-1] for trial in result.trials]
            for race in cfg.sim.races
        },
        "impact": {
            "coincidence_spread": result.impact.coincidence_spread,
            "initial_condition_spread": result.impact.initial_condition_spread,
            "epsilon": result.impact.epsilon,
            "converged": result.impact.converged,
        },
    }
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"simulate: {cfg.sim.trials} trials x {cfg.sim.users} users x "
          f"{len(years)} years -> {args.out} (config_hash={chash})")
    return 0


def cmd_ergodicity(args) -> int:
    spec = parse_spec_file(args.spec)
    violations = validate(spec)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_DATA

    rng = SeededRng(args.seed)
    report = ergodicity_report(spec, rng=rng.substream(0))
    starts = []
    for i, chunk in enumerate(args.starts.split(",")):
        starts.append([float(v) for v in chunk.split(":")])
    cesaro_finals = []
    for i, x0 in enumerate(starts):
        traj = markov_simulate(spec, x0, args.steps, rng=rng.substream(1, i))
        cesaro_finals.append(traj.cesaro[-1])

    payload = {
        "strongly_connected": report.strongly_connected,
        "primitive": report.primitive,
        "primitivity_exponent": report.primitivity_exponent,
        "contraction_estimate": report.contraction_estimate,
        "verdict": report.verdict,
        "steps": args.steps,
        "starts": starts,
        "cesaro_means": cesaro_finals,
    }
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"strongly connected: {report.strongly_connected}")
        print(f"primitive: {report.primitive}"
              + (f" (exponent {report.primitivity_exponent})" if report.primitive else ""))
        print(f"contraction estimate: {report.contraction_estimate}")
        print(f"verdict: {report.verdict}")
        for x0, c in zip(starts, cesaro_finals):
            print(f"start {x0} -> cesaro mean {c}")
    return 0


def cmd_analyze(args) -> int:
    users_path = os.path.join(args.indir, "users.csv")
    groups_path = os.path.join(args.indir, "groups.csv")
    uhash, useed, _, urows = _read_csv(users_path)
    ghash, gseed, _, grows = _read_csv(groups_path)
    if uhash != ghash or useed != gseed:
        raise DataError("mixed config hashes or seeds across input files")

    # raw per-(trial, user) records, in file order (k-major within user)
    records: dict = {}
    races: dict = {}
    for trial, k, year, uid, race, income, dec, rep, adr in urows:
        key = (int(trial), int(uid))
        records.setdefault(key, []).append((int(k), int(dec), int(rep)))
        races[key] = race

    stored: dict = {}
    for trial, k, year, race, adr in grows:
        stored[(int(trial), int(k), race)] = float(adr)

    trials = sorted({t for t, _ in records})
    race_labels = sorted({r for r in races.values()})
    steps = max(k for k, _, _ in next(iter(records.values()))) + 1

    # recompute pooled group series from raw decisions/repayments
    mismatches = []
    recomputed: dict = {}
    for t in trials:
        for race in race_labels:
            members = [u for (tt, u) in records if tt == t and races[(tt, u)] == race]
            approvals = repaid = 0
            series = []
            for k in range(steps):
                for u in members:
                    _, d, r = records[(t, u)][k]
                    approvals += d
                    repaid += r
                series.append(1.0 - repaid / approvals if approvals > 0 else 0.0)
            recomputed[(t, race)] = series
            for k in range(steps):
                want = stored.get((t, k, race))
                if want is None or abs(want - series[k]) > 1e-12:
                    mismatches.append((t, k, race, want, series[k]))
    if mismatches:
        t, k, race, want, got = mismatches[0]
        raise DataError(
            f"groups.csv does not match raw records (first mismatch: trial {t}, "
            f"k {k}, {race}: stored {want}, recomputed {got}); data corruption?"
        )

    # treatment: per-trial signal uniformity plus race-level action tests
    treatment = []
    for t in trials:
        members = sorted(u for (tt, u) in records if tt == t)
        violations = 0
        for k in range(steps):
            if len({records[(t, u)][k][1] for u in members}) > 1:
                violations += 1
        pvals = {}
        for i, ra in enumerate(race_labels):
            for rb in race_labels[i + 1:]:
                counts = {}
                for race in (ra, rb):
                    mem = [u for u in members if races[(t, u)] == race]
                    apps = sum(records[(t, u)][k][1] for u in mem for k in range(steps))
                    reps = sum(records[(t, u)][k][2] for u in mem for k in range(steps))
                    counts[race] = (reps, apps)
                (sa, na), (sb, nb) = counts[ra], counts[rb]
                if na > 0 and nb > 0:
                    pvals[f"{ra} vs {rb}"] = two_proportion_pvalue(sa, na, sb, nb)
        treatment.append({
            "trial": t,
            "signal_uniform_steps_violated": violations,
            "repayment_rate_pvalues": pvals,
            "distribution_ok": all(p >= args.alpha for p in pvals.values()),
        })

    finals = [{race: recomputed[(t, race)][-1] for race in race_labels} for t in trials]
    coincidence = max(max(f.values()) - min(f.values()) for f in finals)
    cross = max(
        max(f[race] for f in finals) - min(f[race] for f in finals)
        for race in race_labels
    )
    analysis = {
        "config_hash": uhash,
        "seed": useed,
        "alpha": args.alpha,
        "epsilon": args.epsilon,
        "treatment": treatment,
        "impact": {
            "group_final_adr": finals,
            "coincidence_spread": coincidence,
            "initial_condition_spread": cross,
            "converged": coincidence <= args.epsilon and cross <= args.epsilon,
        },
    }
    out_path = os.path.join(args.indir, "analysis.json")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(analysis, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"analyze: cross-check passed; report written to {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loopfair")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the multi-trial credit experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ergodicity", help="check a Markov-system spec and run trajectories")
    p.add_argument("--spec", required=True)
    p.add_argument("--steps", type=int, default=100000)
    p.add_argument("--starts", default="0",
                   help="comma-separated starts; ':' separates coordinates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ergodicity)

    p = sub.add_parser("analyze", help="recompute and cross-check simulate output")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--epsilon", type=float, default=0.02)
    p.add_argument("--alpha", type=float, default=0.01)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
