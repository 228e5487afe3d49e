"""Command line entry point: ``costsched {simulate,sweep,localize}``.

Settings are resolved as flags > ``$COSTSCHED_CONFIG`` > shipped defaults.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

from .channel import assemble_channel, draw_fading, dump_channel
from .config import ConfigError, load_config
from .drop import drop_from_stream
from .harness import (PRESETS, SWEEP_FIELDS, SweepSpec, emit_csv, run_sweep, run_trials,
                      write_csv)
from .localization import SounderConfig, perturb_and_rebuild
from .rng import FADING, PERTURB, RandomStream
from .scheduler import SCHEDULERS, activity_sets, build_v_matrix


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (default: $COSTSCHED_CONFIG or shipped defaults)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--eps-h", type=float, dest="eps_h", help="GUS pruning threshold")
    p.add_argument("--eps-g", type=float, dest="eps_g",
                   help="fixed GWC orthogonality threshold (disables the grid search)")
    p.add_argument("--ks", type=int, dest="k_selected", help="number of users to schedule")
    p.add_argument("--eq4-literal", dest="eq4_literal", action="store_true", default=None,
                   help="use a bare 1 instead of the filtered noise power in the SINR")
    p.add_argument("--out", help="output file (CSV); stdout if omitted")
    snd = p.add_argument_group("sounder (localization error model)")
    snd.add_argument("--bandwidth", type=float, dest="sounder_bandwidth", help="Hz")
    snd.add_argument("--snr-db", type=float, dest="sounder_snr_db", help="per-antenna SNR in dB")
    snd.add_argument("--pn-length", type=int, dest="sounder_pn_length")
    snd.add_argument("--periods", type=int, dest="sounder_periods")
    snd.add_argument("--array-side", type=int, dest="sounder_side", help="elements per array side")
    snd.add_argument("--pattern", choices=("printed", "quartic"), dest="pattern_variant",
                     help="element pattern polynomial variant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="costsched",
                                     description="Geometry-based user scheduling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one drop and report every scheduler")
    _add_common(sim)
    sim.add_argument("--drop", type=int, default=0, help="drop index within the seed")
    sim.add_argument("--scheduler", choices=SCHEDULERS, action="append",
                     help="scheduler to run (repeatable; default: all)")
    sim.add_argument("--omega", type=float, help="localization error scale for GUS")
    sim.add_argument("--dump-channel", dest="dump_channel",
                     help="write the full M x K channel (.csv or binary)")

    sw = sub.add_parser("sweep", help="Monte Carlo sweep over one parameter")
    _add_common(sw)
    sw.add_argument("--preset", choices=sorted(PRESETS))
    sw.add_argument("--var", choices=sorted(SWEEP_FIELDS), help="swept variable (custom sweep)")
    sw.add_argument("--values", type=float, nargs="+", help="values of the swept variable")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--scheduler", choices=SCHEDULERS, action="append")
    sw.add_argument("--threads", type=int, default=1)

    loc = sub.add_parser("localize", help="per-path localization diagnostics for one drop")
    _add_common(loc)
    loc.add_argument("--drop", type=int, default=0)
    loc.add_argument("--omega", type=float, default=1.0)
    return parser


def _config(args):
    keys = ("seed", "eps_h", "eps_g", "k_selected", "eq4_literal", "sounder_bandwidth",
            "sounder_snr_db", "sounder_pn_length", "sounder_periods", "sounder_side",
            "pattern_variant")
    overrides = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "eps_g", None) is not None:
        overrides["gwc_grid_search"] = False
    return load_config(args.config, **overrides)


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_simulate(args) -> int:
    cfg = _config(args)
    tags = tuple(args.scheduler or SCHEDULERS)
    records = run_trials(cfg, args.drop, tags, args.omega)
    out = _open_out(args.out)
    try:
        writer = csv.writer(out)
        writer.writerow(["scheduler", "sum_rate", "load", "mean_common", "failed", "selected"])
        for r in records:
            writer.writerow([r.scheduler, repr(r.sum_rate), r.load, repr(r.mean_common),
                             int(r.failed), " ".join(map(str, r.selected))])
    finally:
        if out is not sys.stdout:
            out.close()
    if args.dump_channel:
        stream = RandomStream(cfg.seed).spawn(args.drop)
        drop = drop_from_stream(cfg, stream)
        sets = activity_sets(build_v_matrix(drop), cfg.activity_threshold)
        fading = draw_fading(drop.n_clusters, cfg.n_mpc, stream.spawn(FADING))
        dump_channel(assemble_channel(drop, range(drop.k_users), sets, fading),
                     args.dump_channel, cfg.seed)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.preset:
        spec = PRESETS[args.preset]
        if args.var or args.values:
            raise ConfigError("--preset cannot be combined with --var/--values")
    elif args.var and args.values:
        spec = SweepSpec(args.var, list(args.values))
    else:
        raise ConfigError("sweep needs --preset or both --var and --values")
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.scheduler:
        changes["schedulers"] = tuple(args.scheduler)
    if args.k_selected is not None and spec.var != "K_s":
        # an explicit --ks beats the preset's own value
        changes["overrides"] = {**spec.overrides, "k_selected": args.k_selected}
    spec = dataclasses.replace(spec, **changes)
    rows, _ = run_sweep(spec, cfg, threads=max(1, args.threads))
    if args.out:
        emit_csv(rows, args.out)
    else:
        write_csv(rows, sys.stdout)
    return 0


def cmd_localize(args) -> int:
    cfg = _config(args)
    stream = RandomStream(cfg.seed).spawn(args.drop)
    drop = drop_from_stream(cfg, stream)
    v = build_v_matrix(drop)
    res = perturb_and_rebuild(drop, v, SounderConfig.from_config(cfg), args.omega,
                              stream.spawn(PERTURB))
    out = _open_out(args.out)
    try:
        fields = ["user", "cluster", "true_d_bc", "true_d_mc", "est_d_bc", "est_d_mc", "lost"]
        writer = csv.DictWriter(out, fieldnames=fields)
        writer.writeheader()
        writer.writerows(res.rows)
    finally:
        if out is not sys.stdout:
            out.close()
    summary = {"paths": res.paths, "lost": res.lost, "relative_v_error": res.relative_error}
    print(json.dumps(summary), file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": cmd_simulate, "sweep": cmd_sweep, "localize": cmd_localize}[args.command]
    try:
        return handler(args)
    except (ConfigError, OSError) as exc:
        print(f"costsched: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
