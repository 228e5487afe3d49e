"""Monte Carlo orchestration: single trials, parameter sweeps and CSV output.

A trial is identified by ``(master seed, drop index)``.  Every random draw
inside it comes from a substream of that pair, and all schedulers compared
in one trial see the same drop and the same fading realization.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import assemble_channel, draw_fading
from .config import ScenarioConfig
from .drop import drop_from_stream
from .localization import SounderConfig, perturb_and_rebuild
from .receiver import SingularChannelError, zf_sum_rate
from .rng import FADING, PERTURB, SELECTION, RandomStream
from .scheduler import (GUS_MINCORR, GUS_THRESHOLD, GWC, RS, SCHEDULERS, activity_sets,
                        build_v_matrix, estimation_load, gus_mincorr, gus_threshold, gwc,
                        mean_common_clusters, random_selection)

CSV_HEADER = ("sweep_var", "value", "scheduler", "mean_sumrate", "stderr", "trials",
              "failed", "load")

# sweep variable name -> config field (omega is a trial argument, not a config field)
SWEEP_FIELDS = {"R": "cell_size", "K": "k_users", "M": "m_antennas", "K_s": "k_selected",
                "omega": None}


@dataclass
class TrialRecord:
    seed: int
    drop: int
    scheduler: str
    selected: list[int]
    sum_rate: float
    load: int
    mean_common: float
    failed: bool = False
    omega: float | None = None
    v_error: float | None = None
    lost_paths: int = 0


@dataclass
class SweepSpec:
    var: str
    values: list
    trials: int = 50
    schedulers: tuple[str, ...] = (GUS_THRESHOLD, GWC, RS)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.var not in SWEEP_FIELDS:
            raise ValueError(f"cannot sweep {self.var!r}; choose from {sorted(SWEEP_FIELDS)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("need at least one trial per point")
        unknown = set(self.schedulers) - set(SCHEDULERS)
        if unknown:
            raise ValueError(f"unknown schedulers {sorted(unknown)}")


@dataclass
class SweepRow:
    sweep_var: str
    value: float
    scheduler: str
    mean_sumrate: float | None
    stderr: float | None
    trials: int
    failed: int
    load: int


PRESETS = {
    "fig3": SweepSpec("R", [200, 400, 600, 800, 1000],
                      overrides=dict(k_users=400, m_antennas=100, k_selected=40)),
    "fig4": SweepSpec("K", [100, 200, 300, 400, 500],
                      overrides=dict(cell_size=600, m_antennas=100, k_selected=40)),
    "fig5": SweepSpec("M", [50, 100, 150, 200, 300, 400], schedulers=(GUS_THRESHOLD, GWC),
                      overrides=dict(cell_size=600, k_users=400, k_selected=40)),
    "fig6": SweepSpec("omega", [0, 1, 2, 3, 4, 5, 6, 8, 10], schedulers=(GUS_THRESHOLD,),
                      overrides=dict(cell_size=600, k_users=400, m_antennas=400, k_selected=40)),
}


def _rate(cfg: ScenarioConfig, h: np.ndarray) -> float:
    return zf_sum_rate(h, cfg.total_power, cfg.noise_power, cfg.cond_cap, cfg.eq4_literal)


def run_trials(cfg: ScenarioConfig, drop_index: int, schedulers=SCHEDULERS,
               omega: float | None = None, seed: int | None = None) -> list[TrialRecord]:
    """Evaluate several schedulers on one drop and one fading realization."""
    seed = cfg.seed if seed is None else seed
    stream = RandomStream(seed).spawn(drop_index)
    drop = drop_from_stream(cfg, stream)
    v = build_v_matrix(drop)
    sets = activity_sets(v, cfg.activity_threshold)
    fading = draw_fading(drop.n_clusters, cfg.n_mpc, stream.spawn(FADING))
    k, k_s, m = drop.k_users, cfg.k_selected, cfg.m_antennas

    v_sched, v_error, lost = v, None, 0
    if omega:
        pert = perturb_and_rebuild(drop, v, SounderConfig.from_config(cfg), omega,
                                   stream.spawn(PERTURB), active=sets)
        v_sched, v_error, lost = pert.v_tilde, pert.relative_error, pert.lost
    elif omega is not None:
        v_error = 0.0

    h_full = None
    records = []
    for tag in schedulers:
        if tag == GUS_THRESHOLD:
            res = gus_threshold(v_sched, k_s, cfg.eps_h)
        elif tag == GUS_MINCORR:
            res = gus_mincorr(v_sched, k_s)
        elif tag == RS:
            res = random_selection(k, k_s, stream.spawn(SELECTION))
        elif tag == GWC:
            if h_full is None:
                h_full = assemble_channel(drop, range(k), sets, fading)
            if cfg.gwc_grid_search:
                res = gwc(h_full, k_s, grid=cfg.eps_g_grid, rate_fn=lambda h: _safe_rate(cfg, h))
            else:
                res = gwc(h_full, k_s, cfg.eps_g)
        else:
            raise ValueError(f"unknown scheduler {tag!r}")
        if h_full is not None:
            h = h_full[:, res.selected]
        else:
            h = assemble_channel(drop, res.selected, sets, fading)
        failed = False
        try:
            rate = _rate(cfg, h)
        except SingularChannelError:
            rate, failed = 0.0, True
        records.append(TrialRecord(seed, drop_index, tag, res.selected, rate,
                                   estimation_load(tag, m, k, k_s),
                                   mean_common_clusters(res.selected, sets), failed,
                                   omega, v_error, lost))
    return records


def _safe_rate(cfg: ScenarioConfig, h: np.ndarray) -> float:
    try:
        return _rate(cfg, h)
    except SingularChannelError:
        return -math.inf


def run_trial(cfg: ScenarioConfig, drop_index: int, scheduler: str,
              omega: float | None = None, seed: int | None = None) -> TrialRecord:
    return run_trials(cfg, drop_index, (scheduler,), omega, seed)[0]


def point_config(cfg: ScenarioConfig, spec: SweepSpec, value) -> tuple[ScenarioConfig, float | None]:
    cfg = cfg.replace(**spec.overrides) if spec.overrides else cfg
    name = SWEEP_FIELDS[spec.var]
    if name is None:
        return cfg.validate(), float(value)
    cast = type(getattr(cfg, name))
    return cfg.replace(**{name: cast(value)}).validate(), None


def _task(args):
    cfg, trial, schedulers, omega, seed = args
    return run_trials(cfg, trial, schedulers, omega, seed)


def run_sweep(spec: SweepSpec, cfg: ScenarioConfig, threads: int = 1,
              seed: int | None = None) -> tuple[list[SweepRow], list[TrialRecord]]:
    """Run every (value, trial) pair and aggregate per (value, scheduler).

    Drop ``t`` of every sweep point uses the same substream, so points are
    compared on common random numbers.  Results are gathered in task order,
    which makes the output independent of ``threads``.
    """
    seed = cfg.seed if seed is None else seed
    tasks = []
    for value in spec.values:
        pcfg, omega = point_config(cfg, spec, value)
        tasks += [(pcfg, t, tuple(spec.schedulers), omega, seed) for t in range(spec.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        results = [_task(t) for t in tasks]

    rows, records = [], []
    for i, value in enumerate(spec.values):
        pcfg = tasks[i * spec.trials][0]
        chunk = results[i * spec.trials:(i + 1) * spec.trials]
        for tag in spec.schedulers:
            recs = [r for trial in chunk for r in trial if r.scheduler == tag]
            records += recs
            ok = [r.sum_rate for r in recs if not r.failed]
            mean = float(np.mean(ok)) if ok else None
            err = float(np.std(ok, ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else None
            load = estimation_load(tag, pcfg.m_antennas, pcfg.k_users, pcfg.k_selected)
            rows.append(SweepRow(spec.var, value, tag, mean, err, len(recs),
                                 len(recs) - len(ok), load))
    return rows, records


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        x = float(x)
        return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)
    return str(x)


def write_csv(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        d = row if isinstance(row, dict) else asdict(row)
        writer.writerow([_fmt(d[c]) for c in CSV_HEADER])


def emit_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        write_csv(rows, fh)


def read_csv(path) -> list[SweepRow]:
    def num(s, cast=float):
        return None if s == "" else cast(s)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [SweepRow(r["sweep_var"], num(r["value"]), r["scheduler"],
                         num(r["mean_sumrate"]), num(r["stderr"]), int(r["trials"]),
                         int(r["failed"]), int(r["load"])) for r in reader]
