"""Desk-scale experiment designs: criterion comparison, good-init comparison,
hyper-parameter grid, stopping-point analysis and data-size sweep.

Repetition ``r`` is driven entirely by ``Rng(cfg.seed + r)``: it picks the
labeled pool / test split, the initialization and every shuffle. The base
dataset itself comes from ``Rng(cfg.seed).split("data")`` and is shared by
all repetitions.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import metrics
from .config import ExperimentConfig, parse_ratio, train_fraction
from .data import Dataset, load_csv, low_resource_protocol, stratified_holdout, synth_gaussian
from .fogip import FogipConfig, candidates, fogip
from .model import ModelSpec, ParameterVector, init_params, predict
from .numerics import Rng
from .optim import OptimConfig, TrainingTrace, train
from .stopping import (
    eb_criterion,
    eb_should_stop,
    estimate_pe_stop_epoch,
    fixed_epoch_criterion,
    val_based_criterion,
)

log = logging.getLogger(__name__)

METRICS = ("accuracy", "loss", "ece", "oe", "stop_epoch")
VAL_RATIOS = ("25:75", "50:50", "75:25")


# --------------------------------------------------------------------------
# result containers


@dataclass
class RunRow:
    rep: int
    init: str
    criterion: str
    trn_val: str
    variant: str
    accuracy: float
    loss: float
    ece: float
    oe: float
    stop_epoch: float
    stop_reason: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (self.init, self.criterion, self.trn_val, self.variant)


@dataclass
class SummaryRow:
    init: str
    criterion: str
    trn_val: str
    variant: str
    runs: int
    mean: dict
    std: dict

    @property
    def key(self) -> tuple:
        return (self.init, self.criterion, self.trn_val, self.variant)


@dataclass
class ResultTable:
    rows: list[SummaryRow]
    runs: list[RunRow]
    traces: dict = field(default_factory=dict)  # name -> (header, rows)
    histograms: dict = field(default_factory=dict)

    def get(self, init=None, criterion=None, trn_val=None, variant=None) -> SummaryRow:
        want = (init, criterion, trn_val, variant)
        hits = [r for r in self.rows if all(w is None or w == k for w, k in zip(want, r.key))]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {want}")
        return hits[0]


def sample_std(values: Sequence[float]) -> float:
    """Unbiased standard deviation; 0 for a single value."""
    v = np.asarray(values, dtype=float)
    return float(np.std(v, ddof=1)) if v.size > 1 else 0.0


def aggregate(runs: list[RunRow]) -> list[SummaryRow]:
    groups: dict[tuple, list[RunRow]] = {}
    for row in sorted(runs, key=lambda r: r.rep):
        groups.setdefault(row.key, []).append(row)
    out = []
    for key, rows in groups.items():
        mean = {m: float(np.mean([getattr(r, m) for r in rows])) for m in METRICS}
        std = {m: sample_std([getattr(r, m) for r in rows]) for m in METRICS}
        out.append(SummaryRow(*key, len(rows), mean, std))
    return out


def improvement_rows(runs: list[RunRow], good="fogip", normal="normal") -> list[SummaryRow]:
    """good - normal per column; std is over the paired per-repetition differences."""
    by_key = {(r.rep,) + r.key: r for r in runs}
    out = []
    for s in aggregate(runs):
        if s.init != good:
            continue
        base = next(b for b in aggregate(runs) if b.key == (normal,) + s.key[1:])
        pairs = [(r, by_key[(r.rep, normal) + r.key[1:]]) for r in runs if r.key == s.key]
        mean = {m: s.mean[m] - base.mean[m] for m in METRICS}
        std = {m: sample_std([getattr(a, m) - getattr(b, m) for a, b in pairs]) for m in METRICS}
        out.append(SummaryRow("improvement", s.criterion, s.trn_val, s.variant, len(pairs), mean, std))
    return out


# --------------------------------------------------------------------------
# data and model plumbing


def _balanced(total: int, classes: int) -> list[int]:
    return [total // classes + (1 if c < total % classes else 0) for c in range(classes)]


@functools.lru_cache(maxsize=8)
def base_dataset(data_cfg, seed: int):
    """``(base, fixed_test_or_None, default_label_frac)`` for a data section."""
    if data_cfg.source == "synthetic":
        total = data_cfg.pool_size + data_cfg.test_size
        ds = synth_gaussian(
            data_cfg.classes, data_cfg.dim, _balanced(total, data_cfg.classes),
            data_cfg.separation, data_cfg.noise, Rng(seed).split("data"),
        )
        return ds, None, data_cfg.pool_size / total
    ds = load_csv(data_cfg.source)
    test = load_csv(data_cfg.test_path) if data_cfg.test_path else None
    if test is not None and (test.dim != ds.dim):
        raise ValueError("test CSV has a different feature count than the training CSV")
    return ds, test, data_cfg.label_frac


def rep_rng(cfg: ExperimentConfig, r: int) -> Rng:
    return Rng(cfg.seed + r)


def rep_data(cfg: ExperimentConfig, r: int, label_frac: Optional[float] = None):
    base, test, frac = base_dataset(cfg.data, cfg.seed)
    frac = frac if label_frac is None else label_frac
    return low_resource_protocol(base, frac, 1, rep_rng(cfg, r).split("split"), test)[0]


def model_spec(cfg: ExperimentConfig, ds: Dataset, dropout: Optional[float] = None) -> ModelSpec:
    spec = cfg.model.spec(ds.dim, ds.num_classes)
    return spec if dropout is None else spec.with_dropout(dropout)


def fogip_config(cfg: ExperimentConfig, rng: Rng, optim: Optional[OptimConfig] = None) -> FogipConfig:
    return FogipConfig.from_rng(
        cfg.fogip.n, rng.split("candidates"), optim=optim or cfg.optim,
        scope=cfg.fogip.scope, base_seed=rng.split("base").seed_list(1)[0],
    )


def initialization(cfg, spec, pool, rng, mode: Optional[str] = None) -> tuple[ParameterVector, dict]:
    mode = mode or cfg.init
    if mode == "normal":
        return init_params(spec, rng.split("init")), {}
    fc = fogip_config(cfg, rng)
    good, rec = fogip(pool, fc, spec, rng.split("fogip"))
    return good, {"fogip_selected": rec.selected, "fogip_instability": float(rec.total[rec.selected])}


def _row(r, init, crit, trn_val, variant, report, trace: TrainingTrace, **extra) -> RunRow:
    return RunRow(r, init, crit, trn_val, variant, report.accuracy, report.loss, report.ece,
                  report.oe, float(trace.stop_epoch), trace.stop_reason, extra)


def _evaluate(cfg, spec, params, test):
    return metrics.evaluate(predict(spec, params, test), cfg.bins)


def run_val(cfg, spec, init, pool, test, rng, trn_val, r, init_name="normal", variant="", optim=None):
    tr, va = stratified_holdout(pool, train_fraction(trn_val), rng.split("holdout", trn_val))
    params, trace = train(spec, init, tr, optim or cfg.optim, val_based_criterion(va),
                          rng.split("train", trn_val))
    return _row(r, init_name, "val", trn_val, variant, _evaluate(cfg, spec, params, test), trace)


def run_pe(cfg, spec, init, pool, test, rng, r, init_name="normal", variant="", optim=None):
    optim = optim or cfg.optim
    pe = estimate_pe_stop_epoch(spec, pool, cfg.stopping.k, optim, rng.split("pe"), init)
    params, trace = train(spec, init, pool, optim, fixed_epoch_criterion(pe.pe_stop_epoch),
                          rng.split("final"))
    return _row(r, init_name, "pe", "100:0", variant, _evaluate(cfg, spec, params, test), trace,
                pe_folds=";".join(map(str, pe.fold_stop_epochs)))


def run_eb(cfg, spec, init, pool, test, rng, r, init_name="normal", variant="", optim=None):
    params, trace = train(spec, init, pool, optim or cfg.optim, eb_criterion(cfg.stopping.eps_var),
                          rng.split("final"))
    return _row(r, init_name, "eb", "100:0", variant, _evaluate(cfg, spec, params, test), trace)


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# compare-criteria


def _compare_rep(cfg: ExperimentConfig, r: int) -> list[RunRow]:
    pool, test = rep_data(cfg, r)
    spec = model_spec(cfg, pool)
    rng = rep_rng(cfg, r)
    init, info = initialization(cfg, spec, pool, rng)
    rows = [run_val(cfg, spec, init, pool, test, rng, tv, r, cfg.init) for tv in VAL_RATIOS]
    rows.append(run_pe(cfg, spec, init, pool, test, rng, r, cfg.init))
    rows.append(run_eb(cfg, spec, init, pool, test, rng, r, cfg.init))
    for row in rows:
        row.extra.update(info)
    return rows


def compare_criteria(cfg: ExperimentConfig) -> ResultTable:
    reps = _map(functools.partial(_compare_rep, cfg), range(cfg.repetitions), cfg.jobs)
    runs = [row for rows in reps for row in rows]
    return ResultTable(aggregate(runs), runs)


# --------------------------------------------------------------------------
# fogip-compare


def _fogip_rep(cfg: ExperimentConfig, r: int) -> list[RunRow]:
    pool, test = rep_data(cfg, r)
    spec = model_spec(cfg, pool)
    rng = rep_rng(cfg, r)
    fc = fogip_config(cfg, rng)
    pool_params = candidates(spec, fc)
    good, rec = fogip(pool, fc, spec, rng.split("fogip"), pool_params)
    pick = int(rng.split("normal").integers(fc.n))
    rows = []
    for name, init, idx in (("normal", pool_params[pick], pick), ("fogip", good, rec.selected)):
        for runner in (run_pe, run_eb):
            row = runner(cfg, spec, init, pool, test, rng, r, name)
            row.extra.update(candidate=idx, candidate_seed=fc.seeds[idx])
            rows.append(row)
    return rows


def fogip_compare(cfg: ExperimentConfig) -> ResultTable:
    reps = _map(functools.partial(_fogip_rep, cfg), range(cfg.repetitions), cfg.jobs)
    runs = [row for rows in reps for row in rows]
    return ResultTable(aggregate(runs) + improvement_rows(runs), runs)


# --------------------------------------------------------------------------
# hyper-grid


def _setting_loss(cfg, pool, rng, lr, dropout, batch) -> float:
    tr, va = stratified_holdout(pool, 0.5, rng.split("holdout", "50:50"))
    spec = model_spec(cfg, pool, dropout)
    optim = cfg.optim.with_(learning_rate=lr, batch_size=int(batch))
    init = init_params(spec, rng.split("init"))
    _, trace = train(spec, init, tr, optim, val_based_criterion(va), rng.split("train", "50:50"))
    return trace.min_val_loss()


def greedy_tune(cfg: ExperimentConfig, pool: Dataset, rng: Rng) -> dict:
    """Coordinate-wise search over the grid in declaration order.

    Ties in validation loss keep the earliest grid point.
    """
    current = {"learning_rate": cfg.optim.learning_rate, "dropout": cfg.model.dropout,
               "batch_size": cfg.optim.batch_size}
    for name in ("learning_rate", "dropout", "batch_size"):
        best, best_val = None, math.inf
        for value in getattr(cfg.grid, name):
            trial = dict(current, **{name: value})
            loss = _setting_loss(cfg, pool, rng, trial["learning_rate"], trial["dropout"],
                                 trial["batch_size"])
            if loss < best_val:
                best, best_val = value, loss
        current[name] = best
    return current


def _grid_rep(cfg: ExperimentConfig, r: int) -> list[RunRow]:
    pool, test = rep_data(cfg, r)
    rng = rep_rng(cfg, r)
    tuned = greedy_tune(cfg, pool, rng)
    default = {"learning_rate": cfg.optim.learning_rate, "dropout": cfg.model.dropout,
               "batch_size": cfg.optim.batch_size}
    rows = []
    for variant, setting in (("default", default), ("tuned", tuned)):
        spec = model_spec(cfg, pool, setting["dropout"])
        optim = cfg.optim.with_(learning_rate=setting["learning_rate"],
                                batch_size=int(setting["batch_size"]))
        init = init_params(spec, rng.split("init"))
        row = run_pe(cfg, spec, init, pool, test, rng, r, "normal", variant, optim)
        row.extra.update(setting)
        rows.append(row)
    return rows


def hyper_grid(cfg: ExperimentConfig) -> ResultTable:
    reps = _map(functools.partial(_grid_rep, cfg), range(cfg.repetitions), cfg.jobs)
    runs = [row for rows in reps for row in rows]
    return ResultTable(aggregate(runs), runs)


# --------------------------------------------------------------------------
# stop-analysis

TRACE_HEADER = ("epoch", "train_loss", "test_loss", "test_accuracy", "eb_statistic")
HIST_HEADER = ("rep", "bin", "lower", "upper", "count", "confidence", "accuracy")


@dataclass
class StopAnalysis:
    rows: list[RunRow]
    trace: list[tuple]
    histograms: dict  # criterion -> list of rows


def _stop_rep(cfg: ExperimentConfig, r: int) -> StopAnalysis:
    pool, test = rep_data(cfg, r)
    spec = model_spec(cfg, pool)
    rng = rep_rng(cfg, r)
    init, info = initialization(cfg, spec, pool, rng)
    pe = estimate_pe_stop_epoch(spec, pool, cfg.stopping.k, cfg.optim, rng.split("pe"), init)

    snapshots, test_loss, test_acc, stats = [], [], [], []

    def record(epoch, params):
        pred = predict(spec, params, test)
        test_loss.append(metrics.cross_entropy(pred))
        test_acc.append(metrics.accuracy(pred))
        stats.append(eb_should_stop(spec, params, pool, cfg.stopping.eps_var)[1])
        snapshots.append(params.copy())

    max_epochs = cfg.optim.max_epochs
    _, trace = train(spec, init, pool, cfg.optim, fixed_epoch_criterion(max_epochs),
                     rng.split("final"), on_epoch=record)
    fired = [e for e, s in enumerate(stats, start=1) if s > 0]
    stops = {
        "pe": (pe.pe_stop_epoch, "pe_schedule"),
        "eb": (fired[0], "eb_triggered") if fired else (max_epochs, "max_epochs_cap"),
        "best_test": (int(np.argmin(test_loss)) + 1, "test_min"),
    }
    rows, hists = [], {}
    for crit, (epoch, reason) in stops.items():
        pred = predict(spec, snapshots[epoch - 1], test)
        rep = metrics.evaluate(pred, cfg.bins)
        rows.append(RunRow(r, cfg.init, crit, "100:0", "", rep.accuracy, rep.loss, rep.ece,
                           rep.oe, float(epoch), reason,
                           dict(info, mean_confidence=rep.histogram.mean_confidence,
                                confidence_gap=rep.histogram.gap)))
        if crit != "best_test":
            b = rep.bins
            edges = b.edges()
            hists[crit] = [
                (r, m + 1, edges[m], edges[m + 1], int(b.counts[m]), b.confidence[m], b.accuracy[m])
                for m in range(b.num_bins)
            ]
    rows[1].extra["eb_fired"] = bool(fired)
    trace_rows = [
        (rec.epoch, rec.train_loss, test_loss[i], test_acc[i], stats[i])
        for i, rec in enumerate(trace.records)
    ]
    return StopAnalysis(rows, trace_rows, hists)


def stop_point_analysis(cfg: ExperimentConfig) -> ResultTable:
    reps = _map(functools.partial(_stop_rep, cfg), range(cfg.repetitions), cfg.jobs)
    runs = [row for rep in reps for row in rep.rows]
    table = ResultTable(aggregate(runs), runs)
    for r, rep in enumerate(reps):
        table.traces[f"trace_{r}"] = (TRACE_HEADER, rep.trace)
    for crit in ("pe", "eb"):
        table.histograms[f"histogram_{crit}"] = (
            HIST_HEADER, [row for rep in reps for row in rep.histograms[crit]]
        )
    return table


# --------------------------------------------------------------------------
# size-sweep


def _sweep_rep(cfg: ExperimentConfig, item) -> list[RunRow]:
    fraction, r = item
    pool, test = rep_data(cfg, r, fraction)
    rng = rep_rng(cfg, r).split("fraction", repr(fraction))
    variant = f"frac={fraction}"
    spec = model_spec(cfg, pool)
    good, info = initialization(cfg, spec, pool, rng, "fogip")
    rows = [run_pe(cfg, spec, good, pool, test, rng, r, "fogip", variant)]
    rows[0].extra.update(info)
    for d in cfg.sweep.dropouts:
        dspec = model_spec(cfg, pool, d)
        init = init_params(dspec, rng.split("init"))
        row = run_val(cfg, dspec, init, pool, test, rng, cfg.sweep.trn_val, r, "normal",
                      f"{variant};dropout={d}")
        rows.append(row)
    for row in rows:
        row.extra.update(fraction=fraction, pool_size=len(pool))
    return rows


def size_sweep(cfg: ExperimentConfig) -> ResultTable:
    parse_ratio(cfg.sweep.trn_val)
    fractions = sorted(set(float(f) for f in cfg.sweep.fractions))
    items = [(f, r) for f in fractions for r in range(cfg.repetitions)]
    reps = _map(functools.partial(_sweep_rep, cfg), items, cfg.jobs)
    runs = [row for rows in reps for row in rows]
    return ResultTable(aggregate(runs), runs)


# --------------------------------------------------------------------------
# pe-estimate and single training runs


@dataclass
class PeEstimate:
    rep: int
    fold_stop_epochs: tuple
    pe_stop_epoch: int
    warnings: tuple


def _pe_rep(cfg: ExperimentConfig, r: int) -> PeEstimate:
    pool, _ = rep_data(cfg, r)
    spec = model_spec(cfg, pool)
    rng = rep_rng(cfg, r)
    init, _ = initialization(cfg, spec, pool, rng)
    pe = estimate_pe_stop_epoch(spec, pool, cfg.stopping.k, cfg.optim, rng.split("pe"), init)
    return PeEstimate(r, pe.fold_stop_epochs, pe.pe_stop_epoch, pe.warnings)


def pe_estimate(cfg: ExperimentConfig) -> list[PeEstimate]:
    return _map(functools.partial(_pe_rep, cfg), range(cfg.repetitions), cfg.jobs)


def _train_rep(cfg: ExperimentConfig, r: int):
    pool, test = rep_data(cfg, r)
    spec = model_spec(cfg, pool)
    rng = rep_rng(cfg, r)
    init, info = initialization(cfg, spec, pool, rng)
    st = cfg.stopping
    if st.criterion == "val":
        tr, va = stratified_holdout(pool, train_fraction(st.trn_val), rng.split("holdout", st.trn_val))
        crit = val_based_criterion(va)
    else:
        tr = pool
        if st.criterion == "eb":
            crit = eb_criterion(st.eps_var)
        elif st.criterion == "fixed":
            crit = fixed_epoch_criterion(st.fixed_epoch)
        else:
            pe = estimate_pe_stop_epoch(spec, pool, st.k, cfg.optim, rng.split("pe"), init)
            crit = fixed_epoch_criterion(pe.pe_stop_epoch, name="pe")
            info = dict(info, pe_folds=";".join(map(str, pe.fold_stop_epochs)))
    params, trace = train(spec, init, tr, cfg.optim, crit, rng.split("final"))
    row = _row(r, cfg.init, st.criterion, st.trn_val, "", _evaluate(cfg, spec, params, test),
               trace, **info)
    if trace.notes:
        row.extra["notes"] = " | ".join(trace.notes)
    return row, trace


TRAIN_TRACE_HEADER = ("epoch", "train_loss", "val_loss", "eb_statistic", "snapshot")


def train_runs(cfg: ExperimentConfig) -> ResultTable:
    reps = _map(functools.partial(_train_rep, cfg), range(cfg.repetitions), cfg.jobs)
    runs = [row for row, _ in reps]
    table = ResultTable(aggregate(runs), runs)
    for r, (_, trace) in enumerate(reps):
        table.traces[f"trace_{r}"] = (
            TRAIN_TRACE_HEADER,
            [dataclasses.astuple(rec) for rec in trace.records],
        )
    return table
