"""Detection scoring: label matching, summary metrics, splits, cross-validation."""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import LabeledRecord
from .solver import Signal


@dataclass
class MatchResult:
    tp: int
    fp: int
    fn: int
    matched_pairs: list


def _check_sorted(name, xs):
    for i in range(1, len(xs)):
        if xs[i] < xs[i - 1]:
            raise ValueError(f"{name} must be sorted ascending")


def match(labels, detections, tolerance_samples: int) -> MatchResult:
    """Greedy one-to-one matching within +-tolerance_samples.

    Candidate pairs are taken in order of increasing distance; every label
    and every detection is used at most once.  Unmatched labels count as
    false negatives, unmatched detections as false positives.
    """
    labels = list(labels)
    detections = list(detections)
    _check_sorted("labels", labels)
    _check_sorted("detections", detections)
    tol = int(tolerance_samples)
    det_arr = np.asarray(detections)
    cands = []
    for li, lab in enumerate(labels):
        lo = int(np.searchsorted(det_arr, lab - tol, side="left"))
        hi = int(np.searchsorted(det_arr, lab + tol, side="right"))
        for di in range(lo, hi):
            cands.append((abs(detections[di] - lab), li, di))
    cands.sort()
    used_l = set()
    used_d = set()
    pairs = []
    for _dist, li, di in cands:
        if li in used_l or di in used_d:
            continue
        used_l.add(li)
        used_d.add(di)
        pairs.append((li, di))
    pairs.sort()
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(detections) - tp, fn=len(labels) - tp,
                       matched_pairs=pairs)


def match_within_bands(labels, detections, band_edges) -> MatchResult:
    """Band-mode matching: detection d can match label k only when d falls in
    [band_edges[k], band_edges[k+1]).  Greedy by distance, single use, like
    match()."""
    labels = list(labels)
    detections = list(detections)
    _check_sorted("labels", labels)
    _check_sorted("detections", detections)
    edges = list(band_edges)
    if len(edges) != len(labels) + 1:
        raise ValueError("band_edges must have one more entry than labels")
    cands = []
    for li, lab in enumerate(labels):
        for di, det in enumerate(detections):
            if edges[li] <= det < edges[li + 1]:
                cands.append((abs(det - lab), li, di))
    cands.sort()
    used_l = set()
    used_d = set()
    pairs = []
    for _dist, li, di in cands:
        if li in used_l or di in used_d:
            continue
        used_l.add(li)
        used_d.add(di)
        pairs.append((li, di))
    pairs.sort()
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(detections) - tp, fn=len(labels) - tp,
                       matched_pairs=pairs)


def metrics(tp: int, fp: int, fn: int):
    """(sensitivity %, positive predictivity %, detection error rate %).

    A zero denominator yields None for that value rather than a silent 0.
    """
    for name, v in (("tp", tp), ("fp", fp), ("fn", fn)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")
    sen = tp / (tp + fn) * 100.0 if tp + fn > 0 else None
    ppr = tp / (tp + fp) * 100.0 if tp + fp > 0 else None
    der = (fn + fp) / (tp + fn) * 100.0 if tp + fn > 0 else None
    return sen, ppr, der


@dataclass
class RecordCounts:
    record_id: str
    tp: int
    fp: int
    fn: int
    fold: int = None
    infeasible_windows: int = 0


def _fmt_pct(x):
    return "   n/a" if x is None else f"{x:6.2f}"


@dataclass
class DetectionReport:
    """Per-record (or per-window) counts plus pooled and per-fold summaries."""

    records: list

    @property
    def tp(self):
        return sum(r.tp for r in self.records)

    @property
    def fp(self):
        return sum(r.fp for r in self.records)

    @property
    def fn(self):
        return sum(r.fn for r in self.records)

    def pooled_metrics(self):
        return metrics(self.tp, self.fp, self.fn)

    @property
    def sen(self):
        return self.pooled_metrics()[0]

    @property
    def ppr(self):
        return self.pooled_metrics()[1]

    @property
    def der(self):
        return self.pooled_metrics()[2]

    def folds(self):
        """Counts aggregated per fold, for rows that carry a fold id."""
        byf = {}
        for r in self.records:
            if r.fold is None:
                continue
            t = byf.setdefault(r.fold, [0, 0, 0])
            t[0] += r.tp
            t[1] += r.fp
            t[2] += r.fn
        return {f: tuple(v) for f, v in sorted(byf.items())}

    def fold_average(self):
        """Mean of the per-fold metric values (None entries are skipped)."""
        vals = [metrics(*c) for c in self.folds().values()]
        out = []
        for i in range(3):
            xs = [v[i] for v in vals if v[i] is not None]
            out.append(sum(xs) / len(xs) if xs else None)
        return tuple(out)

    def to_json_dict(self):
        sen, ppr, der = self.pooled_metrics()
        doc = {
            "records": [
                {
                    "record_id": r.record_id,
                    "fold": r.fold,
                    "tp": r.tp,
                    "fp": r.fp,
                    "fn": r.fn,
                    "infeasible_windows": r.infeasible_windows,
                }
                for r in self.records
            ],
            "pooled": {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                       "sen": sen, "ppr": ppr, "der": der},
        }
        folds = self.folds()
        if folds:
            doc["folds"] = [
                {"fold": f, "tp": c[0], "fp": c[1], "fn": c[2],
                 "sen": metrics(*c)[0], "ppr": metrics(*c)[1], "der": metrics(*c)[2]}
                for f, c in folds.items()
            ]
            fa = self.fold_average()
            doc["fold_average"] = {"sen": fa[0], "ppr": fa[1], "der": fa[2]}
        return doc

    def to_table(self, method="graphseg"):
        """Fixed-column text table: Method, Sen, PPR, DER."""
        folds = self.folds()
        rows = [(method, self.pooled_metrics())]
        for f, c in folds.items():
            rows.append((f"{method} (fold {f})", metrics(*c)))
        if folds:
            rows.append((f"{method} (fold avg)", self.fold_average()))
        width = max(24, max(len(r[0]) for r in rows) + 2)
        lines = [f"{'Method':<{width}}{'Sen (%)':>10}{'PPR (%)':>10}{'DER (%)':>10}"]
        for label, (s, p, d) in rows:
            lines.append(
                f"{label:<{width}}{_fmt_pct(s):>10}{_fmt_pct(p):>10}{_fmt_pct(d):>10}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Cycle bookkeeping: a cycle runs midpoint-to-midpoint between consecutive
# annotations; the first and last half-cycles attach to their neighbours.
# ---------------------------------------------------------------------------


def cycle_bounds(record: LabeledRecord) -> np.ndarray:
    ann = record.rpeak_annotations
    if len(ann) == 0:
        raise ValueError(f"record {record.record_id} has no annotations")
    n = len(record.signal)
    mids = (ann[:-1] + ann[1:]) // 2
    return np.concatenate(([0], mids, [n])).astype(np.int64)


def windows_from_cycles(record: LabeledRecord, cycle_ids) -> list:
    """Contiguous groups of the selected cycles, padded by half the median
    cycle length on each side for solver context.  Labels and the scoring
    span cover only the unpadded core."""
    ids = sorted(set(int(i) for i in cycle_ids))
    if not ids:
        return []
    bounds = cycle_bounds(record)
    ann = record.rpeak_annotations
    n = len(record.signal)
    pad = int(np.median(np.diff(bounds)) // 2)
    groups = []
    start = prev = ids[0]
    for i in ids[1:]:
        if i == prev + 1:
            prev = i
            continue
        groups.append((start, prev))
        start = prev = i
    groups.append((start, prev))

    windows = []
    for wi, (g0, g1) in enumerate(groups):
        core_lo = int(bounds[g0])
        core_hi = int(bounds[g1 + 1])
        win_lo = max(0, core_lo - pad)
        win_hi = min(n, core_hi + pad)
        labels = ann[(ann >= core_lo) & (ann < core_hi)] - win_lo
        windows.append(
            LabeledRecord(
                record_id=f"{record.record_id}[c{g0}-{g1}]",
                signal=Signal(record.signal.samples[win_lo:win_hi].copy(),
                              record.signal.sample_rate),
                rpeak_annotations=labels,
                lead=record.lead,
                eval_span=(core_lo - win_lo, core_hi - win_lo),
            )
        )
    return windows


def windows_whole_record(record: LabeledRecord, cycles_per_window=4) -> list:
    """Chop a record into consecutive fixed-size cycle groups."""
    m = record.n_cycles
    out = []
    for start in range(0, m, cycles_per_window):
        out.extend(windows_from_cycles(record, range(start, min(start + cycles_per_window, m))))
    return out


def split_cycles(record: LabeledRecord, seed: int, test_fraction=0.25):
    """Random per-cycle train/test split at roughly 3:1, deterministic under
    the seed.  Returns (train_windows, test_windows)."""
    m = record.n_cycles
    if m < 4:
        raise ValueError(f"record {record.record_id} has {m} cycles, needs >= 4")
    rng = np.random.default_rng(seed)
    n_test = max(1, int(round(m * test_fraction)))
    test_ids = set(rng.choice(m, size=n_test, replace=False).tolist())
    train_ids = [i for i in range(m) if i not in test_ids]
    return (
        windows_from_cycles(record, train_ids),
        windows_from_cycles(record, sorted(test_ids)),
    )


@dataclass
class FoldPlan:
    """Per-record assignment of cycles to folds; fold sizes differ by <= 1."""

    k: int
    seed: int
    assignment: dict = field(default_factory=dict)

    def cycles_in_fold(self, record_id, fold):
        a = self.assignment[record_id]
        return [i for i in range(len(a)) if a[i] == fold]

    def cycles_outside_fold(self, record_id, fold):
        a = self.assignment[record_id]
        return [i for i in range(len(a)) if a[i] != fold]


def make_fold_plan(records, k: int, seed: int) -> FoldPlan:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    plan = FoldPlan(k=k, seed=seed)
    rng = np.random.default_rng(seed)
    for rec in records:
        m = rec.n_cycles
        if m < k:
            raise ValueError(f"record {rec.record_id} has {m} cycles, needs >= k={k}")
        perm = rng.permutation(m)
        folds = np.empty(m, dtype=np.int64)
        for pos, cyc in enumerate(perm):
            folds[cyc] = pos % k
        plan.assignment[rec.record_id] = folds
    return plan


def _task_seed(base_seed, record_id, fold):
    return int(
        np.random.SeedSequence(
            [int(base_seed) & 0x7FFFFFFF, zlib.crc32(record_id.encode()), int(fold)]
        ).generate_state(1)[0]
    )


def _run_cv_task(args):
    record, fold, train_ids, test_ids, cfg, init = args
    from .learning import default_initial_graph, evaluate_graph, learn

    train_windows = windows_from_cycles(record, train_ids)
    test_windows = windows_from_cycles(record, test_ids)
    g0 = init if init is not None else default_initial_graph(train_windows)
    task_cfg = replace(cfg, seed=_task_seed(cfg.seed, record.record_id, fold))
    learned, _trace = learn(g0, train_windows, task_cfg)
    _err, rep = evaluate_graph(learned, test_windows, cfg)
    return RecordCounts(
        record_id=record.record_id,
        tp=rep.tp,
        fp=rep.fp,
        fn=rep.fn,
        fold=fold,
        infeasible_windows=sum(r.infeasible_windows for r in rep.records),
    )


def cross_validate(records, k=5, cfg=None, initial_graph=None, n_jobs=None) -> DetectionReport:
    """k-fold cross-validation: per record and fold, learn a graph on the
    other folds' cycles and score the held-out cycles.  The report carries
    per-(record, fold) counts, pooled metrics, and per-fold aggregates."""
    from .learning import LearnConfig

    if cfg is None:
        cfg = LearnConfig()
    records = list(records)
    plan = make_fold_plan(records, k, cfg.seed)
    tasks = []
    for rec in records:
        for fold in range(k):
            tasks.append(
                (
                    rec,
                    fold,
                    plan.cycles_outside_fold(rec.record_id, fold),
                    plan.cycles_in_fold(rec.record_id, fold),
                    cfg,
                    initial_graph,
                )
            )
    if n_jobs is None:
        n_jobs = min(len(tasks), os.cpu_count() or 1)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_run_cv_task, tasks))
    else:
        rows = [_run_cv_task(t) for t in tasks]
    rows.sort(key=lambda r: (r.record_id, r.fold))
    return DetectionReport(records=rows)
