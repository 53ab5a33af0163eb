"""Command-line workflow: detect, learn, eval, cv.

Data goes to files under --out-dir; progress goes to standard error.  Every
command first writes a manifest.json snapshot sufficient to re-run it
bit-identically.  Exit codes: 0 success, 2 input error, 3 model
infeasibility, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

from . import __version__
from . import graph as gr
from .data import DataFormatError, load_record, load_signal_csv
from .evaluate import DetectionReport, cross_validate, windows_whole_record
from .learning import LearnConfig, default_initial_graph, evaluate_graph, learn
from .solver import InfeasibleModelError, extract_rpeaks, solve

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4


def _write_manifest(out_dir, command, args, outputs):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "tool": "graphseg",
        "version": __version__,
        "command": command,
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "outputs": sorted(outputs),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_graph(path):
    with open(path, "r", encoding="utf-8") as fh:
        return gr.parse(fh.read())


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_records(args):
    signals = args.signal or []
    annotations = args.annotations or []
    if len(signals) != len(annotations):
        raise ValueError(
            f"got {len(signals)} --signal but {len(annotations)} --annotations"
        )
    if not signals:
        raise ValueError("at least one --signal/--annotations pair is required")
    return [
        load_record(s, a, sample_rate=args.sample_rate)
        for s, a in zip(signals, annotations)
    ]


def _learn_config(args):
    return LearnConfig(
        max_iterations=args.max_iterations,
        tolerance_ms=args.tolerance_ms,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
    )


def _cmd_detect(args):
    out = [
        os.path.join(args.out_dir, "segmentation.json"),
        os.path.join(args.out_dir, "rpeaks.txt"),
    ]
    _write_manifest(args.out_dir, "detect", args, out)
    g = _load_graph(args.graph)
    signal = load_signal_csv(args.signal, args.sample_rate)
    seg = solve(signal, g, start_state=args.start_state)
    peaks = extract_rpeaks(seg, signal, g)
    doc = {
        "boundaries": seg.boundaries,
        "states": [g.name_of(s) for s in seg.states],
        "means": seg.means,
        "edges_taken": seg.edges_taken,
        "total_cost": seg.total_cost,
    }
    _write(out[0], json.dumps(doc, indent=2) + "\n")
    _write(out[1], "".join(f"{p}\n" for p in peaks))
    print(f"detected {len(peaks)} peak(s) over {len(signal)} samples", file=sys.stderr)
    return EXIT_OK


def _cmd_learn(args):
    records = _load_records(args)
    cfg = _learn_config(args)
    initial = _load_graph(args.initial_graph) if args.initial_graph else None
    record_windows = {
        r.record_id: windows_whole_record(r, args.cycles_per_window) for r in records
    }
    if args.pooled:
        jobs = [("pooled", [w for ws in record_windows.values() for w in ws])]
    else:
        jobs = [(r.record_id, record_windows[r.record_id]) for r in records]
    outputs = []
    for name, _ in jobs:
        for suffix in ("graph.json", "trace.jsonl", "progress.csv"):
            outputs.append(os.path.join(args.out_dir, f"{name}_{suffix}"))
    _write_manifest(args.out_dir, "learn", args, outputs)
    for name, windows in jobs:
        g0 = initial if initial is not None else default_initial_graph(windows)
        best, trace = learn(g0, windows, cfg)
        _write(os.path.join(args.out_dir, f"{name}_graph.json"), gr.serialize(best))
        _write(os.path.join(args.out_dir, f"{name}_trace.jsonl"), trace.to_jsonl())
        _write(os.path.join(args.out_dir, f"{name}_progress.csv"),
               trace.to_progress_csv())
        final = trace.steps[-1].train_error if trace.steps else trace.initial_train_error
        print(
            f"{name}: {len(trace)} accepted edit(s), "
            f"train FN+FP {trace.initial_train_error} -> {final}",
            file=sys.stderr,
        )
    return EXIT_OK


def _cmd_eval(args):
    out = [
        os.path.join(args.out_dir, "report.json"),
        os.path.join(args.out_dir, "report.txt"),
    ]
    _write_manifest(args.out_dir, "eval", args, out)
    records = _load_records(args)
    g = _load_graph(args.graph)
    cfg = LearnConfig(tolerance_ms=args.tolerance_ms, seed=args.seed)
    rows = []
    for r in records:
        windows = windows_whole_record(r, args.cycles_per_window)
        _err, rep = evaluate_graph(g, windows, cfg)
        rows.extend(rep.records)
    report = DetectionReport(records=rows)
    _write(out[0], json.dumps(report.to_json_dict(), indent=2) + "\n")
    _write(out[1], report.to_table())
    print(report.to_table(), end="", file=sys.stderr)
    return EXIT_OK


def _cmd_cv(args):
    out = [
        os.path.join(args.out_dir, "report.json"),
        os.path.join(args.out_dir, "report.txt"),
    ]
    _write_manifest(args.out_dir, "cv", args, out)
    records = _load_records(args)
    cfg = _learn_config(args)
    initial = _load_graph(args.initial_graph) if args.initial_graph else None
    report = cross_validate(records, k=args.k, cfg=cfg, initial_graph=initial,
                            n_jobs=args.jobs)
    _write(out[0], json.dumps(report.to_json_dict(), indent=2) + "\n")
    _write(out[1], report.to_table())
    print(report.to_table(), end="", file=sys.stderr)
    return EXIT_OK


def _add_record_flags(p):
    p.add_argument("--signal", action="append", required=True,
                   help="sample CSV (repeatable)")
    p.add_argument("--annotations", action="append", required=True,
                   help="annotation file paired with --signal (repeatable)")
    p.add_argument("--sample-rate", type=float, default=360.0)


def _add_learn_flags(p):
    p.add_argument("--max-iterations", type=int, default=20)
    p.add_argument("--tolerance-ms", type=float, default=100.0)
    p.add_argument("--validation-fraction", type=float, default=0.25)
    p.add_argument("--cycles-per-window", type=int, default=4)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graphseg",
        description="Graph-constrained changepoint detection for R-peak labeling",
    )
    parser.add_argument("--version", action="version",
                        version=f"graphseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="segment one signal with a fixed graph")
    p.add_argument("--signal", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sample-rate", type=float, default=360.0)
    p.add_argument("--start-state", default="free")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("learn", help="learn a graph from labeled records")
    _add_record_flags(p)
    p.add_argument("--initial-graph", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pooled", action="store_true",
                   help="train one graph over all records instead of per record")
    _add_learn_flags(p)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("eval", help="score a fixed graph on labeled records")
    _add_record_flags(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance-ms", type=float, default=100.0)
    p.add_argument("--cycles-per-window", type=int, default=4)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross-validation with learning")
    _add_record_flags(p)
    p.add_argument("--initial-graph", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None)
    _add_learn_flags(p)
    p.set_defaults(func=_cmd_cv)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (gr.GraphParseError, gr.GraphValidationError, DataFormatError,
            FileNotFoundError, ValueError) as exc:
        print(f"graphseg: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleModelError as exc:
        print(f"graphseg: infeasible model: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception:
        print("graphseg: internal error", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
