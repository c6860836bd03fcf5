"""Command-line entry point: single runs, scheme comparisons, and the
built-in reproduction suites."""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from .config import (
    ExperimentConfig,
    GEOMETRY_PRESETS,
    geometry_from_dict,
    load_config_file,
)
from .engine import run
from .errors import ConfigError, SimError
from .flash import TimingConfig
from .metrics import (
    SummaryRow,
    bandwidth_series,
    events_csv_lines,
    normalize,
    summary_kv_lines,
    write_amplification,
)
from .policy import SchemeKind
from .suites import SUITES


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--trace", help="MSR-format trace file (.csv or .gz)")
    parser.add_argument("--disk", type=int, help="replay only this disk number")
    parser.add_argument("--gen", help="seq:<total>:<io>[:<gap_ms>] or "
                                      "periodic:<n>:<bytes>:<gap_ms>[:<io>]")
    parser.add_argument("--mode", choices=("bursty", "daily"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--window-ms", type=float, dest="window_ms")
    parser.add_argument("--idle-threshold-ms", type=float, dest="idle_threshold_ms")
    parser.add_argument("--geometry", choices=sorted(GEOMETRY_PRESETS),
                        help="geometry preset (default desk)")
    parser.add_argument("--tlc-per-page", action="store_true", default=None,
                        help="charge each TLC page its own program instead of "
                             "one-shot amortization")
    parser.add_argument("--slc-quota-pages", type=int, dest="slc_quota_pages")
    parser.add_argument("--trad-quota-pages", type=int, dest="trad_quota_pages")
    parser.add_argument("--gc-watermark", type=float, dest="gc_low_watermark")
    for name in ("slc-read", "tlc-read", "slc-program", "tlc-program",
                 "reprogram", "erase"):
        parser.add_argument(f"--{name}-ms", type=float,
                            dest=name.replace("-", "_") + "_ms")


def _config_from_args(args, scheme: Optional[str] = None) -> ExperimentConfig:
    cfg = load_config_file(args.config) if args.config else ExperimentConfig()
    if args.geometry:
        cfg.geometry = GEOMETRY_PRESETS[args.geometry]
    if scheme is not None:
        cfg.scheme_kind = SchemeKind(scheme)
    if args.trace is not None:
        cfg.trace_path = args.trace
        cfg.gen_spec = None
    if args.disk is not None:
        cfg.trace_disk = args.disk
    if args.gen is not None:
        cfg.gen_spec = args.gen
        cfg.trace_path = None
    for key in ("mode", "seed", "window_ms", "idle_threshold_ms",
                "slc_quota_pages", "trad_quota_pages", "gc_low_watermark"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.tlc_per_page is not None:
        cfg.tlc_per_page = args.tlc_per_page
    timing_overrides = {}
    for field in ("slc_read", "tlc_read", "slc_program", "tlc_program",
                  "reprogram", "erase"):
        value = getattr(args, field + "_ms", None)
        if value is not None:
            timing_overrides[field] = value
    if timing_overrides:
        base = {k: getattr(cfg.timing, k) for k in
                ("slc_read", "tlc_read", "slc_program", "tlc_program",
                 "reprogram", "erase", "channel_transfer_per_page")}
        base.update(timing_overrides)
        cfg.timing = TimingConfig(**base)
    return cfg


def _execute(cfg: ExperimentConfig):
    cfg.validate()
    trace = cfg.build_trace()
    report = run(cfg.geometry, cfg.timing, cfg.scheme(), trace, cfg.seed,
                 **cfg.run_kwargs())
    report.config.update(cfg.snapshot())
    return report


def _write_lines(path: str, lines):
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")


def _emit_artifacts(cfg: ExperimentConfig, report, suffix: str = ""):
    os.makedirs(cfg.out_dir, exist_ok=True)
    tag = f"-{suffix}" if suffix else ""
    _write_lines(os.path.join(cfg.out_dir, f"summary{tag}.kv"),
                 summary_kv_lines(report))
    _write_lines(os.path.join(cfg.out_dir, f"events{tag}.csv"),
                 events_csv_lines(report))
    bw = bandwidth_series(report, cfg.window_ms)
    _write_lines(os.path.join(cfg.out_dir, f"bandwidth{tag}.csv"),
                 ["time_ms,mb_per_s"] + [f"{t},{v}" for t, v in bw])


def cmd_run(args) -> int:
    cfg = _config_from_args(args, args.scheme)
    report = _execute(cfg)
    _emit_artifacts(cfg, report)
    wa = write_amplification(report)
    print(f"scheme={report.scheme} host_page_writes={report.host_page_writes} "
          f"wa={'n/a' if wa is None else f'{wa:.4f}'} "
          f"device_full={report.device_full} out={cfg.out_dir}")
    return 1 if report.device_full else 0


def cmd_compare(args) -> int:
    schemes: List[str] = args.schemes
    if len(set(schemes)) != len(schemes):
        raise ConfigError("duplicate schemes in compare")
    baseline = args.baseline
    if baseline not in schemes:
        schemes = [baseline] + schemes
    rows = []
    shared_seed = None
    cfg = None
    for scheme in schemes:
        cfg = _config_from_args(args, scheme)
        if shared_seed is None:
            shared_seed = cfg.seed
        elif cfg.seed != shared_seed:
            raise ConfigError("compare requires a single shared seed")
        report = _execute(cfg)
        _emit_artifacts(cfg, report, suffix=scheme)
        rows.append(SummaryRow.from_report(report))
    table = normalize(rows, baseline)
    lines = ["scheme,norm_latency,norm_p99,norm_wa"]
    for row in rows:
        n = table[row.scheme]
        lines.append(f"{row.scheme},{n['latency']:.6g},{n['p99']:.6g},{n['wa']:.6g}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_lines(os.path.join(cfg.out_dir, "compare.csv"), lines)
    for line in lines:
        print(line)
    return 0


def cmd_reproduce(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    for name in names:
        print(f"== suite {name} ==")
        for check, passed, detail in SUITES[name]():
            status = "PASS" if passed else "FAIL"
            print(f"[{status}] {check}" + (f"  ({detail})" if detail else ""))
            failed += 0 if passed else 1
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slcsim",
        description="Trace-driven simulator of hybrid SLC/TLC SSD cache schemes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single simulation run")
    p_run.add_argument("--scheme", default="baseline",
                       choices=[k.value for k in SchemeKind])
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="normalized scheme comparison")
    p_cmp.add_argument("--schemes", nargs="+", required=True,
                       choices=[k.value for k in SchemeKind])
    p_cmp.add_argument("--baseline", default="baseline")
    _add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_rep = sub.add_parser("reproduce", help="built-in acceptance suites")
    p_rep.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
