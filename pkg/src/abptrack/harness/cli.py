"""Command-line entry point.

Exit codes: 0 success, 2 bad usage or configuration, 3 failure while running.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from ..calibration import METHODS, calibrate_distributed, calibrate_single, save_k_csv
from ..arrays import ImpairmentModel
from ..tracking.campaign import ConfigError, run_campaign, trace_csv
from ..tracking.protocols import PROTOCOLS
from .config import SimulationConfig, load_config
from .metrics import SUMMARY_FIELDS, cdf_csv, summarize
from .rng import CALIBRATION, IMPAIRMENT, RngStreams

OUT_DIR_ENV = "ABPTRACK_OUT_DIR"
DEFAULT_OUT_DIR = "abptrack-out"

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("abptrack")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file (default: the shipped default profile)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="abptrack", description="Auxiliary-beam-pair tracking simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sim = sub.add_parser("simulate", parents=[common], help="run one tracking campaign")
    sim.add_argument("--protocol", choices=PROTOCOLS)
    cal = sub.add_parser("calibrate", parents=[common], help="estimate and store the calibration matrix")
    cal.add_argument("--method", choices=METHODS)
    sw = sub.add_parser("sweep", parents=[common], help="campaigns over DTC periods and protocols")
    sw.add_argument("--jobs", type=int, help="parallel worker processes")
    return p


def _out_dir(args, cfg: SimulationConfig) -> Path:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or cfg.out_dir or DEFAULT_OUT_DIR
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _summary_csv(rows: list[tuple[str, int, int, dict]]) -> str:
    lines = ["protocol,t_d,seed," + ",".join(SUMMARY_FIELDS)]
    for proto, t_d, seed, s in rows:
        vals = [f"{s[k]:.9g}" if isinstance(s[k], float) else str(s[k]) for k in SUMMARY_FIELDS]
        lines.append(f"{proto},{t_d},{seed}," + ",".join(vals))
    return "\n".join(lines) + "\n"


def _run_cell(campaign):
    result = run_campaign(campaign)
    stats = summarize(result.records, campaign.snr_linear, campaign.delta_az, len(result.dtc_slots))
    return trace_csv(result.records), stats, result.column("bf_gain")


def cmd_simulate(args, cfg: SimulationConfig, out: Path) -> None:
    campaign = cfg.campaign if args.protocol is None else replace(cfg.campaign, protocol=args.protocol)
    text, stats, gains = _run_cell(campaign)
    stem = f"trace_{campaign.protocol}_seed{campaign.seed}"
    (out / f"{stem}.csv").write_text(text)
    (out / f"cdf_bf_gain_{campaign.protocol}_seed{campaign.seed}.csv").write_text(cdf_csv(gains))
    (out / "summary.csv").write_text(_summary_csv([(campaign.protocol, campaign.t_d, campaign.seed, stats)]))
    log.info("wrote %s", out / f"{stem}.csv")


def cmd_sweep(args, cfg: SimulationConfig, out: Path) -> None:
    protocols = cfg.sweep_protocols or (cfg.campaign.protocol,)
    cells = [replace(cfg.campaign, protocol=p, t_d=t_d) for p in protocols for t_d in cfg.sweep_t_d]
    jobs = args.jobs or cfg.jobs
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    rows = []
    for c, (text, stats, _) in zip(cells, results):
        (out / f"trace_{c.protocol}_td{c.t_d}_seed{c.seed}.csv").write_text(text)
        rows.append((c.protocol, c.t_d, c.seed, stats))
    (out / "summary.csv").write_text(_summary_csv(rows))
    log.info("wrote %d traces to %s", len(cells), out)


def cmd_calibrate(args, cfg: SimulationConfig, out: Path) -> None:
    c = cfg.campaign
    method = args.method or (c.calibration if c.calibration in METHODS else METHODS[0])
    streams = RngStreams(c.seed)
    imp = ImpairmentModel.draw(c.tx, c.impairment_var_phase, c.impairment_var_amp, streams[IMPAIRMENT])
    if method == METHODS[0]:
        result = calibrate_single(imp, c.tx, c.calibration_snr_db, streams[CALIBRATION])
    else:
        result = calibrate_distributed(imp, c.tx, c.n_rf, c.tx.n_tot // c.n_rf, c.calibration_snr_db,
                                       streams[CALIBRATION])
    save_k_csv(out / f"calibration_{method}_seed{c.seed}.csv", result, c.tx, c.seed)


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "calibrate": cmd_calibrate}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"abptrack: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = _out_dir(args, cfg)
    except ConfigError as exc:
        print(f"abptrack: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"abptrack: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"abptrack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
