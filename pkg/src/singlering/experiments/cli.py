"""Command line entry point.

Every subcommand reads a scenario JSON file (``--config``), writes its outputs
to ``--out`` and exits 0 when all declared thresholds pass, 2 when a metric
misses its threshold and 1 on any error.
"""

import argparse
import logging
import os
import sys

from ..errors import ConvergenceError, DomainError, QuadratureError
from ..randmat import write_eigenvalues_csv, write_svals_csv
from .config import ScenarioConfig
from .io import atomic_open, write_json
from . import runners

log = logging.getLogger("singlering")

#: subcommand -> (scenario kinds it accepts, runner)
COMMANDS = {
    "convolve": (("convolve",), runners.run_convolve),
    "brown": (None, runners.run_brown),
    "simulate": (None, runners.run_simulate),
    "compare": (("single_ring", "deformed_hermitian", "deformed_unitary"), runners.run_single_ring),
    "jordan": (("jordan",), runners.run_jordan),
    "local-law": (("local_law",), runners.run_local_law),
    "local-window": (("local_window",), runners.run_local_window),
    "lsv": (("lsv_tail",), runners.run_lsv),
    "audit": (("assumption_audit",), runners.run_assumption_audit),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="singlering", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="scenario JSON file")
        sp.add_argument("--seed", type=int, default=None, help="override the ensemble seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def _write_outputs(out, report, data):
    os.makedirs(out, exist_ok=True)
    if isinstance(data, dict):
        fld = data.get("field")
        if fld is not None:
            with atomic_open(os.path.join(out, "field.csv")) as fh:
                fld.to_csv(fh)
            report.metrics.setdefault("field_header", fld.header())
        if data.get("eigenvalues"):
            with atomic_open(os.path.join(out, "eigenvalues.csv")) as fh:
                write_eigenvalues_csv(fh, data["eigenvalues"])
        if data.get("svals"):
            with atomic_open(os.path.join(out, "svals.csv")) as fh:
                write_svals_csv(fh, data["svals"])
    elif hasattr(data, "to_csv"):
        with atomic_open(os.path.join(out, "field.csv")) as fh:
            data.to_csv(fh)
        report.metrics["field_header"] = data.header()
    write_json(os.path.join(out, "report.json"), report.to_dict())


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    kinds, runner = COMMANDS[args.command]
    try:
        cfg = ScenarioConfig.load(args.config, seed=args.seed, out=args.out)
        if kinds is not None and cfg.kind not in kinds:
            raise DomainError(f"'{args.command}' cannot run a scenario of kind {cfg.kind!r}")
        report, data = runner(cfg, threads=max(1, args.threads))
        out = cfg.out or "out"
        _write_outputs(out, report, data)
    except (DomainError, ConvergenceError, QuadratureError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is still an error, not a threshold failure
        log.exception("unexpected failure")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name, ok in report.passed.items():
        log.info("%s %s", "PASS" if ok else "FAIL", name)
    if not report.ok:
        failed = [k for k, v in report.passed.items() if not v]
        print(f"threshold failure: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
