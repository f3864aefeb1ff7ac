"""Command-line front end: mine, generate, diff."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import export
from .errors import MsgflowError
from .mining import (
    DEFAULT_ACCURACY,
    DEFAULT_MAX_LEN,
    DEFAULT_MAX_PATHS,
    DEFAULT_THETA,
    DEFAULT_W_ESSENTIAL,
    mine,
)
from .model import load_dictionary, load_traces
from .synth import (
    PRESETS,
    GenerationConfig,
    generate,
    load_fixture,
    load_flow_specs,
    preset_config,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BELOW_TARGET = 2

log = logging.getLogger("msgflow")


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for "below target"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def _drop_rule(text: str) -> tuple[int, float]:
    mid, sep, prob = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("expected ID:PROB")
    try:
        return int(mid), _unit_interval(prob)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad drop rule {text!r}") from None


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="msgflow", description="Mine message flow models from interleaved traces.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    m = sub.add_parser("mine", help="mine a flow model from trace files")
    m.add_argument("--defs", required=True, help="message definition file")
    m.add_argument("--traces", required=True, nargs="+", help="trace files, one trace per line")
    m.add_argument("--accuracy", type=_unit_interval, default=DEFAULT_ACCURACY)
    m.add_argument("--theta", type=_unit_interval, default=DEFAULT_THETA)
    m.add_argument("--max-len", type=_positive_int, default=DEFAULT_MAX_LEN)
    m.add_argument("--max-paths", type=_positive_int, default=DEFAULT_MAX_PATHS)
    m.add_argument("--w-essential", type=float, default=DEFAULT_W_ESSENTIAL)
    m.add_argument("--emf", type=_on_off, default=True, metavar="on|off")
    m.add_argument("--jobs", type=_positive_int, default=1)
    m.add_argument("--seed", type=int, default=0, help="accepted for symmetry; mining is deterministic")
    m.add_argument("--out", default=".", help="output directory")
    m.add_argument("--dot", action="store_true", help="write one DOT file per mined flow")
    m.add_argument("--json-report", action="store_true", help="also write report.json")
    m.add_argument("--timing", action="store_true", help="record wall-clock runtime in report files")
    m.set_defaults(func=cmd_mine)

    g = sub.add_parser("generate", help="generate synthetic traces")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--flows", help="flow specification file")
    g.add_argument("--instances", type=_positive_int, default=1, help="executions per flow (with --flows)")
    g.add_argument("--traces-per-set", type=_positive_int, default=1, dest="n_traces",
                   help="number of traces (with --flows)")
    g.add_argument("--max-concurrent", type=_positive_int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--drop", type=_drop_rule, default=None, metavar="ID:PROB")
    g.add_argument("--out", default=".", help="output directory")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("diff", help="compare two model files")
    d.add_argument("model_a")
    d.add_argument("model_b")
    d.set_defaults(func=cmd_diff)
    return parser


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_mine(args) -> int:
    dictionary = load_dictionary(args.defs)
    traces = load_traces(args.traces, dictionary)
    result = mine(
        traces,
        dictionary,
        args.accuracy,
        args.theta,
        args.max_len,
        max_paths=args.max_paths,
        w_essential=args.w_essential,
        emf=args.emf,
        jobs=args.jobs,
    )
    os.makedirs(args.out, exist_ok=True)
    report = export.RunReport.from_result(result, args.accuracy)
    _write(
        os.path.join(args.out, "model.yaml"),
        export.dump_model(result.model, dictionary, result.evaluation.acceptance_ratio),
    )
    _write(os.path.join(args.out, "report.txt"), report.to_text(timing=args.timing))
    if args.json_report:
        _write(os.path.join(args.out, "report.json"), report.to_json(timing=args.timing))
    if args.dot:
        for root, text in export.flows_to_dot(result.model, dictionary).items():
            _write(os.path.join(args.out, f"flow_{root}.dot"), text)
    sys.stdout.write(report.to_text(timing=True))
    if not result.reached:
        print(f"warning: best model reaches AR {report.acceptance_ratio:.4f} < {args.accuracy}", file=sys.stderr)
        return EXIT_BELOW_TARGET
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.preset:
        config = preset_config(args.preset, seed=args.seed, drop_rule=args.drop)
        dictionary = load_fixture().select(PRESETS[args.preset].flows).dictionary
        if args.max_concurrent is not None:
            config = GenerationConfig(
                config.flows, config.instances_per_flow, config.interleave_seed,
                args.max_concurrent, config.drop_rule, config.n_traces,
            )
    else:
        library = load_flow_specs(args.flows)
        dictionary = library.dictionary
        config = GenerationConfig(
            library.flows,
            instances_per_flow=args.instances,
            interleave_seed=args.seed,
            max_concurrent=args.max_concurrent or 4,
            drop_rule=args.drop,
            n_traces=args.n_traces,
        )
    traces, truth = generate(config)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "traces.txt"), traces.serialize())
    _write(os.path.join(args.out, "defs.txt"), dictionary.serialize())
    _write(os.path.join(args.out, "ground_truth.yaml"), export.dump_model(truth, dictionary))
    print(f"{len(traces)} traces, {traces.total_messages} messages, {truth.size} ground-truth paths")
    return EXIT_OK


def cmd_diff(args) -> int:
    a, ar_a = export.read_model(args.model_a)
    b, ar_b = export.read_model(args.model_b)
    sys.stdout.write(export.diff_models(a, b, ar_a, ar_b).to_text())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, bad flags exit EXIT_ERROR
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MsgflowError, OSError, ValueError, KeyError) as exc:
        print(f"msgflow: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
