"""Command-line entry points: dataset evaluation and the gateway server."""

from __future__ import annotations

import argparse
import sys
import time

from .config import GatewayConfig, load_config
from .errors import DatasetError
from .evaluation import (
    REVIEW_AS_BENIGN,
    REVIEW_AS_FLAGGED,
    build_report,
    emit_report,
    load_dataset,
    run_eval,
)
from .pipeline import Pipeline

EXIT_OK = 0
EXIT_DATASET_ERROR = 2


def _eval_pipeline(args: argparse.Namespace) -> Pipeline:
    cfg = load_config(args.config) if args.config else GatewayConfig()
    if args.l2 == "stub":
        cfg.embedding_provider = "stub"
        cfg.llm_enabled = False
    else:
        cfg.embedding_provider = "sentence-transformers"
        cfg.llm_enabled = True
    cfg.review_log_path = args.review_log
    return Pipeline.from_config(cfg)


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        records = load_dataset(args.dataset)
    except (DatasetError, OSError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET_ERROR
    pipeline = _eval_pipeline(args)
    policy = REVIEW_AS_FLAGGED if args.review_policy == "flagged" else REVIEW_AS_BENIGN
    started = time.time()
    result = run_eval(records, pipeline, policy)
    elapsed = time.time() - started
    report = build_report(result)
    emit_report(report, args.report, args.format, result)
    cm = result.matrix
    print(
        f"evaluated {cm.total} records in {elapsed:.2f}s: "
        f"tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn} reviews={result.review_count}"
    )
    print(f"report written to {args.report} ({args.format})")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    cfg = load_config(args.config) if args.config else GatewayConfig()
    if args.l2 == "live":
        cfg.embedding_provider = "sentence-transformers"
        cfg.llm_enabled = True
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.listen_host, port=cfg.listen_port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptgate")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="run the pipeline over a labeled dataset")
    p_eval.add_argument("--dataset", required=True, help="line-delimited JSON records")
    p_eval.add_argument("--report", required=True, help="output report path")
    p_eval.add_argument("--format", choices=("json", "markdown"), default="json")
    p_eval.add_argument(
        "--review-policy",
        choices=("flagged", "benign"),
        default="flagged",
        help="count REVIEW outcomes as flagged (default) or benign",
    )
    p_eval.add_argument("--l2", choices=("stub", "live"), default="stub")
    p_eval.add_argument("--config", default=None, help="gateway config JSON")
    p_eval.add_argument("--review-log", default="eval_review_queue.log")
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve", help="start the HTTP gateway")
    p_serve.add_argument("--config", default=None, help="gateway config JSON")
    p_serve.add_argument("--l2", choices=("stub", "live"), default="stub")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
