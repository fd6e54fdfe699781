"""Command line front end.

Every subcommand funnels through the runners in ``analysis``, the same
engine the HTTP service uses, and JSON files are written with
``canonical_json``. Running a command twice on the same inputs, or
fetching the matching endpoint, yields byte-identical documents.

Exit codes: 0 on success, 2 for anything wrong with the inputs (bad
files, bad values, unknown flags), 1 for internal failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from priorpool import analysis
from priorpool.errors import PriorPoolError, ValidationError
from priorpool.fitting import ElicitedJudgment
from priorpool.store import load_seed_csv
from priorpool.trial import TrialParameters


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load_seeds(path):
    return load_seed_csv(path).questions


def _parse_alpha(text: str):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(
            f"alpha must be a number or 'auto', got {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    return value


def cmd_fit(args) -> int:
    doc = _read_json(args.judgment)
    try:
        judgment = ElicitedJudgment.from_dict(doc)
    except (KeyError, TypeError) as err:
        raise ValidationError(f"bad judgment file: missing {err}") from err
    if args.family == "auto":
        families = "auto"
    else:
        families = [f.strip() for f in args.family.split(",") if f.strip()]
    out = analysis.run_fit(judgment, families, eps_bound=args.eps_bound)
    _emit(analysis.canonical_json(out), args.out)
    return 0


def cmd_pool(args) -> int:
    body = _read_json(args.input)
    if not isinstance(body, dict) or "distributions" not in body:
        raise ValidationError("pool input needs a 'distributions' list")
    method = args.method or body.get("method", "linear")
    out = analysis.run_pool(body["distributions"], body.get("weights"),
                            method)
    _emit(analysis.canonical_json(out), args.out)
    return 0


def cmd_cm_weights(args) -> int:
    seeds = _load_seeds(args.seeds)
    alpha = _parse_alpha(args.alpha)
    if alpha == "auto":
        out = analysis.run_optimized_weights(seeds)
    else:
        out = analysis.run_cm_weights(seeds, alpha)
    _emit(analysis.canonical_json(out), args.out)
    return 0


def cmd_crossval(args) -> int:
    seeds = _load_seeds(args.seeds)
    alpha = _parse_alpha(args.alpha)
    if alpha == "auto":
        alpha = analysis.run_optimized_weights(seeds)["alpha"]
    out = analysis.run_crossval(seeds, alpha)
    _emit(analysis.canonical_json(out), args.out)
    return 0


def cmd_score(args) -> int:
    folds = _read_json(args.folds)
    seeds = _load_seeds(args.truths)
    table = analysis.run_scores(folds, seeds)
    if args.json:
        _emit(analysis.canonical_json(table.to_dict()), args.json)
    if args.out:
        _emit(table.to_csv(), args.out)
    elif not args.json:
        _emit(table.to_text(), None)
    return 0


def cmd_correlations(args) -> int:
    seeds = _load_seeds(args.seeds)
    corr = analysis.run_correlations(seeds)
    if args.json:
        _emit(analysis.canonical_json(corr.to_dict()), args.json)
    if args.out:
        _emit(corr.to_csv(), args.out)
    elif not args.json:
        _emit(corr.to_text(), None)
    return 0


def cmd_checks(args) -> int:
    doc = _read_json(args.params)
    try:
        params = TrialParameters.from_dict(doc)
    except (KeyError, TypeError) as err:
        raise ValidationError(f"bad parameter file: missing {err}") from err
    out = analysis.run_checks(params, total=args.total, n_draws=args.draws,
                              level=args.level, seed=args.seed)
    _emit(analysis.canonical_json(out), args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from priorpool.service import create_app

    app = create_app(data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorpool",
        description="Elicitation fitting, pooling, weighting, and checks.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    p = sub.add_parser("fit", help="fit distribution families to a judgment")
    p.add_argument("--judgment", required=True,
                   help="JSON file holding one five-point judgment")
    p.add_argument("--family", default="auto",
                   help="comma-separated families, or 'auto' (default)")
    p.add_argument("--eps-bound", type=float, default=0.01,
                   help="probability pinned to the min and max (default 0.01)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("pool", help="pool distributions")
    p.add_argument("--input", required=True,
                   help="JSON file: {distributions, weights?, method?}")
    p.add_argument("--method", choices=analysis.POOL_METHODS,
                   help="override the method named in the input file")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(handler=cmd_pool)

    p = sub.add_parser("cm-weights",
                       help="performance-based weights from seed questions")
    p.add_argument("--seeds", required=True, help="seed CSV with truths")
    p.add_argument("--alpha", default="0.05",
                   help="calibration cutoff, or 'auto' to optimize it")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(handler=cmd_cm_weights)

    p = sub.add_parser("crossval",
                       help="leave-one-out folds over the seed questions")
    p.add_argument("--seeds", required=True, help="seed CSV with truths")
    p.add_argument("--alpha", default="0.05",
                   help="calibration cutoff, or 'auto' to optimize it")
    p.add_argument("--out", help="write the folds JSON here")
    p.set_defaults(handler=cmd_crossval)

    p = sub.add_parser("score",
                       help="score folds against the seed truths")
    p.add_argument("--folds", required=True, help="folds JSON from crossval")
    p.add_argument("--truths", required=True, help="seed CSV with truths")
    p.add_argument("--out", help="write the score table CSV here")
    p.add_argument("--json", help="also write the table as JSON here")
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("correlations",
                       help="correlations between experts' median errors")
    p.add_argument("--seeds", required=True, help="seed CSV with truths")
    p.add_argument("--out", help="write the correlation CSV here")
    p.add_argument("--json", help="also write the matrix as JSON here")
    p.set_defaults(handler=cmd_correlations)

    p = sub.add_parser("checks", help="run the trial sanity checks")
    p.add_argument("--params", required=True,
                   help="JSON file with the five model parameters")
    p.add_argument("--total", type=int, default=100,
                   help="patients in the example cohort (default 100)")
    p.add_argument("--draws", type=int, default=10000,
                   help="Monte Carlo draws (default 10000)")
    p.add_argument("--level", type=float, default=0.9,
                   help="central interval level (default 0.9)")
    p.add_argument("--seed", type=int, default=0,
                   help="random seed (default 0)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(handler=cmd_checks)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("PORT", "8080")))
    p.add_argument("--data-dir",
                   default=os.environ.get("DATA_DIR", "./data"))
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except PriorPoolError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as err:
        print(f"error: invalid JSON: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - last-resort boundary
        print(f"internal error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
