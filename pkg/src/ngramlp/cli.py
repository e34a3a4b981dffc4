"""Command-line front end.

Machine-readable JSON goes to stdout; the resolved configuration and any
human-readable tables go to stderr.  Exit status is 0 on success, 1 on a
computational failure (solver, weak model, failing fold) and 2 on usage or
I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ngramlp.corpus import read_corpus
from ngramlp.errors import (
    ExperimentError,
    IngestionError,
    NgramLPError,
    SolverError,
    TrainingError,
    UsageError,
    WeakModelError,
)
from ngramlp.experiment import (
    METHODS,
    ExperimentConfig,
    corpus_to_text,
    emit_report,
    generate_synthetic_corpus,
    run_experiment,
)
from ngramlp.grid import GridConfig, grid_search, random_search
from ngramlp.mixture import WeightVector, perplexity, two_param_weights
from ngramlp.ngram import load_model, probability_matrix, save_model, train
from ngramlp.optimize import approximation_surface, optimize_exact, optimize_lp, surface_to_csv

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

OPTIMIZE_DEFAULTS = {"step": 0.1, "samples": 1000, "seed": 0, "tol": 1e-8, "epsilon": None}
# flags that only make sense for some --method values
OPTIMIZE_FLAG_METHODS = {
    "step": {"grid"},
    "samples": {"random"},
    "seed": {"random"},
    "tol": {"exact"},
    "epsilon": {"lp", "lp-full"},
}


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _echo_config(name: str, cfg: dict) -> None:
    print(json.dumps({"command": name, "config": cfg}, sort_keys=True, default=str), file=sys.stderr)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _read_corpus(path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"cannot read corpus file {p}")
    return read_corpus(p)


def _load_model(path):
    p = Path(path)
    if not (p / "header.json").is_file():
        raise FileNotFoundError(f"no model found at {p} (missing header.json)")
    return load_model(p)


def cmd_train(args) -> int:
    thresholds = args.thresholds or [1] * args.order
    _echo_config("train", {"corpus": args.corpus, "out": args.out, "order": args.order,
                           "thresholds": thresholds})
    corpus = _read_corpus(args.corpus)
    model = train(corpus, args.order, thresholds)
    save_model(model, args.out)
    print("order\tthreshold\tsize", file=sys.stderr)
    for j, (t, size) in enumerate(zip(model.thresholds, model.sizes()), start=1):
        print(f"{j}-gram\t{t}\t{size}", file=sys.stderr)
    _emit({"model": str(args.out), "sentences": len(corpus), "vocabulary": len(model.vocabulary),
           "sizes": {f"{j}-gram": s for j, s in enumerate(model.sizes(), start=1)}})
    return EXIT_OK


def cmd_optimize(args) -> int:
    for flag, methods in OPTIMIZE_FLAG_METHODS.items():
        if getattr(args, flag) is not None and args.method not in methods:
            raise UsageError(f"--{flag} conflicts with --method {args.method} "
                             f"(only valid with --method {'/'.join(sorted(methods))})")
    opts = {k: (getattr(args, k) if getattr(args, k) is not None else v) for k, v in OPTIMIZE_DEFAULTS.items()}
    _echo_config("optimize", {"model": args.model, "corpus": args.corpus, "method": args.method, **opts})
    model = _load_model(args.model)
    matrix = probability_matrix(model, _read_corpus(args.corpus))
    if matrix.n_rows == 0:
        raise UsageError("evaluation corpus has no scored tokens")
    out = {"method": args.method, "n_tokens": matrix.n_rows}
    if args.method == "grid":
        res = grid_search(matrix, GridConfig(opts["step"], matrix.n_orders))
        out.update(weights=list(res.weights.lambdas), perplexity=_num(res.perplexity.value),
                   stats={"points_evaluated": res.points_evaluated, "step": opts["step"]})
    elif args.method == "random":
        res = random_search(matrix, opts["samples"], opts["seed"])
        out.update(weights=list(res.weights.lambdas), perplexity=_num(res.perplexity.value),
                   stats={"points_evaluated": res.points_evaluated, "seed": opts["seed"]})
    else:
        if args.method == "exact":
            res = optimize_exact(matrix, tol=opts["tol"])
        else:
            res = optimize_lp(matrix, "full" if args.method == "lp-full" else "reduced", opts["epsilon"])
        out.update(weights=list(res.weights.lambdas), surrogate_objective=res.surrogate_objective,
                   perplexity=_num(res.true_perplexity.value), stats=res.solver_stats)
    _emit(out)
    return EXIT_OK


def _num(x: float):
    return x if x != float("inf") else "inf"


def cmd_evaluate(args) -> int:
    if args.weights is not None and (args.lam is not None or args.mu is not None):
        raise UsageError("--weights conflicts with --lambda/--mu; give one or the other")
    if args.weights is None and (args.lam is None or args.mu is None):
        raise UsageError("give --weights, or both --lambda and --mu")
    _echo_config("evaluate", {"model": args.model, "corpus": args.corpus, "weights": args.weights,
                              "lambda": args.lam, "mu": args.mu})
    w = WeightVector(tuple(args.weights)) if args.weights is not None else two_param_weights(args.lam, args.mu)
    model = _load_model(args.model)
    matrix = probability_matrix(model, _read_corpus(args.corpus))
    if matrix.n_rows == 0:
        raise UsageError("evaluation corpus has no scored tokens")
    ppl = perplexity(matrix, w)
    _emit({"weights": list(w.lambdas), "perplexity": _num(ppl.value),
           "log2_per_token": _num(ppl.log2_per_token), "n_tokens": ppl.n_tokens})
    return EXIT_OK


_EXPERIMENT_FLAGS = {
    "order": "max_order", "thresholds": "thresholds", "k": "k", "seed": "seed", "grid_steps": "grid_steps",
    "methods": "methods", "epsilon": "epsilon", "train_frac": "train_frac", "samples": "random_samples",
    "tol": "exact_tol",
}


def resolve_experiment_config(args) -> ExperimentConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    values = {}
    if args.config:
        p = Path(args.config)
        if not p.is_file():
            raise FileNotFoundError(f"cannot read config file {p}")
        try:
            values.update(json.loads(p.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {p} is not valid JSON: {exc}") from None
    for flag, key in _EXPERIMENT_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    if "max_order" in values and "thresholds" not in values:
        values["thresholds"] = [1] * int(values["max_order"])
    return ExperimentConfig.from_dict(values)


def cmd_experiment(args) -> int:
    cfg = resolve_experiment_config(args)
    _echo_config("experiment", {"corpus": args.corpus, "out": args.out, "threads": args.threads,
                                **cfg.to_dict()})
    corpus = _read_corpus(args.corpus)
    report = run_experiment(corpus, cfg, workers=args.threads)
    paths = emit_report(report, args.out)
    print(f"{'method':<12} {'EV':>12} {'SD':>12} {'inf':>4}", file=sys.stderr)
    for label in report.method_labels():
        a = report.aggregates[label]
        print(f"{label:<12} {a['ev']:>12.4f} {a['sd']:>12.4f} {a['n_infinite']:>4d}", file=sys.stderr)
    _emit({"files": [str(p) for p in paths],
           "summary": report.to_dict()["aggregates"]})
    return EXIT_OK


def cmd_synth(args) -> int:
    _echo_config("synth", {"vocab": args.vocab, "weights": args.weights, "sentences": args.sentences,
                           "seed": args.seed, "mean_length": args.mean_length, "out": args.out})
    corpus = generate_synthetic_corpus(args.vocab, args.weights, args.sentences, args.seed, args.mean_length)
    text = corpus_to_text(corpus)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _emit({"out": str(args.out), "sentences": len(corpus), "tokens": corpus.n_words})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_surface(args) -> int:
    _echo_config("surface", {"n": args.n, "step": args.step, "out": args.out})
    table = approximation_surface(args.n, args.step)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            surface_to_csv(table, fh)
        _emit({"out": str(args.out), "points": int(table.shape[0])})
    else:
        surface_to_csv(table, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ngramlp", description=__doc__.splitlines()[0],
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    t = sub.add_parser("train", help="count n-grams and save a model directory", formatter_class=fmt)
    t.add_argument("--corpus", required=True, help="UTF-8 text, one sentence per line")
    t.add_argument("--out", required=True, help="model directory to write")
    t.add_argument("--order", type=int, default=3, help="maximum n-gram order")
    t.add_argument("--thresholds", type=_ints, default=None,
                   help="per-order minimum counts, e.g. 19,29,39 (default: 1 for every order)")
    t.set_defaults(func=cmd_train)

    o = sub.add_parser("optimize", help="choose interpolation weights on an evaluation corpus",
                       formatter_class=fmt)
    o.add_argument("--model", required=True)
    o.add_argument("--corpus", required=True)
    o.add_argument("--method", choices=["lp", "lp-full", "grid", "random", "exact"], default="lp")
    o.add_argument("--step", type=float, default=None, help=f"grid step (default {OPTIMIZE_DEFAULTS['step']})")
    o.add_argument("--samples", type=int, default=None,
                   help=f"random-search draws (default {OPTIMIZE_DEFAULTS['samples']})")
    o.add_argument("--seed", type=int, default=None, help="random-search seed (default 0)")
    o.add_argument("--tol", type=float, default=None,
                   help=f"Frank-Wolfe gap tolerance for --method exact (default {OPTIMIZE_DEFAULTS['tol']})")
    o.add_argument("--epsilon", type=_floats, default=None,
                   help="per-weight lower bounds for the LP methods (default none)")
    o.set_defaults(func=cmd_optimize)

    e = sub.add_parser("evaluate", help="perplexity of fixed weights on a corpus", formatter_class=fmt)
    e.add_argument("--model", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--weights", type=_floats, default=None, help="comma-separated, unigram weight first")
    e.add_argument("--lambda", dest="lam", type=float, default=None, help="trigram weight (two-parameter form)")
    e.add_argument("--mu", type=float, default=None, help="bigram share of the remainder (two-parameter form)")
    e.set_defaults(func=cmd_evaluate)

    d = ExperimentConfig()
    x = sub.add_parser("experiment", help="k-fold comparison of weight-selection methods",
                       formatter_class=fmt)
    x.add_argument("--corpus", required=True)
    x.add_argument("--out", required=True, help="directory for report.json, summary.csv, boxplot.csv")
    x.add_argument("--config", default=None, help="JSON file with ExperimentConfig fields; flags override it")
    x.add_argument("--order", type=int, default=None, help=f"maximum n-gram order (default {d.max_order})")
    x.add_argument("--thresholds", type=_ints, default=None, help="per-order minimum counts (default all 1)")
    x.add_argument("--k", type=int, default=None, help=f"number of folds (default {d.k})")
    x.add_argument("--seed", type=int, default=None, help=f"seed for folds and random search (default {d.seed})")
    x.add_argument("--grid-steps", type=_floats, default=None,
                   help=f"grid step sizes (default {','.join(map(str, d.grid_steps))})")
    x.add_argument("--methods", type=_words, default=None,
                   help=f"subset of {','.join(METHODS)} (default {','.join(d.methods)})")
    x.add_argument("--epsilon", type=_floats, default=None, help="LP lower bounds (default none)")
    x.add_argument("--train-frac", type=float, default=None, help=f"training share (default {d.train_frac})")
    x.add_argument("--samples", type=int, default=None,
                   help=f"random-search draws (default {d.random_samples})")
    x.add_argument("--tol", type=float, default=None, help=f"exact-oracle tolerance (default {d.exact_tol})")
    x.add_argument("--threads", type=int, default=1, help="folds evaluated concurrently")
    x.set_defaults(func=cmd_experiment)

    s = sub.add_parser("synth", help="sample a synthetic corpus from a random trigram mixture",
                       formatter_class=fmt)
    s.add_argument("--vocab", type=int, default=200)
    s.add_argument("--weights", type=_floats, default=[0.2, 0.5, 0.3], help="unigram,bigram,trigram")
    s.add_argument("--sentences", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mean-length", type=float, default=8.0)
    s.add_argument("--out", default=None, help="output file (default stdout)")
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("surface", help="product-vs-sum surface data on the unit box", formatter_class=fmt)
    f.add_argument("--n", type=int, default=2, choices=[2, 3])
    f.add_argument("--step", type=float, default=0.01)
    f.add_argument("--out", default=None, help="CSV file (default stdout)")
    f.set_defaults(func=cmd_surface)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WeakModelError, SolverError, ExperimentError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except NgramLPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
