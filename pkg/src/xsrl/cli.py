"""``srl`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import DEFAULT_SEED, ConfigError, RunConfig, sweep_run, train_run
from .corpus import (
    Corpus,
    CorpusError,
    LabelInventory,
    build_inventory,
    read_conll09,
    validate_sentence,
    write_conll09,
)
from .embedder import EmbedderSpec, EmbeddingError
from .evaluator import AlignmentError, SweepError, render_report, score
from .fixtures import synthetic_corpus, tiny_sentence
from .model import ModelConfig, SrlModel, UnknownLanguageError
from .numerics import grad_check
from .trainer import (
    CheckpointError,
    FreezeError,
    TrainingError,
    batch_loss,
    load_checkpoint,
    predict_corpus,
    save_checkpoint,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
GRADCHECK_TOL = 1e-4

log = logging.getLogger("xsrl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", "utf-8")


def _overrides(args) -> dict:
    out = {"seed": args.seed}
    if getattr(args, "output_dir", None):
        out["output_dir"] = args.output_dir
    if getattr(args, "epochs", None) is not None:
        out["train"] = {"epochs": args.epochs}
    return out


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config, _overrides(args))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.output_dir / "effective_config.json", cfg.raw)
    return cfg


# -- commands -------------------------------------------------------------------


def cmd_validate(args) -> int:
    corpus = read_conll09(args.data, args.lang)
    inv = (
        LabelInventory.from_dict(json.loads(Path(args.inventory).read_text("utf-8")))
        if args.inventory
        else build_inventory(corpus)
    )
    n_bad = 0
    for s in corpus.sentences:
        for v in validate_sentence(s, inv):
            print(f"{s.id}\t{v}")
            n_bad += 1
    print(f"{len(corpus)} sentences, {n_bad} violations", file=sys.stderr)
    return EXIT_DATA if n_bad else EXIT_OK


def cmd_inventory(args) -> int:
    inv = build_inventory(read_conll09(args.data, args.lang))
    text = json.dumps({**inv.to_dict(), "seed": args.seed}, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    model, history = train_run(cfg)
    out = cfg.output_dir
    meta = {
        "seed": cfg.seed,
        "best_epoch": history["best_epoch"],
        "dev_f1": history["best_dev_f1"],
        "epochs_run": len(history["epochs"]),
    }
    save_checkpoint(model, meta, out / "model.ckpt")
    _write_json(out / "history.json", {"seed": cfg.seed, **history})
    print(f"wrote {out / 'model.ckpt'} (best dev F1 {history['best_dev_f1']})")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    gold = read_conll09(args.data, args.lang)
    if args.pred:
        pred = read_conll09(args.pred, args.lang)
    else:
        pred = predict_corpus(model, gold)
    report = score(gold, pred)
    text = render_report(report, args.format)
    if args.format == "tsv":
        text += f"seed\t{args.seed}\n"
    else:
        text = json.dumps({**json.loads(text), "seed": args.seed}, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_predict(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    corpus = read_conll09(args.data, args.lang)
    pred = predict_corpus(model, corpus)
    text = f"# seed = {args.seed}\n" + write_conll09(pred)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_fractions(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--fractions must be comma-separated integers, got {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if args.fractions:
        fractions = _parse_fractions(args.fractions)
    else:
        fractions = cfg.raw.get("sweep", {}).get("fractions", list(range(0, 101, 10)))
    out = cfg.output_dir
    try:
        table = sweep_run(cfg, fractions)
    except SweepError as exc:
        (out / "sweep.partial.tsv").write_text(render_report(exc.table, "tsv"), "utf-8")
        raise
    (out / "sweep.tsv").write_text(render_report(table, "tsv"), "utf-8")
    (out / "sweep.json").write_text(render_report(table, "json"), "utf-8")
    sys.stdout.write(render_report(table, "tsv"))
    return EXIT_OK


def default_gradcheck_model(seed: int = DEFAULT_SEED):
    """Two-language toy model and one 3-token sentence per language, in
    extended precision."""
    sentences = [tiny_sentence("en"), tiny_sentence("fa")]
    invs = {
        lang: build_inventory(synthetic_corpus(lang, 20, seed=0)) for lang in ("en", "fa")
    }
    cfg = ModelConfig(
        d_e=4, sent_layers=2, arg_layers=2, hidden=2, d_p=3, d_s=3, d_r=3,
        precision="extended", seed=seed,
    )
    return SrlModel(cfg, invs, EmbedderSpec(d=2, K=4, seed=seed)), sentences


def run_gradcheck(seed: int = DEFAULT_SEED, eps: float = 1e-5) -> float:
    model, sentences = default_gradcheck_model(seed)
    return grad_check(lambda: batch_loss(model, sentences)[0], model.parameters(), eps)


def cmd_gradcheck(args) -> int:
    err = run_gradcheck(args.seed, args.eps)
    ok = err < GRADCHECK_TOL
    print(f"max relative error {err:.3e} ({'ok' if ok else 'FAIL'}, tolerance {GRADCHECK_TOL:g}, seed {args.seed})")
    return EXIT_OK if ok else EXIT_NUMERIC


# -- dispatch -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="srl", description="Cross-lingual dependency SRL engine.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        return sp

    sp = common(sub.add_parser("validate", help="lint a CoNLL-2009 corpus"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--lang", required=True)
    sp.add_argument("--inventory", help="inventory JSON to validate labels against")
    sp.set_defaults(func=cmd_validate)

    sp = common(sub.add_parser("inventory", help="emit the label inventory as JSON"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--lang", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_inventory)

    for name, func, hlp in (
        ("train", cmd_train, "train from a RunConfig"),
        ("sweep", cmd_sweep, "source-fraction sweep experiment"),
    ):
        sp = common(sub.add_parser(name, help=hlp))
        sp.add_argument("--config", required=True)
        sp.add_argument("--output-dir")
        sp.add_argument("--epochs", type=int)
        if name == "sweep":
            sp.add_argument("--fractions", help="comma-separated percentages, e.g. 0,10,20")
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("eval", help="score a checkpoint on a gold corpus"))
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--lang", required=True)
    sp.add_argument("--pred", help="score this prediction file instead of running the model")
    sp.add_argument("--format", choices=("tsv", "json"), default="tsv")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("predict", help="annotate a corpus with a checkpoint"))
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--lang", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_predict)

    sp = common(sub.add_parser("gradcheck", help="finite-difference check of the full model"))
    sp.add_argument("--eps", type=float, default=1e-5)
    sp.set_defaults(func=cmd_gradcheck)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            print("srl: error: a subcommand is required", file=sys.stderr)
            return EXIT_USAGE
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, FloatingPointError) as exc:
        print(f"srl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SweepError as exc:
        print(f"srl: {exc}", file=sys.stderr)
        cause = exc.__cause__
        return EXIT_NUMERIC if isinstance(cause, (TrainingError, FloatingPointError)) else EXIT_DATA
    except (
        CorpusError, AlignmentError, EmbeddingError, CheckpointError, ConfigError,
        FreezeError, UnknownLanguageError, OSError, ValueError,
    ) as exc:
        print(f"srl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
