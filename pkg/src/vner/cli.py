"""``vner`` command line: train, tag, eval, gradcheck, joint-encode.

Exit codes: 0 success, 1 usage, 2 data error, 3 checkpoint error.
Logs go to standard error; data goes to files or standard output.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import checkpoint as ckpt_mod
from .config import PUBLISHED_DEFAULTS, ConfigError, TrainConfig, describe, read_config_file
from .data import CorpusError, decode_joint, encode_joint, read_corpus, write_tagged
from .evaluation import score
from .gradcheck import format_report, run_gradcheck
from .training import train

log = logging.getLogger("vner")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECKPOINT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            kind = {"int": int, "float": float}.get(f.type, str)
            p.add_argument(flag, dest=f.name, type=kind, default=None)
    p.add_argument("--lambda", dest="lm_weight", type=float, default=None,
                   help="weight of the language-model losses")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vner", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a tagger and write the best checkpoint")
    p.add_argument("--train", required=True, type=Path)
    p.add_argument("--dev", required=True, type=Path)
    p.add_argument("--embeddings", type=Path)
    p.add_argument("--config", type=Path, help="key=value file; flags override it")
    p.add_argument("--output", type=Path, default=Path("model.vner"))
    p.add_argument("--log-file", type=Path, help="tab-separated per-epoch log")
    p.add_argument("--threads", type=int, default=1)
    _add_config_flags(p)

    p = sub.add_parser("tag", help="append predicted tags to a column file")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", type=Path, help="default: standard output")
    p.add_argument("--columns", help="column roles of the input (default: the model's)")

    p = sub.add_parser("eval", help="entity-level precision/recall/F1")
    p.add_argument("--gold", required=True, type=Path)
    p.add_argument("--pred", required=True, type=Path,
                   help="predicted tags in the last column (last two with --nested)")
    p.add_argument("--columns", help="gold column roles (default token,tag or token,tag,tag2)")
    p.add_argument("--nested", action="store_true")
    p.add_argument("--summary", type=Path, help="also write a JSON summary here")

    p = sub.add_parser("gradcheck", help="finite-difference check of all parameter groups")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", choices=["tiny"], default="tiny")
    p.add_argument("--lambda", dest="lm_weight", type=float, default=1.0)

    p = sub.add_parser("joint-encode", help="merge two tag columns into L1+L2 joint tags, or split them")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", type=Path, help="default: standard output")
    p.add_argument("--columns", default=None,
                   help="input roles (default token,tag,tag2; token,tag with --decode)")
    p.add_argument("--decode", action="store_true", help="split joint tags back into two columns")
    return parser


def resolve_config(args) -> tuple[TrainConfig, dict[str, str]]:
    values, sources = {}, {}
    if getattr(args, "config", None):
        for k, v in read_config_file(args.config).items():
            values[k], sources[k] = v, f"config file {args.config}"
    for f in fields(TrainConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name], sources[f.name] = v, "flag"
    if values.get("nested") and "columns" not in values:
        values["columns"], sources["columns"] = "token,tag,tag2", "implied by --nested"
    return TrainConfig(**values), sources


def cmd_train(args) -> int:
    config, sources = resolve_config(args)
    if args.threads != 1:
        raise UsageError("--threads: only single-threaded training is supported")
    log.info("resolved configuration (published defaults: %s):\n%s", ", ".join(PUBLISHED_DEFAULTS),
             describe(config, sources))
    train_corpus = read_corpus(args.train, config.columns)
    dev_corpus = read_corpus(args.dev, config.columns)
    embeddings = None
    if args.embeddings:
        from .data import load_embeddings
        embeddings = lambda vocabs: load_embeddings(args.embeddings, vocabs.words, seed=config.seed,
                                                    trainable=not config.freeze_embeddings)
    rows = []
    result = train(train_corpus, dev_corpus, config, embeddings, rows.append)
    ckpt_mod.save_checkpoint(args.output, result.checkpoint)
    if args.log_file:
        with open(args.log_file, "w") as fh:
            fh.write("epoch\tloss\tdev_precision\tdev_recall\tdev_f1\n")
            for r in rows:
                fh.write(f"{r['epoch']}\t{r['loss']!r}\t{r['dev_precision']!r}\t{r['dev_recall']!r}"
                         f"\t{r['dev_f1']!r}\n")
    log.info("best dev F1 %.4f at epoch %d; checkpoint written to %s",
             result.checkpoint.best_dev_f1, result.checkpoint.epoch, args.output)
    return EXIT_OK


def cmd_tag(args) -> int:
    ckpt = ckpt_mod.load_checkpoint(args.model)
    model = ckpt.build_model()
    columns = args.columns
    if columns is None:
        columns = _infer_columns(args.input, ckpt.config.columns)
    corpus = read_corpus(args.input, columns)
    if model.config.nested is False and args.columns and "tag2" in columns:
        log.warning("input has a second tag column but the model is single-level")
    predictions = model.predict(corpus) if corpus else []
    out = args.output or Path("/dev/stdout")
    write_tagged(out, corpus, predictions)
    return EXIT_OK


def _infer_columns(path: Path, trained: str) -> str:
    """The model's column roles if the input has that many columns, else token only."""
    trained_roles = trained.split(",")
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    n = len(line.rstrip("\n").split("\t") if "\t" in line else line.split())
                    if n == len(trained_roles):
                        return trained
                    if n == 1:
                        return "token"
                    features = [r for r in trained_roles if r in ("pos", "chunk")]
                    roles = ["token", *features]
                    if n < len(roles):
                        raise CorpusError(f"input has {n} columns; the model needs {','.join(roles)}", path)
                    return ",".join(roles + ["_"] * (n - len(roles)))
    except OSError as exc:
        raise CorpusError(f"cannot read input: {exc}", path) from exc
    return "token"


def cmd_eval(args) -> int:
    gold_cols = args.columns or ("token,tag,tag2" if args.nested else "token,tag")
    gold = read_corpus(args.gold, gold_cols)
    k = 2 if args.nested else 1
    pred_lines = _read_last_columns(args.pred, k)
    if len(pred_lines) != len(gold):
        raise CorpusError(f"gold has {len(gold)} sentences, predictions {len(pred_lines)}", args.pred)
    for i, (g, p) in enumerate(zip(gold, pred_lines)):
        if len(g) != len(p[0]):
            raise CorpusError(f"sentence {i + 1}: gold has {len(g)} tokens, predictions {len(p[0])}",
                              args.pred)
    if args.nested:
        report = score([[s.tags, s.tags2] for s in gold], pred_lines, nested=True)
    else:
        report = score([s.tags for s in gold], [p[0] for p in pred_lines])
    print(report.format())
    if args.summary:
        report.write_json(args.summary)
    return EXIT_OK


def _read_last_columns(path: Path, k: int) -> list[list[list[str]]]:
    """Per sentence, ``k`` tag layers taken from the last ``k`` columns."""
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read predictions: {exc}", path) from exc
    out, cur = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            if cur:
                out.append([list(layer) for layer in zip(*cur)])
                cur = []
            continue
        cols = line.split("\t") if "\t" in line else line.split()
        if len(cols) < k + 1:
            raise CorpusError(f"expected a token and {k} tag column(s)", path, lineno)
        cur.append(cols[-k:])
    if cur:
        out.append([list(layer) for layer in zip(*cur)])
    return out


def cmd_gradcheck(args) -> int:
    results = run_gradcheck(seed=args.seed, lm_weight=args.lm_weight)
    print(format_report(results))
    ok = all(r.passed for r in results)
    print("gradcheck " + ("PASSED" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_DATA


def cmd_joint_encode(args) -> int:
    columns = args.columns or ("token,tag" if args.decode else "token,tag,tag2")
    corpus = read_corpus(args.input, columns)
    lines = []
    for sent in corpus:
        if args.decode:
            try:
                l1, l2 = decode_joint(sent.tags)
            except ValueError as exc:
                raise CorpusError(str(exc), args.input) from None
            lines += [f"{w}\t{a}\t{b}" for w, a, b in zip(sent.tokens, l1, l2)]
        else:
            if sent.tags2 is None:
                raise CorpusError("joint encoding needs tag and tag2 columns", args.input)
            lines += [f"{w}\t{j}" for w, j in zip(sent.tokens, encode_joint(sent.tags, sent.tags2))]
        lines.append("")
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "tag": cmd_tag, "eval": cmd_eval, "gradcheck": cmd_gradcheck,
            "joint-encode": cmd_joint_encode}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"vner {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ckpt_mod.CheckpointError as exc:
        print(f"vner {args.command}: checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (CorpusError, ValueError, OSError) as exc:
        print(f"vner {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
