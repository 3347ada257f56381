"""Single command-line entry point wiring all stages together.

Subcommands: ingest, train, convert, query, expand, stats. Exit codes:
0 success, 1 usage error, 2 data/format error, 3 resource error
(network, disk). Every flag can also be given in a ``--config`` file of
flat ``key=value`` lines (same names as the long flags); explicit flags
win over the file. Logs go to stderr as ``level=... msg="..."`` lines.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (DataFormatError, OOVError, ResourceError,
                     ToxivecError, TrainingDivergedError, UsageError)
from .ingest import (ArchiveCursor, ParseStats, Platform, fetch_archive_pages,
                     parse_4plebs_csv, parse_foolfuuka_json, parse_jsonl)
from .lexicon import (Lexicon, expand_by_neighbors, load_lexicon, review_merge,
                      save_lexicon, scan_external)
from .model_io import EmbeddingModel, load, save
from .normalize import doc_to_line, normalize_post, read_corpus
from .query import most_similar
from .trainer import TrainConfig, train
from .vocab import (DEFAULT_MIN_COUNT, DEFAULT_NS_POWER, DEFAULT_NS_TABLE_SIZE,
                    build_ns_table, build_vocabulary)

log = logging.getLogger("toxivec")

_ENV_OVERRIDES = {"endpoint": "TOXIVEC_ENDPOINT", "rate_limit_ms": "TOXIVEC_RATE_LIMIT_MS"}
_STATS_MIN_COUNTS = (1, 2, 5, 10, 25)


class _LogfmtFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        message = record.getMessage().replace('"', "'")
        return f'level={record.levelname.lower()} msg="{message}"'


def _setup_logging() -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_LogfmtFormatter())
    root = logging.getLogger("toxivec")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)
    root.propagate = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage problems to exit code 1
        raise UsageError(message)


@dataclass
class RunManifest:
    """Reproducibility record written next to every trained model."""

    command: str
    version: str
    created_at: str
    wall_time_s: float
    config: dict
    inputs: dict
    corpus: dict
    vocab: dict
    model: dict

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _open_input(path: str | Path, mode: str = "rb"):
    try:
        return open(path, mode)
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="toxivec", allow_abbrev=False,
                     description="Imageboard corpus embeddings and lexicon bootstrapping")
    parser.add_argument("--version", action="version", version=f"toxivec {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", help="parse dumps or fetch archive pages into a normalized corpus",
                       allow_abbrev=False)
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--format", choices=["foolfuuka-json", "4plebs-csv", "jsonl"],
                   help="input file format (file mode)")
    p.add_argument("--input", help="dump file to parse (file mode)")
    p.add_argument("--board", default="", help="board tag recorded on each parsed post")
    p.add_argument("--platform", choices=[pl.value for pl in Platform], default="other")
    p.add_argument("--output", required=True, help="normalized corpus file to write")
    p.add_argument("--endpoint", help="archive API base URL (fetch mode)")
    p.add_argument("--pages", type=int, default=10, help="page limit per fetch run")
    p.add_argument("--rate-limit-ms", type=int, default=1000, help="delay between archive requests")
    p.add_argument("--cursor-file", default="ingest.cursor.json", help="resumable fetch state file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train embeddings over a normalized corpus", allow_abbrev=False)
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--corpus", required=True, help="normalized corpus file")
    p.add_argument("--output", required=True, help="model file to write")
    p.add_argument("--format", choices=["bin", "txt"], default="bin")
    p.add_argument("--dim", type=int, default=150)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negative", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT)
    p.add_argument("--subsample", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--dynamic-window", action="store_true")
    p.add_argument("--ns-power", type=float, default=DEFAULT_NS_POWER)
    p.add_argument("--ns-table-size", type=int, default=DEFAULT_NS_TABLE_SIZE)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", help="convert a model between text and binary formats",
                       allow_abbrev=False)
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--in-format", choices=["bin", "txt"])
    p.add_argument("--out-format", choices=["bin", "txt"])
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("query", help="similarity queries over a model", allow_abbrev=False)
    p.add_argument("what", choices=["similar"], help="query type")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--model", required=True)
    p.add_argument("--model-format", choices=["bin", "txt"])
    p.add_argument("--word", required=True)
    p.add_argument("-n", type=int, default=10, dest="n")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("expand", help="propose lexicon candidates from the model or a message file",
                       allow_abbrev=False)
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--model", required=True)
    p.add_argument("--model-format", choices=["bin", "txt"])
    p.add_argument("--lexicon", required=True, help="JSON-lines lexicon file")
    p.add_argument("--init-seeds", help="comma-separated seed terms if the lexicon file is new")
    p.add_argument("--threshold", type=float, help="similarity cutoff (default 0.7 neighbors, 0.5 external)")
    p.add_argument("-n", type=int, default=10, dest="n", help="neighbors considered per lexicon term")
    p.add_argument("--external", help="message file (one per line) to scan instead of the model")
    p.add_argument("--accept-all", action="store_true", help="merge all candidates into the lexicon file")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("stats", help="summarize a normalized corpus", allow_abbrev=False)
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--corpus", required=True)
    p.add_argument("--top", type=int, default=50)
    p.add_argument("--vocab-tsv", help="also dump the full word<TAB>count table here")
    p.set_defaults(func=cmd_stats)

    return parser


# ---------------------------------------------------------------------------
# config file / environment merging
# ---------------------------------------------------------------------------


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {value!r}")


def _subcommand_actions(parser: _Parser, command: str) -> list[argparse.Action]:
    for action in parser._actions:  # noqa: SLF001 - argparse has no public accessor
        if isinstance(action, argparse._SubParsersAction):
            return [a for a in action.choices[command]._actions
                    if a.option_strings and a.dest not in ("help", "config")]
    return []


def _explicit_dests(actions: list[argparse.Action], argv: list[str]) -> set[str]:
    provided = set()
    for action in actions:
        for opt in action.option_strings:
            if any(token == opt or token.startswith(opt + "=") for token in argv):
                provided.add(action.dest)
    return provided


def _convert(action: argparse.Action, value: str):
    if isinstance(action, argparse._StoreTrueAction):
        return _parse_bool(value)
    if action.type is not None:
        try:
            return action.type(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {action.dest}: {exc}") from None
    return value


def _apply_overrides(args: argparse.Namespace, parser: _Parser, argv: list[str]) -> None:
    """Layer precedence onto parsed args: defaults < config file < env < flags."""
    if not args.command:
        return
    actions = {action.dest: action for action in _subcommand_actions(parser, args.command)}
    explicit = _explicit_dests(list(actions.values()), argv)
    if getattr(args, "config", None):
        for dest, raw in _read_config_file(args.config).items():
            if dest not in actions:
                raise UsageError(f"unknown config key {dest!r} for command {args.command!r}")
            if dest not in explicit:
                setattr(args, dest, _convert(actions[dest], raw))
    if args.command == "ingest":
        for dest, env_name in _ENV_OVERRIDES.items():
            value = os.environ.get(env_name)
            if value is not None and dest in actions and dest not in explicit:
                setattr(args, dest, _convert(actions[dest], value))


def _resolved_config(args: argparse.Namespace, parser: _Parser) -> dict:
    actions = _subcommand_actions(parser, args.command)
    return {action.dest: getattr(args, action.dest) for action in actions}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

_FILE_PARSERS = {
    "foolfuuka-json": parse_foolfuuka_json,
    "4plebs-csv": parse_4plebs_csv,
    "jsonl": parse_jsonl,
}


def _infer_format(path: str, explicit: str | None, flag: str) -> str:
    if explicit:
        return explicit
    suffix = Path(path).suffix.lower()
    mapping = {".txt": "txt", ".bin": "bin", ".vec": "txt"}
    if suffix in mapping:
        return mapping[suffix]
    raise UsageError(f"cannot infer model format of {path!r}; pass {flag}")


def _load_model(path: str, explicit: str | None, flag: str = "--model-format") -> EmbeddingModel:
    if not Path(path).exists():
        raise DataFormatError(f"model file {path} does not exist")
    return load(path, _infer_format(path, explicit, flag))


def cmd_ingest(args, parser: _Parser, argv: list[str]) -> int:
    fetch_mode = bool(args.endpoint)
    if fetch_mode == bool(args.input):
        raise UsageError("ingest needs exactly one of --input (file mode) or --endpoint (fetch mode)")
    platform = Platform(args.platform)
    stats = ParseStats()
    documents = 0
    tokens = 0
    dropped_empty = 0

    if fetch_mode:
        cursor = ArchiveCursor.open(args.cursor_file, args.endpoint, args.board)
        posts = fetch_archive_pages(cursor, args.pages, platform=platform,
                                    rate_limit_s=args.rate_limit_ms / 1000.0, stats=stats)
        mode = "a"
    else:
        if not args.format:
            raise UsageError("--format is required with --input")
        handle = _open_input(args.input)
        file_parser = _FILE_PARSERS[args.format]
        if args.format == "jsonl":
            posts = file_parser(handle, stats=stats)
        else:
            posts = file_parser(handle, platform=platform, board=args.board, stats=stats)
        mode = "w"

    with open(args.output, mode, encoding="utf-8", newline="\n") as out:
        for post in posts:
            doc = normalize_post(post)
            if doc is None:
                dropped_empty += 1
                continue
            out.write(doc_to_line(doc))
            out.write("\n")
            documents += 1
            tokens += len(doc)
    if not fetch_mode:
        handle.close()

    _update_ingest_meta(Path(args.output), platform.value, args.board or "?",
                        documents, tokens, stats, dropped_empty, append=fetch_mode)
    log.info("ingest: %d documents (%d tokens) written to %s; %d posts empty after normalization, "
             "%d records skipped", documents, tokens, args.output, dropped_empty, stats.skipped)
    return 0


def _update_ingest_meta(output: Path, platform: str, board: str, documents: int,
                        tokens: int, stats: ParseStats, dropped_empty: int, append: bool) -> None:
    meta_path = output.with_name(output.name + ".meta.json")
    meta = {"documents": 0, "tokens": 0, "raw_posts": 0, "skipped_records": 0,
            "dropped_empty": 0, "platform_counts": {}, "board_counts": {}}
    if append and meta_path.exists():
        try:
            meta.update(json.loads(meta_path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError):
            pass
    meta["documents"] += documents
    meta["tokens"] += tokens
    meta["raw_posts"] += stats.yielded
    meta["skipped_records"] += stats.skipped
    meta["dropped_empty"] += dropped_empty
    meta["platform_counts"][platform] = meta["platform_counts"].get(platform, 0) + documents
    meta["board_counts"][board] = meta["board_counts"].get(board, 0) + documents
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_train(args, parser: _Parser, argv: list[str]) -> int:
    started = time.perf_counter()
    with _open_input(args.corpus, "rb"):
        pass  # fail fast with exit code 2 before any heavy work
    docs = list(read_corpus(args.corpus))
    documents = len(docs)
    token_count = sum(len(d) for d in docs)
    vocab = build_vocabulary(docs, args.min_count)
    table = build_ns_table(vocab, args.ns_power, args.ns_table_size)
    config = TrainConfig(
        dim=args.dim, window=args.window, negatives=args.negative, epochs=args.epochs,
        alpha=args.alpha, subsample=args.subsample, seed=args.seed,
        workers=args.threads, dynamic_window=args.dynamic_window,
    )
    result = train(docs, vocab, table, config)
    model = EmbeddingModel(words=vocab.words, vectors=result.params.w_in.astype(np.float32))
    save(model, args.output, args.format)
    manifest = RunManifest(
        command="train",
        version=__version__,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        wall_time_s=round(time.perf_counter() - started, 3),
        config=_resolved_config(args, parser),
        inputs={str(args.corpus): _sha256(args.corpus)},
        corpus={"documents": documents, "tokens": token_count},
        vocab={"size": len(vocab), "total_tokens": vocab.total_tokens, "min_count": args.min_count},
        model={"path": str(args.output), "format": args.format, "dim": args.dim,
               "words": len(vocab), "digest_sha256": _sha256(args.output)},
    )
    manifest.write(Path(str(args.output) + ".manifest.json"))
    log.info("train: %d words x %d dims in %.1fs (%s engine); model %s",
             len(vocab), args.dim, result.duration_s, result.engine, args.output)
    return 0


def cmd_convert(args, parser: _Parser, argv: list[str]) -> int:
    in_format = _infer_format(args.input, args.in_format, "--in-format")
    out_format = _infer_format(args.output, args.out_format, "--out-format")
    model = _load_model(args.input, in_format)
    save(model, args.output, out_format)
    log.info("convert: %s (%s) -> %s (%s)", args.input, in_format, args.output, out_format)
    return 0


def cmd_query(args, parser: _Parser, argv: list[str]) -> int:
    model = _load_model(args.model, args.model_format)
    neighbors = most_similar(args.word, args.n, model)
    if args.json:
        payload = [{"word": nb.word, "score": nb.score, "score_rounded": nb.rounded}
                   for nb in neighbors]
        print(json.dumps(payload, ensure_ascii=False))
    else:
        for nb in neighbors:
            print(f"{nb.word}\t{nb.score:.6f}\t{nb.rounded}")
    return 0


def cmd_expand(args, parser: _Parser, argv: list[str]) -> int:
    model = _load_model(args.model, args.model_format)
    lexicon_path = Path(args.lexicon)
    if lexicon_path.exists():
        lexicon = load_lexicon(lexicon_path)
    elif args.init_seeds:
        lexicon = Lexicon.from_seeds(t.strip() for t in args.init_seeds.split(",") if t.strip())
        save_lexicon(lexicon, lexicon_path)
        log.info("expand: created %s with %d seed terms", args.lexicon, len(lexicon))
    else:
        raise UsageError(f"lexicon file {args.lexicon} does not exist; pass --init-seeds to create it")

    if args.external:
        threshold = args.threshold if args.threshold is not None else 0.5
        with _open_input(args.external, "r") as handle:
            candidates = scan_external((line.rstrip("\n") for line in handle),
                                       lexicon, model, threshold=threshold)
    else:
        threshold = args.threshold if args.threshold is not None else 0.7
        candidates = expand_by_neighbors(lexicon, model, threshold=threshold, per_term=args.n)

    for candidate in candidates:
        print(json.dumps({
            "term": candidate.term, "evidence_count": candidate.evidence_count,
            "source": candidate.source, "score": candidate.score,
            "sample_contexts": candidate.sample_contexts,
        }, ensure_ascii=False))
    if args.accept_all and candidates:
        merged = review_merge(lexicon, candidates)
        save_lexicon(merged, lexicon_path)
        log.info("expand: accepted %d candidates; lexicon now %d terms",
                 len(merged) - len(lexicon), len(merged))
    return 0


def cmd_stats(args, parser: _Parser, argv: list[str]) -> int:
    with _open_input(args.corpus, "rb"):
        pass
    documents = 0
    tokens = 0
    counts: dict[str, int] = {}
    for doc in read_corpus(args.corpus):
        documents += 1
        tokens += len(doc)
        for token in doc:
            counts[token] = counts.get(token, 0) + 1
    print(f"documents: {documents}")
    print(f"tokens: {tokens}")
    if documents == 0:
        log.warning("corpus %s contains no documents", args.corpus)
        return 0
    for min_count in _STATS_MIN_COUNTS:
        size = sum(1 for c in counts.values() if c >= min_count)
        print(f"vocabulary size (min_count={min_count}): {size}")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    print(f"top {min(args.top, len(ranked))} tokens:")
    for word, count in ranked[:args.top]:
        print(f"  {word} {count}")
    meta_path = Path(str(args.corpus) + ".meta.json")
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            platform_counts = meta.get("platform_counts", {})
            total = sum(platform_counts.values())
            if total:
                print("platform share:")
                for name, count in sorted(platform_counts.items()):
                    print(f"  {name} {100.0 * count / total:.1f}% ({count} documents)")
        except (OSError, json.JSONDecodeError):
            log.warning("ignoring unreadable metadata file %s", meta_path)
    if args.vocab_tsv:
        with open(args.vocab_tsv, "w", encoding="utf-8", newline="\n") as handle:
            for word, count in ranked:
                handle.write(f"{word}\t{count}\n")
        log.info("stats: wrote %d vocabulary rows to %s", len(ranked), args.vocab_tsv)
    return 0


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    """Parse argv, run the chosen command, translate errors to exit codes."""
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --version / --help
            return int(exc.code or 0)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 1
        _apply_overrides(args, parser, argv)
        return args.func(args, parser, argv)
    except UsageError as exc:
        log.error("%s", exc)
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OOVError, TrainingDivergedError) as exc:
        log.error("%s", exc)
        return 2
    except ResourceError as exc:
        log.error("%s", exc)
        return 3
    except OSError as exc:
        log.error("%s", exc)
        return 3
    except ToxivecError as exc:
        log.error("%s", exc)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
