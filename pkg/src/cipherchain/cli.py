"""Command-line interface.

Subcommands: build-model, encrypt, attack, experiment, compare, make-corpus.
Option precedence is flags > ``--config`` file (flat ``key=value``) > defaults.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .cipher import Alphabet, decrypt, encrypt, format_key, normalize, parse_key, random_key, CombinedKey
from .corpus import sample_plaintext, stdlib_corpus
from .harness import (
    compare_prngs,
    experiment_report,
    format_table,
    key_accuracy,
    p_sweep,
    reports_to_csv,
    seed_ledger,
    text_accuracy,
)
from .langmodel import BigramModel, build_model
from .mcmc import CIPHERS, INITS, ChainConfig, run_chain
from .prng import PrngKind, seed_source

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_INVALID = 4
EXIT_RUNTIME = 5

EPILOG = """\
exit codes:
  0  success
  2  usage error (unknown flag, malformed value)
  3  missing or unreadable input file
  4  invalid option value or combination
  5  runtime failure during the attack or experiment
"""

log = logging.getLogger("cipherchain")


class InvalidOptions(Exception):
    pass


class MissingFile(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def write_atomic(path: str | Path, data: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise MissingFile(f"cannot read {path}: {exc.strerror or exc}") from None


def load_config_file(path: str) -> dict[str, str]:
    values = {}
    for n, line in enumerate(read_text(path).splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidOptions(f"{path}:{n}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(action: argparse.Action, raw: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        truthy = raw.lower() in ("1", "true", "yes", "on")
        if not truthy and raw.lower() not in ("0", "false", "no", "off"):
            raise InvalidOptions(f"config value for {action.dest!r} must be a boolean")
        return truthy if isinstance(action, argparse._StoreTrueAction) else not truthy
    if action.type is not None:
        try:
            return action.type(raw)
        except (TypeError, ValueError):
            raise InvalidOptions(f"config value for {action.dest!r} is malformed: {raw!r}") from None
    return raw


def alphabet_from(args) -> Alphabet:
    try:
        return Alphabet.from_string(args.alphabet, with_space=args.space)
    except ValueError as exc:
        raise InvalidOptions(str(exc)) from None


def load_model(args, alphabet: Alphabet) -> BigramModel:
    if args.model:
        model = BigramModel.from_csv(read_text(args.model), delta=args.delta)
        if model.alphabet.symbols != alphabet.symbols:
            raise InvalidOptions("model alphabet differs from --alphabet/--space")
        return model
    if not args.corpus:
        raise InvalidOptions("a reference model is required: pass --corpus PATH|stdlib or --model CSV")
    raw = stdlib_corpus() if args.corpus == "stdlib" else read_text(args.corpus)
    corpus = normalize(raw, alphabet)
    if args.delta == 0 and corpus.size < 2:
        raise InvalidOptions("corpus too short for an unsmoothed model")
    return build_model(corpus, alphabet, args.delta)


def chain_config(args) -> ChainConfig:
    try:
        return ChainConfig(
            iterations=args.iterations,
            p=args.p,
            track_best=not args.no_track_best,
            init=args.init,
            cipher=args.cipher,
            period=args.period,
        )
    except ValueError as exc:
        raise InvalidOptions(str(exc)) from None


def prng_options(args) -> dict:
    return {"n_bits": args.ci_bits, "c_iter": args.ci_c}


def echo_config(args) -> None:
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    print(f"# cipherchain {__version__} " + " ".join(f"{k}={v}" for k, v in items.items()), file=sys.stderr)


def validate(args) -> None:
    checks = [
        ("iterations", lambda v: v >= 0, "must be >= 0"),
        ("p", lambda v: v > 0, "must be > 0"),
        ("delta", lambda v: v >= 0, "must be >= 0"),
        ("runs", lambda v: v >= 1, "must be >= 1"),
        ("experiments", lambda v: v >= 1, "must be >= 1"),
        ("jobs", lambda v: v >= 1, "must be >= 1"),
        ("threshold", lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
        ("ci_bits", lambda v: v >= 1, "must be >= 1"),
        ("ci_c", lambda v: v >= 0, "must be >= 0"),
    ]
    for name, ok, msg in checks:
        if hasattr(args, name) and getattr(args, name) is not None and not ok(getattr(args, name)):
            raise InvalidOptions(f"--{name.replace('_', '-')} {msg}")
    cipher = getattr(args, "cipher", "substitution")
    period = getattr(args, "period", None)
    if cipher != "substitution":
        if period is None:
            raise InvalidOptions(f"--cipher {cipher} needs --period")
        if period < 2:
            raise InvalidOptions("--period must be >= 2")
    if getattr(args, "init", None) == "truth" and args.command == "attack" and not args.truth_key:
        raise InvalidOptions("--init truth needs --truth-key")


# ---------------------------------------------------------------------------
# subcommands


def cmd_make_corpus(args) -> int:
    text = stdlib_corpus()
    write_atomic(args.out, text)
    print(f"wrote {len(text)} characters to {args.out}")
    return EXIT_OK


def cmd_build_model(args) -> int:
    alphabet = alphabet_from(args)
    model = load_model(args, alphabet)
    write_atomic(args.out, model.to_csv())
    print(f"model: {model.size} symbols, {model.corpus_len} corpus symbols, "
          f"{int(model.counts.sum())} bigrams -> {args.out}")
    return EXIT_OK


def cmd_encrypt(args) -> int:
    alphabet = alphabet_from(args)
    text = normalize(read_text(args.input), alphabet)
    if args.key:
        try:
            key = parse_key(read_text(args.key), args.cipher)
        except ValueError as exc:
            raise InvalidOptions(str(exc)) from None
    else:
        src = seed_source(args.prng, args.seed, **(prng_options(args) if PrngKind.parse(args.prng) is PrngKind.CI else {}))
        if args.cipher == "substitution":
            key = random_key("substitution", src, len(alphabet))
        elif args.cipher == "transposition":
            key = random_key("transposition", src, args.period)
        else:
            key = CombinedKey(random_key("substitution", src, len(alphabet)),
                              random_key("transposition", src, args.period))
    try:
        ciphertext = alphabet.render(encrypt(text, key))
    except ValueError as exc:
        raise InvalidOptions(str(exc)) from None
    if args.out:
        write_atomic(args.out, ciphertext + "\n")
    else:
        print(ciphertext)
    if args.key_out:
        write_atomic(args.key_out, format_key(key))
    return EXIT_OK


def cmd_attack(args) -> int:
    alphabet = alphabet_from(args)
    ciphertext = normalize(read_text(args.input), alphabet)
    if ciphertext.size == 0:
        raise InvalidOptions("ciphertext is empty after normalisation")
    model = load_model(args, alphabet)
    cfg = chain_config(args)
    truth = None
    if args.truth_key:
        try:
            truth = parse_key(read_text(args.truth_key), args.cipher)
        except ValueError as exc:
            raise InvalidOptions(str(exc)) from None
    src = seed_source(args.prng, args.seed, **(prng_options(args) if PrngKind.parse(args.prng) is PrngKind.CI else {}))
    state = run_chain(ciphertext, model, cfg, src, start=truth if cfg.init == "truth" else None,
                      trace=bool(args.trace))
    found = state.answer
    plain = alphabet.render(decrypt(ciphertext, found))
    print(format_key(found), end="")
    print(f"log_score={state.answer_score!r} accepted={state.n_accepted}/{state.n_proposed}")
    if truth is not None:
        print(f"key_accuracy={key_accuracy(found, truth):.6f}")
    if args.plaintext:
        reference = normalize(read_text(args.plaintext), alphabet)
        try:
            print(f"text_accuracy={text_accuracy(decrypt(ciphertext, found), reference):.6f}")
        except ValueError as exc:
            raise InvalidOptions(f"--plaintext: {exc}") from None
    if args.out:
        write_atomic(args.out, plain + "\n")
    else:
        print(plain)
    if args.key_out:
        write_atomic(args.key_out, format_key(found))
    if args.trace:
        write_atomic(args.trace, state.trace.to_csv())
    return EXIT_OK


def _experiment_inputs(args):
    alphabet = alphabet_from(args)
    raw = read_text(args.text) if args.text else sample_plaintext()
    plaintext = normalize(raw, alphabet)
    if plaintext.size < 2:
        raise InvalidOptions("test text is empty after normalisation")
    return plaintext, load_model(args, alphabet), chain_config(args)


def _emit_reports(args, reports) -> None:
    print(format_table(reports))
    if args.out:
        write_atomic(args.out, reports_to_csv(reports))
    if args.ledger:
        write_atomic(args.ledger, seed_ledger(reports))


def cmd_experiment(args) -> int:
    plaintext, model, cfg = _experiment_inputs(args)
    options = prng_options(args) if PrngKind.parse(args.prng) is PrngKind.CI else None
    if args.p_sweep:
        rows = p_sweep(plaintext, model, cfg, args.prng, args.p_sweep, args.runs, args.seed, args.threshold, args.jobs)
        print(f"{'p':>10} {'AC':>8} {'NSD':>5} {'runs':>5}")
        for p, row in rows:
            print(f"{p:>10.4g} {row.ac:>8.4f} {row.nsd:>5} {row.runs:>5}")
        return EXIT_OK
    report = experiment_report(plaintext, model, cfg, args.prng, args.experiments, args.runs, args.seed,
                               args.threshold, args.jobs, options)
    _emit_reports(args, [report])
    return EXIT_OK


def cmd_compare(args) -> int:
    plaintext, model, cfg = _experiment_inputs(args)
    reports = compare_prngs(plaintext, model, cfg, args.experiments, args.runs, args.seed, args.threshold,
                            args.jobs, prng_options=prng_options(args))
    _emit_reports(args, reports)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _float_list(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",") if v.strip()]


def _prng(raw: str) -> str:
    try:
        return PrngKind.parse(raw).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="cipherchain",
        description="MCMC cryptanalysis of substitution/transposition ciphers with pluggable PRNGs.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--alphabet", default="ABCDEFGHIJKLMNOPQRSTUVWXYZ", help="symbols (default A-Z)")
    common.add_argument("--space", action="store_true", help="keep word spacing as an extra symbol")
    common.add_argument("-v", "--verbose", action="store_true")

    model_opts = argparse.ArgumentParser(add_help=False)
    model_opts.add_argument("--corpus", help="reference corpus file, or 'stdlib' for the built-in corpus")
    model_opts.add_argument("--model", help="bigram count CSV written by build-model")
    model_opts.add_argument("--delta", type=float, default=1.0, help="additive smoothing (default 1)")

    chain_opts = argparse.ArgumentParser(add_help=False)
    chain_opts.add_argument("--iterations", type=int, default=10_000)
    chain_opts.add_argument("--p", type=float, default=1.0, help="scaling exponent p > 0")
    chain_opts.add_argument("--prng", type=_prng, default="xorshift128", help="lcg48|drand48, xorshift128, ci")
    chain_opts.add_argument("--seed", type=int, default=0, help="master seed")
    chain_opts.add_argument("--init", choices=INITS, default="random")
    chain_opts.add_argument("--cipher", choices=CIPHERS, default="substitution")
    chain_opts.add_argument("--period", type=int, help="transposition period")
    chain_opts.add_argument("--no-track-best", action="store_true", help="answer with the final state")
    chain_opts.add_argument("--ci-bits", type=int, default=32, help="CI state width N")
    chain_opts.add_argument("--ci-c", type=int, default=1, help="CI constant c")

    grid_opts = argparse.ArgumentParser(add_help=False)
    grid_opts.add_argument("--text", help="test plaintext (default: bundled English passage)")
    grid_opts.add_argument("--runs", type=int, default=100)
    grid_opts.add_argument("--experiments", type=int, default=5)
    grid_opts.add_argument("--threshold", type=float, default=0.90, help="text accuracy needed for success")
    grid_opts.add_argument("--jobs", type=int, default=1)
    grid_opts.add_argument("--out", help="CSV report path")
    grid_opts.add_argument("--ledger", help="JSON-lines seed ledger path")

    subs = {}
    p = sub.add_parser("make-corpus", parents=[common], help="write the built-in stdlib corpus to a file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_corpus)
    subs["make-corpus"] = p

    p = sub.add_parser("build-model", parents=[common, model_opts], help="count corpus bigrams into a CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_model)
    subs["build-model"] = p

    p = sub.add_parser("encrypt", parents=[common], help="encrypt a text file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--key", help="key file (random key from --prng/--seed otherwise)")
    p.add_argument("--key-out")
    p.add_argument("--out")
    p.add_argument("--cipher", choices=CIPHERS, default="substitution")
    p.add_argument("--period", type=int)
    p.add_argument("--prng", type=_prng, default="xorshift128")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ci-bits", type=int, default=32)
    p.add_argument("--ci-c", type=int, default=1)
    p.set_defaults(func=cmd_encrypt)
    subs["encrypt"] = p

    p = sub.add_parser("attack", parents=[common, model_opts, chain_opts], help="run one chain on a ciphertext")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--truth-key", help="true key file (for --init truth and key accuracy)")
    p.add_argument("--plaintext", help="reference plaintext for text accuracy")
    p.add_argument("--out")
    p.add_argument("--key-out")
    p.add_argument("--trace", help="per-step CSV (iteration,log_score,accepted)")
    p.set_defaults(func=cmd_attack)
    subs["attack"] = p

    p = sub.add_parser("experiment", parents=[common, model_opts, chain_opts, grid_opts],
                       help="EN x runs grid for one PRNG")
    p.add_argument("--p-sweep", type=_float_list, help="comma-separated exponents; one experiment each")
    p.set_defaults(func=cmd_experiment)
    subs["experiment"] = p

    p = sub.add_parser("compare", parents=[common, model_opts, chain_opts, grid_opts],
                       help="the same grid for all three PRNGs")
    p.set_defaults(func=cmd_compare)
    subs["compare"] = p

    for sp in subs.values():
        sp.epilog = EPILOG
        sp.formatter_class = argparse.RawDescriptionHelpFormatter
    return parser, subs


def parse_args(argv):
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in subs), None)
    if known.config and command:
        subparser = subs[command]
        actions = {a.dest: a for a in subparser._actions}
        overrides = {}
        for key, raw in load_config_file(known.config).items():
            if key not in actions or key in ("help", "config"):
                raise InvalidOptions(f"unknown config key {key!r} for {command}")
            overrides[key] = _coerce(actions[key], raw)
            actions[key].required = False
        subparser.set_defaults(**overrides)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except InvalidOptions as exc:
        print(f"cipherchain: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MissingFile as exc:
        print(f"cipherchain: error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        validate(args)
        echo_config(args)
        return args.func(args)
    except InvalidOptions as exc:
        print(f"cipherchain: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MissingFile as exc:
        print(f"cipherchain: error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except ValueError as exc:
        print(f"cipherchain: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
