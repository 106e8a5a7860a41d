"""Experiment grid: encrypt a fixed text under fresh keys, attack, score.

One experiment is ``runs`` independent attacks.  Each run encrypts the same
plaintext with a new random key and runs one chain; the experiment reports

* ``AC``  -- mean key accuracy over runs (fraction of key entries recovered),
* ``NSD`` -- number of runs whose decryption reaches the success threshold.

Seeds form a tree: ``master -> experiment (en) -> run``.  The true key of a run
is drawn from a xorshift128 stream seeded from the run seed alone, so every
PRNG kind attacks exactly the same cipher instances.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Iterable, Optional, Sequence

import numpy as np

from .cipher import CombinedKey, Key, SubstitutionKey, TranspositionKey, decrypt, encrypt, random_permutation
from .langmodel import BigramModel
from .mcmc import ChainConfig, run_chain
from .prng import PrngKind, Xorshift128, derive_seed, seed_source

log = logging.getLogger(__name__)

CSV_HEADER = ["prng", "en", "ac", "ac_support", "nsd", "runs", "iterations", "p", "threshold", "seed"]
TRUTH_STREAM = 0x7472757468  # "truth"
DEFAULT_EXPERIMENTS = 5
DEFAULT_RUNS = 100


@dataclass(frozen=True)
class RunOutcome:
    run: int
    seed: int
    key_accuracy: float
    key_accuracy_support: float
    text_accuracy: float
    success: bool
    final_log_score: float


@dataclass(frozen=True)
class ExperimentRow:
    en: int
    ac: float
    ac_support: float
    nsd: int
    runs: int
    seed: int


@dataclass
class ExperimentReport:
    prng: PrngKind
    rows: list[ExperimentRow]
    config: dict
    outcomes: dict[int, list[RunOutcome]] = field(default_factory=dict, repr=False)

    @property
    def mean_ac(self) -> float:
        return float(np.mean([r.ac for r in self.rows])) if self.rows else float("nan")

    @property
    def mean_nsd(self) -> float:
        return float(np.mean([r.nsd for r in self.rows])) if self.rows else float("nan")


# ---------------------------------------------------------------------------
# accuracy measures


def _entries(key: Key) -> tuple[int, ...]:
    if isinstance(key, SubstitutionKey):
        return key.perm
    if isinstance(key, TranspositionKey):
        return key.order
    return key.sub.perm + key.trans.order


def key_accuracy(found: Key, truth: Key, support: Optional[Iterable[int]] = None) -> float:
    """Fraction of key entries where ``found`` agrees with ``truth``.

    ``support`` restricts a substitution comparison to the given plaintext
    symbols (for a combined key, only the substitution part is restricted).
    """
    a, b = _entries(found), _entries(truth)
    if type(found) is not type(truth) or len(a) != len(b):
        raise ValueError("keys are of different shape")
    if support is None:
        return sum(x == y for x, y in zip(a, b)) / len(a)
    support = sorted(set(int(s) for s in support))
    if isinstance(truth, TranspositionKey):
        return key_accuracy(found, truth)
    sub_f = found if isinstance(found, SubstitutionKey) else found.sub
    sub_t = truth if isinstance(truth, SubstitutionKey) else truth.sub
    hits = sum(sub_f.perm[i] == sub_t.perm[i] for i in support)
    total = len(support)
    if isinstance(truth, CombinedKey):
        hits += sum(x == y for x, y in zip(found.trans.order, truth.trans.order))
        total += truth.trans.k
    return hits / total if total else 1.0


def text_accuracy(decrypted, plaintext) -> float:
    decrypted = np.asarray(decrypted)
    plaintext = np.asarray(plaintext)
    if decrypted.shape != plaintext.shape:
        raise ValueError("texts differ in length")
    if plaintext.size == 0:
        return 1.0
    return float((decrypted == plaintext).mean())


# ---------------------------------------------------------------------------
# runs and experiments


def experiment_seed(master_seed: int, en: int) -> int:
    return derive_seed(master_seed, en)


def run_seed(exp_seed: int, run: int) -> int:
    return derive_seed(exp_seed, run)


def draw_truth(cfg: ChainConfig, alphabet_size: int, seed: int) -> Key:
    src = Xorshift128.from_seed(derive_seed(seed, TRUTH_STREAM))
    if cfg.cipher == "substitution":
        return SubstitutionKey(random_permutation(alphabet_size, src))
    trans = TranspositionKey(random_permutation(cfg.period, src))
    if cfg.cipher == "transposition":
        return trans
    return CombinedKey(SubstitutionKey(random_permutation(alphabet_size, src)), trans)


def attack_once(run: int, *, plaintext, model: BigramModel, cfg: ChainConfig, prng: PrngKind,
                exp_seed: int, threshold: float, fixed_key: Optional[Key] = None,
                prng_options: Optional[dict] = None) -> RunOutcome:
    seed = run_seed(exp_seed, run)
    truth = fixed_key if fixed_key is not None else draw_truth(cfg, model.size, seed)
    ciphertext = encrypt(plaintext, truth)
    src = seed_source(prng, seed, **(prng_options or {}))
    start = truth if cfg.init == "truth" else None
    state = run_chain(ciphertext, model, cfg, src, start=start)
    found = state.answer
    text_acc = text_accuracy(decrypt(ciphertext, found), plaintext)
    support = np.unique(plaintext)
    return RunOutcome(
        run=run,
        seed=seed,
        key_accuracy=key_accuracy(found, truth),
        key_accuracy_support=key_accuracy(found, truth, support),
        text_accuracy=text_acc,
        success=text_acc >= threshold,
        final_log_score=state.answer_score,
    )


def run_experiment(plaintext, model: BigramModel, cfg: ChainConfig, prng: PrngKind | str, runs: int,
                   exp_seed: int, en: int = 1, threshold: float = 0.90, jobs: int = 1,
                   fixed_key: Optional[Key] = None, prng_options: Optional[dict] = None,
                   ) -> tuple[ExperimentRow, list[RunOutcome]]:
    """Attack ``runs`` fresh encryptions of ``plaintext`` and aggregate AC/NSD."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    plaintext = np.asarray(plaintext, dtype=np.int64)
    if plaintext.size == 0:
        raise ValueError("plaintext is empty")
    if cfg.cipher != "substitution" and cfg.period is None and fixed_key is None:
        raise ValueError("transposition experiments need a period")
    prng = PrngKind.parse(prng)
    task = partial(attack_once, plaintext=plaintext, model=model, cfg=cfg, prng=prng, exp_seed=exp_seed,
                   threshold=threshold, fixed_key=fixed_key, prng_options=prng_options)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(task, range(runs)))
    else:
        outcomes = [task(r) for r in range(runs)]
    outcomes.sort(key=lambda o: o.run)
    row = ExperimentRow(
        en=en,
        ac=float(np.mean([o.key_accuracy for o in outcomes])),
        ac_support=float(np.mean([o.key_accuracy_support for o in outcomes])),
        nsd=sum(o.success for o in outcomes),
        runs=runs,
        seed=exp_seed,
    )
    log.info("%s EN=%d AC=%.4f NSD=%d/%d", prng.value, en, row.ac, row.nsd, runs)
    return row, outcomes


def experiment_report(plaintext, model: BigramModel, cfg: ChainConfig, prng: PrngKind | str,
                      experiments: int, runs: int, master_seed: int, threshold: float = 0.90,
                      jobs: int = 1, prng_options: Optional[dict] = None) -> ExperimentReport:
    prng = PrngKind.parse(prng)
    report = ExperimentReport(prng=prng, rows=[], config=config_snapshot(cfg, threshold, master_seed))
    for en in range(1, experiments + 1):
        row, outcomes = run_experiment(plaintext, model, cfg, prng, runs, experiment_seed(master_seed, en),
                                       en=en, threshold=threshold, jobs=jobs, prng_options=prng_options)
        report.rows.append(row)
        report.outcomes[en] = outcomes
    return report


def compare_prngs(plaintext, model: BigramModel, cfg: ChainConfig, experiments: int = DEFAULT_EXPERIMENTS,
                  runs: int = DEFAULT_RUNS, master_seed: int = 0, threshold: float = 0.90, jobs: int = 1,
                  kinds: Sequence[PrngKind] = tuple(PrngKind),
                  prng_options: Optional[dict] = None) -> list[ExperimentReport]:
    """Same experiment grid, same seeds, once per generator kind."""
    return [
        experiment_report(plaintext, model, cfg, kind, experiments, runs, master_seed, threshold, jobs,
                          prng_options if kind is PrngKind.CI else None)
        for kind in kinds
    ]


def p_sweep(plaintext, model: BigramModel, cfg: ChainConfig, prng: PrngKind | str, ps: Sequence[float],
            runs: int, master_seed: int, threshold: float = 0.90, jobs: int = 1) -> list[tuple[float, ExperimentRow]]:
    """One experiment per scaling exponent, sharing seeds across exponents."""
    out = []
    for p in ps:
        swept = ChainConfig(**{**asdict(cfg), "p": float(p)})
        row, _ = run_experiment(plaintext, model, swept, prng, runs, experiment_seed(master_seed, 1),
                                threshold=threshold, jobs=jobs)
        out.append((float(p), row))
    return out


# ---------------------------------------------------------------------------
# output


def config_snapshot(cfg: ChainConfig, threshold: float, master_seed: int) -> dict:
    snap = asdict(cfg)
    snap.update(threshold=threshold, master_seed=master_seed)
    return snap


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def reports_to_csv(reports: Sequence[ExperimentReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rep in reports:
        cfg = rep.config
        for row in rep.rows:
            writer.writerow([rep.prng.value, row.en, _fmt(row.ac), _fmt(row.ac_support), row.nsd, row.runs,
                             cfg["iterations"], repr(float(cfg["p"])), repr(float(cfg["threshold"])), row.seed])
    return buf.getvalue()


def seed_ledger(reports: Sequence[ExperimentReport]) -> str:
    lines = []
    for rep in reports:
        for en, outcomes in sorted(rep.outcomes.items()):
            for o in outcomes:
                lines.append(json.dumps({"prng": rep.prng.value, "en": en, "run": o.run, "seed": o.seed},
                                        sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def format_table(reports: Sequence[ExperimentReport]) -> str:
    """Aligned ``prng EN AC NSD`` table followed by per-generator means."""
    lines = [f"{'prng':<12} {'EN':>3} {'AC':>8} {'AC_supp':>8} {'NSD':>5} {'runs':>5}"]
    for rep in reports:
        for row in rep.rows:
            lines.append(f"{rep.prng.value:<12} {row.en:>3} {row.ac:>8.4f} {row.ac_support:>8.4f} "
                         f"{row.nsd:>5} {row.runs:>5}")
    lines.append("")
    lines.append(f"{'prng':<12} {'mean AC':>8} {'mean NSD':>9}")
    for rep in reports:
        lines.append(f"{rep.prng.value:<12} {rep.mean_ac:>8.4f} {rep.mean_nsd:>9.2f}")
    return "\n".join(lines)
