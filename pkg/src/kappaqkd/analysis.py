"""Fold a session's records and Eve's predictions into a report."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .adversary import analytic_eve_accuracy, eve_accuracy, forced_round_probability, mutual_information
from .dynamics import BACKEND
from .errors import InsufficientData
from .protocol import SessionConfig, chsh, sift
from .sampling import generator_metadata
from .stats import binomial_ci, qber

__all__ = ["SessionReport", "binomial_ci", "qber", "summarize", "config_echo"]


@dataclass
class SessionReport:
    n_rounds: int
    n_test: int
    n_key: int
    n_committed: int
    key_length: int
    qber: float | None
    chsh_S: float | None
    chsh_stderr: float | None
    chsh_correlators: dict | None
    eve_accuracy: float | None
    eve_accuracy_ci: list | None
    eve_forced_accuracy: float | None
    eve_unforced_accuracy: float | None
    eve_accuracy_expected: float | None
    eve_mutual_information: float | None
    forced_round_fraction: float | None
    forced_round_fraction_ci: list | None
    forced_round_fraction_expected: float
    adversary: str
    config: dict
    generator: dict
    notes: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def config_echo(cfg: SessionConfig) -> dict:
    d = dataclasses.asdict(cfg)
    return {
        "physics": d["physics"],
        "integrator": d["integrator"],
        "session": {k: d[k] for k in ("n_rounds", "test_fraction", "kappa_magnitude", "seed", "flip_kappa", "max_retries")},
    }


def summarize(records, predictions, cfg: SessionConfig, adversary: str = "none") -> SessionReport:
    """Aggregate one session.

    Metrics that need more data than the session holds (CHSH below 100
    rounds per setting pair, mutual information below 1000 key bits) are
    reported as ``None`` with a note, so small sessions still yield a QBER.
    """
    records = sorted(records, key=lambda r: r.round_index)
    notes = []
    n_test = sum(r.round_type == "test" for r in records)
    n_key = len(records) - n_test
    key = sift(records)

    q = qber(key.alice_bits, key.bob_bits) if len(key) else None

    S = se = corr = None
    try:
        res = chsh(records)
        S, se = res.S, res.stderr
        corr = {f"{a.label},{b.label}": e for (a, b), e in res.correlators.items()}
    except InsufficientData as exc:
        notes.append(f"chsh not computed: {exc}")

    hidden = [r.hidden for r in records if r.round_type == "key" and r.committed and r.hidden is not None]
    forced_frac = forced_ci = None
    if hidden:
        z = np.array([(h.z1, h.z2) for h in hidden])
        n_forced = int(np.count_nonzero(cfg.kappa_magnitude * np.abs(z[:, 1]) < np.abs(z[:, 0])))
        forced_frac = n_forced / len(hidden)
        forced_ci = list(binomial_ci(n_forced, len(hidden)))

    acc = acc_ci = facc = uacc = mi = expected = None
    if predictions and len(key):
        stats = eve_accuracy(predictions, key)
        acc, acc_ci = stats.accuracy, list(stats.ci)
        facc, uacc = stats.forced_accuracy, stats.unforced_accuracy
        by_round = {p.round_index: p.predicted_alice_bit for p in predictions}
        guesses = np.array([by_round[int(i)] for i in key.round_indices], dtype=np.uint8)
        try:
            mi = mutual_information(guesses, key.alice_bits)
        except InsufficientData as exc:
            notes.append(f"mutual information not computed: {exc}")
        if adversary == "hidden-variable" and cfg.flip_kappa:
            expected = analytic_eve_accuracy(cfg.kappa_magnitude)
        else:
            expected = 1.0

    generator = dict(generator_metadata(), kernel_backend=BACKEND)
    return SessionReport(
        n_rounds=len(records),
        n_test=n_test,
        n_key=n_key,
        n_committed=sum(r.committed for r in records if r.round_type == "key"),
        key_length=len(key),
        qber=q,
        chsh_S=S,
        chsh_stderr=se,
        chsh_correlators=corr,
        eve_accuracy=acc,
        eve_accuracy_ci=acc_ci,
        eve_forced_accuracy=facc,
        eve_unforced_accuracy=uacc,
        eve_accuracy_expected=expected,
        eve_mutual_information=mi,
        forced_round_fraction=forced_frac,
        forced_round_fraction_ci=forced_ci,
        forced_round_fraction_expected=forced_round_probability(cfg.kappa_magnitude),
        adversary=adversary,
        config=config_echo(cfg),
        generator=generator,
        notes=notes,
    )


def sigma_distance(value: float, expected: float, n: int) -> float:
    """|value - expected| in units of the binomial standard deviation at ``expected``."""
    sd = math.sqrt(expected * (1.0 - expected) / n)
    return abs(value - expected) / sd if sd > 0 else (0.0 if value == expected else math.inf)
