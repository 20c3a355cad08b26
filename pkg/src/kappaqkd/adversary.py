"""Eavesdropper models and their scoring.

Three Eves are modelled:

* the hidden-variable Eve, who reads ``(z1, z2)`` at t=0 exactly but not the
  sign of Bob's kappa;
* the same Eve with the kappa sign leaked (sanity check, always right);
* a quantum intercept-resend Eve who measures particle 2 along z and forwards
  the eigenstate she found.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    HiddenState,
    IntegratorConfig,
    Kappa,
    PhysicalParams,
    analytic_outcome,
    integrate_pair,
    single_particle_outcome,
)
from .errors import InsufficientData, LengthMismatch
from .sampling import SeedSpec, StreamFactory, StreamLabel
from .stats import binomial_ci

ADVERSARY_MODELS = ("none", "hidden-variable", "hidden-variable-with-kappa", "intercept-resend")


def to_bit(outcome: int) -> int:
    """+1 -> 1, -1 -> 0."""
    return 1 if outcome > 0 else 0


@dataclass(frozen=True)
class EveKnowledge:
    knows_hidden: bool = True
    knows_kappa_sign: bool = False
    knows_kappa_magnitude: bool = True


THREAT_MODEL = EveKnowledge()


@dataclass(frozen=True)
class EvePrediction:
    round_index: int
    predicted_alice_bit: int
    predicted_bob_bit: int
    is_forced: bool


def _coin(rng: np.random.Generator) -> int:
    return 1 if rng.random() < 0.5 else 0


def eve_predict_key_round(
    hidden: HiddenState,
    kappa_magnitude: float,
    knowledge: EveKnowledge = THREAT_MODEL,
    rng: np.random.Generator | None = None,
    *,
    round_index: int = 0,
    kappa_sign: int | None = None,
    params: PhysicalParams | None = None,
    integrator: IntegratorConfig | None = None,
) -> EvePrediction:
    """Eve's guess of both raw key bits of one (C, +-C) round.

    She evaluates the outcome under both kappa hypotheses.  When both give
    the same Alice spin (``|kappa z2| < |z1|``) the round is *forced* and she
    is certain; otherwise she flips a coin.  Bob's raw bit is the same under
    both hypotheses exactly when the round is not forced.  ``kappa_sign`` is
    only consulted when ``knowledge.knows_kappa_sign`` is set.  Passing an
    ``integrator`` makes her integrate the trajectories instead of using the
    closed form.
    """
    if rng is None:
        rng = np.random.default_rng()
    if not knowledge.knows_hidden:
        return EvePrediction(round_index, _coin(rng), _coin(rng), False)

    def outcome(sign):
        kappa = Kappa(kappa_magnitude, sign)
        if integrator is not None:
            res = integrate_pair(hidden, kappa, params or PhysicalParams(), integrator)
            return res.outcome_alice, res.outcome_bob
        return analytic_outcome(hidden, kappa)

    a_plus, b_plus = outcome(1)
    a_minus, b_minus = outcome(-1)
    forced = a_plus == a_minus
    if knowledge.knows_kappa_sign:
        if kappa_sign not in (1, -1):
            raise ValueError("kappa_sign must be given when Eve knows it")
        a, b = (a_plus, b_plus) if kappa_sign == 1 else (a_minus, b_minus)
        return EvePrediction(round_index, to_bit(a), to_bit(b), forced)
    alice_bit = to_bit(a_plus) if forced else _coin(rng)
    bob_bit = to_bit(b_plus) if b_plus == b_minus else _coin(rng)
    return EvePrediction(round_index, alice_bit, bob_bit, forced)


@dataclass(frozen=True)
class EveAccuracy:
    accuracy: float
    ci: tuple[float, float]
    n: int
    n_correct: int
    forced_n: int
    forced_accuracy: float | None
    forced_ci: tuple[float, float] | None
    unforced_n: int
    unforced_accuracy: float | None
    unforced_ci: tuple[float, float] | None


def eve_accuracy(predictions, key, confidence: float = 0.95) -> EveAccuracy:
    """Score Eve's Alice-bit guesses against the sifted key.

    Rounds are matched by index; key rounds without a prediction are ignored.
    """
    by_round = {p.round_index: p for p in predictions}
    hits = []
    forced = []
    for idx, bit in zip(key.round_indices, key.alice_bits):
        p = by_round.get(int(idx))
        if p is None:
            continue
        hits.append(p.predicted_alice_bit == int(bit))
        forced.append(p.is_forced)
    if not hits:
        raise InsufficientData("no predictions overlap the sifted key")
    hits = np.array(hits)
    forced = np.array(forced)

    def part(mask):
        n = int(mask.sum())
        if n == 0:
            return 0, None, None
        k = int(hits[mask].sum())
        return n, k / n, binomial_ci(k, n, confidence)

    fn, facc, fci = part(forced)
    un, uacc, uci = part(~forced)
    k = int(hits.sum())
    return EveAccuracy(k / len(hits), binomial_ci(k, len(hits), confidence), len(hits), k, fn, facc, fci, un, uacc, uci)


def forced_round_probability(kappa_magnitude: float) -> float:
    """P(|kappa z2| < |z1|) for iid centred Gaussians: (2/pi) atan(1/|kappa|)."""
    if kappa_magnitude <= 0:
        raise ValueError("kappa_magnitude must be > 0")
    return 2.0 / math.pi * math.atan(1.0 / kappa_magnitude)


def analytic_eve_accuracy(kappa_magnitude: float) -> float:
    """Expected Alice-bit accuracy of the threat-model Eve: 0.5 + atan(1/|kappa|)/pi."""
    return 0.5 + 0.5 * forced_round_probability(kappa_magnitude)


def intercept_resend_round(alpha: float, beta: float, rng: np.random.Generator, return_eve: bool = False):
    """Outcomes of one singlet pair when Eve measures particle 2 along z.

    Eve's result ``e`` is +-1 with equal probability; Alice's particle is left
    in the ``-e`` state and Bob receives the ``e`` eigenstate.
    """
    e = 1 if rng.random() < 0.5 else -1
    a = 1 if rng.random() < (1.0 - e * math.cos(alpha)) / 2.0 else -1
    b = 1 if rng.random() < (1.0 + e * math.cos(beta)) / 2.0 else -1
    if return_eve:
        return a, b, e
    return a, b


def mutual_information(guesses, key) -> float:
    """Plug-in estimate of I(guess; key) in bits from the 2x2 frequency table."""
    g = np.asarray(guesses, dtype=np.int64).ravel()
    k = np.asarray(key, dtype=np.int64).ravel()
    if g.shape != k.shape:
        raise LengthMismatch(f"guesses has {g.size} symbols, key has {k.size}")
    if g.size < 1000:
        raise InsufficientData(f"need at least 1000 symbols, got {g.size}")
    if not (np.isin(g, (0, 1)).all() and np.isin(k, (0, 1)).all()):
        raise ValueError("bit strings must contain only 0 and 1")
    joint = np.bincount(2 * g + k, minlength=4).reshape(2, 2) / g.size
    pg = joint.sum(axis=1, keepdims=True)
    pk = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(max(0.0, np.sum(joint[nz] * np.log2(joint[nz] / (pg @ pk)[nz]))))


@dataclass(frozen=True)
class BB84DemoResult:
    n_rounds: int
    n_sifted: int
    eve_accuracy: float
    eve_accuracy_ci: tuple[float, float]
    qber: float


def run_bb84_demo(
    n_rounds: int,
    params: PhysicalParams,
    seed: int,
    knows_hidden: bool = True,
) -> BB84DemoResult:
    """Single-particle BB84 where every outcome is fixed by the particle's z0.

    Alice sends bit ``x`` in basis Z or X, Bob measures in a random basis.
    Bob's result is :func:`single_particle_outcome` of the particle's z0 with
    the Born probability for his basis.  An Eve who knows z0 (and the pilot
    wave) applies the same rule once the bases are announced; a blind Eve
    guesses.  Accuracy is scored on the sifted key.
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    base = SeedSpec(seed)
    prep = StreamFactory(base.with_label(StreamLabel.KEY_PHYSICS))
    eve = StreamFactory(base.with_label(StreamLabel.EVE))
    hits = 0
    errors = 0
    n_sifted = 0
    for i in range(n_rounds):
        rng = prep(i)
        bit, alice_basis, bob_basis = (int(v) for v in rng.integers(0, 2, size=3))
        z0 = float(rng.standard_normal()) * params.halfwidth
        p_up = float(bit) if alice_basis == bob_basis else 0.5
        bob = single_particle_outcome(z0, p_up, params.halfwidth)
        if knows_hidden:
            guess = to_bit(single_particle_outcome(z0, p_up, params.halfwidth))
        else:
            guess = _coin(eve(i))
        if alice_basis != bob_basis:
            continue
        n_sifted += 1
        hits += guess == bit
        errors += to_bit(bob) != bit
    if n_sifted == 0:
        raise InsufficientData("no rounds survived sifting")
    return BB84DemoResult(n_rounds, n_sifted, hits / n_sifted, binomial_ci(hits, n_sifted), errors / n_sifted)
