"""Ekert-style session with Bob's secret kappa switch.

Test rounds use the four CHSH settings (A, A') x (B, B') and draw outcomes
from ideal singlet statistics.  Key rounds use Alice's C against Bob's C
(kappa > 0) or -C (kappa < 0) and are computed from the Bohmian trajectories.
Every random choice of round ``i`` comes from stream ``i`` of its role, so a
session can be split across workers without changing a single draw.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .adversary import (
    ADVERSARY_MODELS,
    EveKnowledge,
    EvePrediction,
    eve_predict_key_round,
    intercept_resend_round,
    to_bit,
)
from .dynamics import HiddenState, IntegratorConfig, PhysicalParams, integrate_batch
from .errors import CommitmentFailure, ConfigError, InsufficientData
from .sampling import SeedSpec, StreamFactory, StreamLabel, draw_state


class Setting(Enum):
    A = ("alice", 0.0)
    A_PRIME = ("alice", math.pi / 2)
    B = ("bob", math.pi / 4)
    B_PRIME = ("bob", 3 * math.pi / 4)
    C = ("both", 0.0)
    MINUS_C = ("bob", 0.0)

    @property
    def party(self) -> str:
        return self.value[0]

    @property
    def angle(self) -> float:
        """Analyser angle in the x-z plane, measured from z."""
        return self.value[1]

    @property
    def label(self) -> str:
        return {"A": "A", "A_PRIME": "A'", "B": "B", "B_PRIME": "B'", "C": "C", "MINUS_C": "-C"}[self.name]


ALICE_TEST = (Setting.A, Setting.A_PRIME)
BOB_TEST = (Setting.B, Setting.B_PRIME)
CHSH_PAIRS = [(a, b) for a in ALICE_TEST for b in BOB_TEST]


@dataclass(frozen=True)
class SessionConfig:
    n_rounds: int = 10_000
    test_fraction: float = 0.5
    kappa_magnitude: float = 100.0
    physics: PhysicalParams = field(default_factory=PhysicalParams)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0
    flip_kappa: bool = True
    max_retries: int = 10

    def __post_init__(self):
        if isinstance(self.n_rounds, bool) or not isinstance(self.n_rounds, (int, np.integer)) or self.n_rounds < 1:
            raise ConfigError("session.n_rounds must be an integer >= 1")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("session.test_fraction must lie in (0, 1)")
        if not (math.isfinite(self.kappa_magnitude) and self.kappa_magnitude > 0):
            raise ConfigError("session.kappa_magnitude must be > 0")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError("session.seed must be an integer in [0, 2**64)")
        if self.max_retries < 0:
            raise ConfigError("session.max_retries must be >= 0")

    def seed_spec(self, label: StreamLabel) -> SeedSpec:
        return SeedSpec(int(self.seed), label)


@dataclass(frozen=True)
class RoundPlan:
    round_index: int
    round_type: str
    alice_setting: Setting
    bob_setting: Setting
    kappa_sign: int | None = None


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    round_type: str
    alice_setting: Setting
    bob_setting: Setting
    kappa_sign: int | None
    hidden: HiddenState | None
    outcome_alice: int
    outcome_bob: int
    committed: bool


@dataclass
class SiftedKey:
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    round_indices: np.ndarray

    def __len__(self):
        return len(self.alice_bits)


def plan_round(cfg: SessionConfig, i: int, schedule: StreamFactory, bob: StreamFactory) -> RoundPlan:
    rng = schedule(i)
    u_type, u_a, u_b = rng.random(3)
    if u_type < cfg.test_fraction:
        return RoundPlan(i, "test", ALICE_TEST[int(u_a < 0.5)], BOB_TEST[int(u_b < 0.5)])
    sign = 1
    if cfg.flip_kappa:
        sign = 1 if bob(i).random() < 0.5 else -1
    return RoundPlan(i, "key", Setting.C, Setting.C if sign == 1 else Setting.MINUS_C, sign)


def plan_session(cfg: SessionConfig) -> list[RoundPlan]:
    """Mark each round test or key and draw its settings.

    Test rounds pick A/A' and B/B' uniformly; key rounds draw Bob's kappa
    sign from his private stream (always +1 when ``flip_kappa`` is off).
    """
    schedule = StreamFactory(cfg.seed_spec(StreamLabel.SCHEDULE))
    bob = StreamFactory(cfg.seed_spec(StreamLabel.BOB_KAPPA))
    return [plan_round(cfg, i, schedule, bob) for i in range(cfg.n_rounds)]


def plan_key_rounds(cfg: SessionConfig, n: int | None = None) -> list[RoundPlan]:
    """Plans for ``n`` consecutive key rounds (ensembles and sweeps)."""
    bob = StreamFactory(cfg.seed_spec(StreamLabel.BOB_KAPPA))
    plans = []
    for i in range(cfg.n_rounds if n is None else n):
        sign = (1 if bob(i).random() < 0.5 else -1) if cfg.flip_kappa else 1
        plans.append(RoundPlan(i, "key", Setting.C, Setting.C if sign == 1 else Setting.MINUS_C, sign))
    return plans


def run_key_rounds(plans, cfg: SessionConfig) -> list[RoundRecord]:
    """Simulate a batch of key rounds through the trajectory integrator.

    Each round draws its hidden state from its own physics stream and
    redraws (from the same stream) on a tie or a non-committed trajectory.
    """
    plans = list(plans)
    if any(p.round_type != "key" for p in plans):
        raise ValueError("run_key_rounds accepts key-round plans only")
    if not plans:
        return []
    streams = StreamFactory(cfg.seed_spec(StreamLabel.KEY_PHYSICS))
    rngs = [streams(p.round_index) for p in plans]
    kappa = np.array([p.kappa_sign * cfg.kappa_magnitude for p in plans])
    n = len(plans)
    z = np.empty((n, 2))
    out_a = np.zeros(n, dtype=np.int8)
    out_b = np.zeros(n, dtype=np.int8)
    pending = np.arange(n)
    for _attempt in range(cfg.max_retries + 1):
        for j in pending:
            s = draw_state(rngs[j], cfg.physics)
            z[j] = s.z1, s.z2
        tie = z[pending, 0] - kappa[pending] * z[pending, 1] == 0
        live = pending[~tie]
        res = integrate_batch(z[live, 0], z[live, 1], kappa[live], cfg.physics, cfg.integrator)
        done = live[res.committed]
        out_a[done] = res.outcome_alice[res.committed]
        out_b[done] = res.outcome_bob[res.committed]
        pending = np.concatenate([pending[tie], live[~res.committed]])
        pending.sort()
        if pending.size == 0:
            break
    else:
        bad = [plans[j].round_index for j in pending]
        raise CommitmentFailure(
            f"rounds {bad[:5]} did not commit after {cfg.max_retries} retries; "
            "increase integrator.t_end or lower commitment_margin"
        )
    return [
        RoundRecord(p.round_index, "key", p.alice_setting, p.bob_setting, p.kappa_sign,
                    HiddenState(float(z[j, 0]), float(z[j, 1])), int(out_a[j]), int(out_b[j]), True)
        for j, p in enumerate(plans)
    ]


def run_key_round(plan: RoundPlan, cfg: SessionConfig) -> RoundRecord:
    return run_key_rounds([plan], cfg)[0]


def run_test_round(plan: RoundPlan, rng: np.random.Generator) -> RoundRecord:
    """Draw singlet outcomes with P(a, b) = (1 - a b cos(alpha - beta)) / 4."""
    if plan.round_type != "test":
        raise ValueError("run_test_round needs a test-round plan")
    c = math.cos(plan.alice_setting.angle - plan.bob_setting.angle)
    u_a, u_b = rng.random(2)
    a = 1 if u_a < 0.5 else -1
    b = -a if u_b < (1.0 + c) / 2.0 else a
    return RoundRecord(plan.round_index, "test", plan.alice_setting, plan.bob_setting, None, None, a, b, True)


def run_intercepted_round(plan: RoundPlan, rng: np.random.Generator) -> tuple[RoundRecord, int]:
    """A round whose particle 2 was measured along z and resent; returns Eve's z result too.

    On key rounds Bob's -C device has its field reversed, so his recorded
    spin is multiplied by the kappa sign.
    """
    if plan.round_type == "test":
        a, b, e = intercept_resend_round(plan.alice_setting.angle, plan.bob_setting.angle, rng, return_eve=True)
        return RoundRecord(plan.round_index, "test", plan.alice_setting, plan.bob_setting, None, None, a, b, True), e
    a, b, e = intercept_resend_round(0.0, 0.0, rng, return_eve=True)
    b *= plan.kappa_sign
    return RoundRecord(plan.round_index, "key", plan.alice_setting, plan.bob_setting, plan.kappa_sign, None, a, b, True), e


def sift(records) -> SiftedKey:
    """Turn committed key rounds into Alice's key and Bob's reconstruction of it.

    Alice's bit is her spin (+1 -> 1).  Bob flips his own bit on kappa > 0
    rounds (parallel fields, anticorrelated spins) and keeps it on kappa < 0.
    """
    keys = sorted((r for r in records if r.round_type == "key" and r.committed), key=lambda r: r.round_index)
    alice = np.array([to_bit(r.outcome_alice) for r in keys], dtype=np.uint8)
    bob = np.array([to_bit(r.outcome_bob) ^ (r.kappa_sign == 1) for r in keys], dtype=np.uint8)
    return SiftedKey(alice, bob, np.array([r.round_index for r in keys], dtype=np.int64))


@dataclass(frozen=True)
class ChshResult:
    S: float
    stderr: float
    correlators: dict
    counts: dict


def chsh(records, min_per_pair: int = 100) -> ChshResult:
    """S = |E(A,B) - E(A,B') + E(A',B) + E(A',B')| from the test rounds.

    Each correlator's standard error is ``sqrt((1 - E^2) / n)``; they are
    combined in quadrature.
    """
    prods = {pair: [] for pair in CHSH_PAIRS}
    for r in records:
        if r.round_type == "test":
            prods[(r.alice_setting, r.bob_setting)].append(r.outcome_alice * r.outcome_bob)
    E, var, counts = {}, 0.0, {}
    for pair, values in prods.items():
        n = len(values)
        counts[pair] = n
        if n < min_per_pair:
            raise InsufficientData(f"setting pair ({pair[0].label},{pair[1].label}) has {n} rounds, need {min_per_pair}")
        e = float(np.mean(values))
        E[pair] = e
        var += (1.0 - e * e) / n
    S = abs(
        E[(Setting.A, Setting.B)] - E[(Setting.A, Setting.B_PRIME)]
        + E[(Setting.A_PRIME, Setting.B)] + E[(Setting.A_PRIME, Setting.B_PRIME)]
    )
    return ChshResult(S, math.sqrt(var), E, counts)


def eve_knowledge_for(model: str, cfg: SessionConfig) -> EveKnowledge | None:
    if model not in ADVERSARY_MODELS:
        raise ConfigError(f"unknown adversary model {model!r}; expected one of {ADVERSARY_MODELS}")
    if model in ("none", "intercept-resend"):
        return None
    # a kappa that never flips is public knowledge
    return EveKnowledge(knows_hidden=True, knows_kappa_sign=model == "hidden-variable-with-kappa" or not cfg.flip_kappa)


@dataclass
class SessionOutcome:
    records: list
    predictions: list


def run_plans(plans, cfg: SessionConfig, adversary: str = "none", eve_integrates: bool = False) -> SessionOutcome:
    """Execute a list of round plans; results depend only on each plan's round index."""
    knowledge = eve_knowledge_for(adversary, cfg)
    test_streams = StreamFactory(cfg.seed_spec(StreamLabel.TEST_SAMPLING))
    eve_streams = StreamFactory(cfg.seed_spec(StreamLabel.EVE))
    records, predictions = [], []
    key_plans = [p for p in plans if p.round_type == "key"]
    if adversary == "intercept-resend":
        for p in plans:
            rec, e = run_intercepted_round(p, eve_streams(p.round_index))
            records.append(rec)
            if p.round_type == "key":
                # Alice holds the -e eigenstate; Bob's raw spin is e on C and -e on -C
                predictions.append(EvePrediction(p.round_index, to_bit(-e), to_bit(rec.outcome_bob), False))
    else:
        records.extend(run_test_round(p, test_streams(p.round_index)) for p in plans if p.round_type == "test")
        key_records = run_key_rounds(key_plans, cfg)
        records.extend(key_records)
        if knowledge is not None:
            integ = cfg.integrator if eve_integrates else None
            for r in key_records:
                predictions.append(eve_predict_key_round(
                    r.hidden, cfg.kappa_magnitude, knowledge, eve_streams(r.round_index),
                    round_index=r.round_index, kappa_sign=r.kappa_sign,
                    params=cfg.physics, integrator=integ,
                ))
    records.sort(key=lambda r: r.round_index)
    predictions.sort(key=lambda p: p.round_index)
    return SessionOutcome(records, predictions)


def _chunks(seq, n_chunks):
    size = max(1, math.ceil(len(seq) / n_chunks))
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def run_session(
    cfg: SessionConfig,
    adversary: str = "none",
    workers: int = 1,
    plans: list[RoundPlan] | None = None,
    eve_integrates: bool = False,
) -> SessionOutcome:
    """Plan and execute a full session, optionally across worker processes.

    The merged output is ordered by round index and is identical for any
    ``workers`` value.
    """
    eve_knowledge_for(adversary, cfg)
    if plans is None:
        plans = plan_session(cfg)
    if workers <= 1 or len(plans) < 2:
        return run_plans(plans, cfg, adversary, eve_integrates)
    parts = _chunks(plans, workers * 4)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_plans, parts, [cfg] * len(parts), [adversary] * len(parts),
                                [eve_integrates] * len(parts)))
    records = sorted((r for res in results for r in res.records), key=lambda r: r.round_index)
    predictions = sorted((p for res in results for p in res.predictions), key=lambda p: p.round_index)
    return SessionOutcome(records, predictions)
