"""Command-line front end.

    kappaqkd trajectory --z1 0.3 --z2 -0.2 --kappa 1
    kappaqkd ensemble   --kappa -10 --samples 10000
    kappaqkd protocol   --config run.json --rounds-csv rounds.csv
    kappaqkd sweep      --kappas 1,10,100,1000
    kappaqkd bb84-demo

Exit codes: 0 success, 2 configuration error, 3 physics/commitment error,
4 I/O error.  Reports are JSON, series are CSV; floats carry 17 significant
digits.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time

import numpy as np

from . import __version__
from .adversary import (
    THREAT_MODEL,
    analytic_eve_accuracy,
    eve_accuracy,
    eve_predict_key_round,
    run_bb84_demo,
)
from .analysis import summarize
from .config import RunConfig, load_config
from .dynamics import (
    BACKEND,
    HiddenState,
    Kappa,
    analytic_outcome_batch,
    epsilon,
    integrate_batch,
    integrate_pair,
)
from .errors import CommitmentFailure, ConfigError, NotCommitted
from .protocol import plan_key_rounds, run_key_rounds, run_session, sift
from .sampling import SeedSpec, StreamFactory, StreamLabel, generator_metadata, sample_equilibrium_array

log = logging.getLogger("kappaqkd")

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4


# ---------------------------------------------------------------- output

def fmt_float(x: float) -> str:
    return format(x, ".17g")


def to_json(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits; NaN/inf become null."""

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return fmt_float(float(o)) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def emit(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- experiments

def trajectory_rows(cfg: RunConfig, z1: float, z2: float, kappa: float):
    """Rows (t, z1, z2, epsilon, tanh_argument_sign) and the committed flag."""
    k = Kappa.from_value(kappa)
    res = integrate_pair(HiddenState(z1, z2), k, cfg.physics, cfg.integrator)
    # the tanh argument is (positive factor) * t * (z1 - kappa z2); report the sign of the latter,
    # which is also the argument's sign for every t > 0
    u = res.z1_path - k.value * res.z2_path
    arg_sign = np.sign(u).astype(int)
    eps = epsilon(res.times, cfg.physics)
    rows = list(zip(res.times.tolist(), res.z1_path.tolist(), res.z2_path.tolist(), eps.tolist(), arg_sign.tolist()))
    return rows, res


def run_ensemble(cfg: RunConfig, kappa: float, n: int) -> dict:
    """Outcome statistics of the integrator over ``n`` equilibrium samples at one kappa."""
    k = Kappa.from_value(kappa)
    z = sample_equilibrium_array(n, cfg.physics, SeedSpec(cfg.session.seed, StreamLabel.KEY_PHYSICS))
    res = integrate_batch(z[:, 0], z[:, 1], k.value, cfg.physics, cfg.integrator)
    a_or, b_or = analytic_outcome_batch(z[:, 0], z[:, 1], k.value)
    c = res.committed
    nc = int(c.sum())
    a, b = res.outcome_alice[c].astype(float), res.outcome_bob[c].astype(float)
    return {
        "kappa": k.value,
        "n_samples": n,
        "n_committed": nc,
        "committed_fraction": nc / n,
        "p_alice_up": float(np.mean(a > 0)) if nc else None,
        "p_bob_up": float(np.mean(b > 0)) if nc else None,
        "correlation_ab": float(np.mean(a * b)) if nc else None,
        "expected_correlation_ab": -float(k.sign),
        "oracle_agreement": float(np.mean((res.outcome_alice[c] == a_or[c]) & (res.outcome_bob[c] == b_or[c]))) if nc else None,
        "seed": cfg.session.seed,
        "generator": dict(generator_metadata(), kernel_backend=BACKEND),
    }


def run_sweep(cfg: RunConfig, magnitudes, n: int | None = None) -> list[dict]:
    """Threat-model Eve accuracy and Bob-bit invariance for each |kappa|.

    Every row reuses the same seed, so rows differ only through |kappa|.
    Bob-bit invariance compares Bob's integrated spin with the one he would
    have obtained under the opposite kappa sign, over rounds where both
    trajectories commit.
    """
    rows = []
    for m in magnitudes:
        session = dataclasses.replace(cfg.session, kappa_magnitude=float(m))
        plans = plan_key_rounds(session, n)
        records = run_key_rounds(plans, session)
        eve = StreamFactory(session.seed_spec(StreamLabel.EVE))
        preds = [eve_predict_key_round(r.hidden, m, THREAT_MODEL, eve(r.round_index), round_index=r.round_index)
                 for r in records]
        acc = eve_accuracy(preds, sift(records))
        z = np.array([(r.hidden.z1, r.hidden.z2) for r in records])
        signs = np.array([r.kappa_sign for r in records], dtype=float)
        flipped = integrate_batch(z[:, 0], z[:, 1], -signs * m, session.physics, session.integrator)
        bob = np.array([r.outcome_bob for r in records])
        ok = flipped.committed
        invariance = float(np.mean(flipped.outcome_bob[ok] == bob[ok]))
        rows.append({
            "kappa_magnitude": float(m),
            "n_key_rounds": len(records),
            "eve_accuracy": acc.accuracy,
            "analytic_prediction": analytic_eve_accuracy(float(m)),
            "bob_bit_invariance_rate": invariance,
            "analytic_invariance": 2.0 * (1.0 - analytic_eve_accuracy(float(m))),
        })
    return rows


# ---------------------------------------------------------------- commands

def cmd_trajectory(cfg: RunConfig, args) -> int:
    rows, res = trajectory_rows(cfg, args.z1, args.z2, args.kappa)
    emit(to_csv(["t", "z1", "z2", "epsilon", "tanh_argument_sign"], rows), args.out)
    if not res.committed:
        log.error("trajectory did not commit (outcome sign unstable or within margin at t_end)")
        return EXIT_PHYSICS
    log.info("outcomes: alice %+d, bob %+d", res.outcome_alice, res.outcome_bob)
    return EXIT_OK


def cmd_ensemble(cfg: RunConfig, args) -> int:
    n = args.samples or cfg.session.n_rounds
    emit(to_json(run_ensemble(cfg, args.kappa, n)), args.out)
    return EXIT_OK


ROUND_CSV_HEADER = ["round_index", "type", "alice_setting", "bob_setting", "kappa_sign", "z1_0", "z2_0",
                    "outcome_a", "outcome_b", "eve_guess_a", "forced"]


def round_rows(records, predictions):
    by_round = {p.round_index: p for p in predictions}
    for r in records:
        p = by_round.get(r.round_index)
        yield [
            r.round_index, r.round_type, r.alice_setting.label, r.bob_setting.label, r.kappa_sign,
            r.hidden.z1 if r.hidden else None, r.hidden.z2 if r.hidden else None,
            r.outcome_alice, r.outcome_bob,
            p.predicted_alice_bit if p else None, p.is_forced if p else None,
        ]


def cmd_protocol(cfg: RunConfig, args) -> int:
    start = time.perf_counter()
    model = cfg.adversary.model
    out = run_session(cfg.session, model, workers=args.workers, eve_integrates=cfg.adversary.eve_integrates)
    report = summarize(out.records, out.predictions, cfg.session, model)
    log.info("session of %d rounds done in %.1fs", report.n_rounds, time.perf_counter() - start)
    emit(to_json(report.to_dict()), args.out)
    if args.rounds_csv:
        emit(to_csv(ROUND_CSV_HEADER, round_rows(out.records, out.predictions)), args.rounds_csv)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    try:
        mags = [float(v) for v in args.kappas.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--kappas must be a comma-separated list of numbers: {exc}") from exc
    if not mags or any(not (math.isfinite(m) and m > 0) for m in mags):
        raise ConfigError("--kappas needs at least one positive magnitude")
    rows = run_sweep(cfg, mags)
    header = list(rows[0])
    emit(to_csv(header, ([row[h] for h in header] for row in rows)), args.out)
    return EXIT_OK


def cmd_bb84(cfg: RunConfig, args) -> int:
    knows = cfg.adversary.knows_hidden and not args.blind
    res = run_bb84_demo(cfg.session.n_rounds, cfg.physics, cfg.session.seed, knows_hidden=knows)
    doc = dict(dataclasses.asdict(res), eve_accuracy_ci=list(res.eve_accuracy_ci), knows_hidden=knows,
               seed=cfg.session.seed, generator=generator_metadata())
    emit(to_json(doc), args.out)
    return EXIT_OK


COMMANDS = {
    "trajectory": cmd_trajectory,
    "ensemble": cmd_ensemble,
    "protocol": cmd_protocol,
    "sweep": cmd_sweep,
    "bb84-demo": cmd_bb84,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override session.seed")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--quiet", action="store_true", help="suppress log messages")

    ap = argparse.ArgumentParser(prog="kappaqkd", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trajectory", parents=[common], help="integrate one pair and write its time series")
    p.add_argument("--z1", type=float, required=True)
    p.add_argument("--z2", type=float, required=True)
    p.add_argument("--kappa", type=float, default=1.0, help="signed kappa (default 1)")

    p = sub.add_parser("ensemble", parents=[common], help="outcome statistics over equilibrium samples")
    p.add_argument("--kappa", type=float, default=1.0, help="signed kappa (default 1)")
    p.add_argument("--samples", type=int, help="number of samples (default session.n_rounds)")

    p = sub.add_parser("protocol", parents=[common], help="run a full session and write the JSON report")
    p.add_argument("--rounds-csv", metavar="PATH", help="also write one CSV row per round")
    p.add_argument("--workers", type=int, default=1, help="worker processes (output is identical for any value)")

    p = sub.add_parser("sweep", parents=[common], help="Eve accuracy versus |kappa|")
    p.add_argument("--kappas", default="1,10,100,1000", help="comma-separated magnitudes")

    p = sub.add_parser("bb84-demo", parents=[common], help="single-particle BB84 against a hidden-variable Eve")
    p.add_argument("--blind", action="store_true", help="Eve does not know z0")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(name)s: %(message)s",
                        stream=sys.stderr, force=True)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must lie in [0, 2**64)")
            cfg = cfg.with_seed(args.seed)
        if getattr(args, "samples", None) is not None and args.samples < 1:
            raise ConfigError("--samples must be >= 1")
        if getattr(args, "workers", 1) < 1:
            raise ConfigError("--workers must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (CommitmentFailure, NotCommitted) as exc:
        log.error("physics error: %s", exc)
        return EXIT_PHYSICS
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
