"""Command-line front end.

    fallingballs simulate    --masses 2,1 --seed 0 --events 1000 --out log.jsonl
    fallingballs lyapunov    --masses 2,1 --seeds 0,1,2 --events 100000
    fallingballs sufficiency --sequence 1-2,0-1 --masses 2/1,1/1
    fallingballs scan        --n 3 --ratios 0.5,0.7,0.9 --seeds 0,1 --jobs 2
    fallingballs cone-check  --masses 3,2,1 --seed 0 --events 50
    fallingballs verify

Every option can also come from a JSON file given with ``--config``; flags on
the command line win. Exit status: 0 ok, 2 bad configuration, 3 singular
trajectory (partial output is still written), 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from .dynamics import (
    MassVector,
    PhaseState,
    Tolerances,
    format_number,
    sample_state,
    simulate,
)
from .errors import DomainError, FallingBallsError, PreconditionViolated, SimulationError

OUT_DIR_ENV = "FALLINGBALLS_OUT_DIR"

EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_VERIFY = 4

DEFAULTS = {
    "seed": 0,
    "events": None,
    "time": None,
    "jobs": 1,
    "renorm_every": 1,
    "energy_renorm": 0,
    "trials": 8,
    "ratios": "0.5,0.7,0.9",
    "seeds": None,
    "onset_events": 10000,
    "blocks": 10,
}

TOL_NAMES = ("sing", "graze", "ord", "energy")


class ConfigError(Exception):
    pass


# where and how fast a run executes does not change its results
EXECUTION_KEYS = ("out", "jobs")


def config_hash(cfg: dict) -> str:
    cfg = {k: v for k, v in cfg.items() if k not in EXECUTION_KEYS}
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _common(p):
    p.add_argument("--config", help="JSON file with any of these options")
    p.add_argument("--masses", help="comma separated, e.g. 2,1 or 3/2,1/2")
    p.add_argument("--seed", type=int)
    p.add_argument("--events", type=int)
    p.add_argument("--time", type=float)
    p.add_argument("--out", help="output file (default: stdout or $%s)" % OUT_DIR_ENV)
    p.add_argument("--jobs", type=int)
    for name in TOL_NAMES:
        p.add_argument(f"--tol-{name}", type=float, dest=f"tol_{name}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fallingballs", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="event log as JSON lines")
    _common(p)
    p.add_argument("--state", help="explicit start 'q1,..,qn;v1,..,vn' instead of a sampled one")
    p.add_argument("--energy-renorm", type=int, dest="energy_renorm",
                   help="rescale to H=1 every k events (0 = off)")

    p = sub.add_parser("lyapunov", help="Lyapunov spectra as CSV")
    _common(p)
    p.add_argument("--seeds", help="comma separated seed list (default: --seed)")
    p.add_argument("--renorm-every", type=int, dest="renorm_every")
    p.add_argument("--blocks", type=int)

    p = sub.add_parser("sufficiency", help="neutral space / dichotomy verdicts")
    _common(p)
    p.add_argument("--sequence", action="append", help="e.g. 1-2,0-1 (repeatable)")
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("scan", help="sufficiency onset and spectrum over a mass grid")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--ratios", help="geometric mass ratios r, masses r**(i-1)")
    p.add_argument("--seeds")
    p.add_argument("--onset-events", type=int, dest="onset_events")

    p = sub.add_parser("cone-check", help="strict cone invariance over a simulated segment")
    _common(p)
    p.add_argument("--state")

    p = sub.add_parser("verify", help="run the oracle suites")
    _common(p)
    return ap


def resolve(args: argparse.Namespace) -> dict:
    """Merge command line, config file and defaults into one serialisable dict."""
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        cmd = cfg.pop("command", args.command)
        if cmd != args.command:
            raise ConfigError(f"config is for {cmd!r}, not {args.command!r}")
    merged = dict(DEFAULTS)
    merged.update(cfg)
    for k, v in vars(args).items():
        if k in ("config",):
            continue
        if v is not None:
            merged[k] = v
    merged["command"] = args.command
    return {k: v for k, v in sorted(merged.items()) if v is not None}


def tolerances(cfg) -> Tolerances:
    kw = {name: float(cfg[f"tol_{name}"]) for name in TOL_NAMES if f"tol_{name}" in cfg}
    return Tolerances(**kw)


def parse_masses(cfg, required=True, **kw):
    text = cfg.get("masses")
    if text is None:
        if required:
            raise ConfigError("--masses is required")
        return None
    try:
        return MassVector.parse(str(text), **kw)
    except (ValueError, ZeroDivisionError, DomainError) as exc:
        raise ConfigError(f"bad masses {text!r}: {exc}") from None


def parse_state(text, n):
    try:
        qs, vs = text.split(";")
        q = [float(x) for x in qs.split(",")]
        v = [float(x) for x in vs.split(",")]
    except ValueError:
        raise ConfigError(f"bad state {text!r}; expected 'q1,..;v1,..'") from None
    if len(q) != n or len(v) != n:
        raise ConfigError(f"state needs {n} positions and {n} velocities")
    return PhaseState(q, v, 0.0)


def initial_state(cfg, masses):
    if cfg.get("state"):
        return parse_state(cfg["state"], masses.n)
    return sample_state(masses, np.random.default_rng(int(cfg["seed"])))


def seed_list(cfg):
    if cfg.get("seeds") is None:
        return [int(cfg["seed"])]
    if isinstance(cfg["seeds"], list):
        return [int(s) for s in cfg["seeds"]]
    return [int(s) for s in str(cfg["seeds"]).split(",") if s.strip()]


@contextmanager
def output(cfg, suffix):
    path = cfg.get("out")
    if path is None and os.environ.get(OUT_DIR_ENV):
        path = os.path.join(os.environ[OUT_DIR_ENV], f"{cfg['command']}{suffix}")
    if path is None:
        yield sys.stdout
        return
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


# -- subcommands ------------------------------------------------------------

def cmd_simulate(cfg, h):
    masses = parse_masses(cfg)
    state = initial_state(cfg, masses)
    if cfg.get("events") is None and cfg.get("time") is None:
        raise ConfigError("give --events or --time")
    code = 0
    try:
        traj = simulate(state, masses, max_collisions=cfg.get("events"), max_time=cfg.get("time"),
                        tol=tolerances(cfg), renormalize_every=int(cfg["energy_renorm"]))
    except SimulationError as exc:
        traj = exc.partial
        code = EXIT_SINGULAR
        print(f"fallingballs: {exc}", file=sys.stderr)
    with output(cfg, ".jsonl") as fh:
        for k in range(len(traj)):
            fh.write(_dump({"k": k + 1, "t_k": float(traj.times[k]), "i_k": int(traj.labels[k]),
                            "rho_k": float(traj.rhos[k]), "H_after": float(traj.energies[k]),
                            "config": h}) + "\n")
    return code


def _lyapunov_row(args):
    from .spectrum import lyapunov_spectrum
    masses_text, seed, events, renorm, blocks, tol = args
    masses = MassVector.parse(masses_text, ordered=False)
    x0 = sample_state(masses, np.random.default_rng(seed))
    try:
        rep = lyapunov_spectrum(x0, masses, events, renorm_every=renorm, seed=seed,
                                n_blocks=blocks, tol=tol)
        flags = rep.identification
    except SimulationError as exc:
        rep = exc.partial
        flags = f"{rep.identification};{rep.status}"
    return seed, rep, flags


def _pool_map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_lyapunov(cfg, h):
    masses = parse_masses(cfg, ordered=False)
    if cfg.get("events") is None:
        raise ConfigError("--events is required")
    items = [(masses.format(), s, int(cfg["events"]), int(cfg["renorm_every"]), int(cfg["blocks"]),
              tolerances(cfg)) for s in seed_list(cfg)]
    rows = _pool_map(_lyapunov_row, items, int(cfg["jobs"]))
    n2 = 2 * masses.n
    code = 0
    with output(cfg, ".csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "n_collisions", "total_time"] + [f"lambda_{k + 1}" for k in range(n2)]
                   + ["pairing_residual", "flags", "config"])
        for seed, rep, flags in rows:
            if ";" in flags:
                code = EXIT_SINGULAR
            w.writerow([seed, rep.collisions, repr(rep.total_time)]
                       + [repr(float(x)) for x in rep.exponents]
                       + [repr(rep.pairing_residual), flags, h])
    return code


def cmd_sufficiency(cfg, h):
    from .sufficiency import SymbolicSequence, classify_sequence, neutral_space
    texts = cfg.get("sequence")
    if not texts:
        raise ConfigError("--sequence is required")
    if isinstance(texts, str):
        texts = [texts]
    masses = parse_masses(cfg, required=False)
    with output(cfg, ".jsonl") as fh:
        for text in texts:
            try:
                n = masses.n if masses is not None else cfg.get("n")
                seq = SymbolicSequence.parse(text, n=n)
            except DomainError as exc:
                raise ConfigError(str(exc)) from None
            row = {"sequence": seq.format(), "n": seq.n, "config": h}
            if masses is not None:
                row["masses"] = masses.format()
                try:
                    rep = neutral_space(seq, masses)
                    row.update(dimension=rep.dimension, sufficient=rep.sufficient,
                               basis=[[format_number(x) for x in b] for b in rep.basis])
                except PreconditionViolated as exc:
                    row.update(sufficient=False, error=str(exc))
            else:
                c = classify_sequence(seq, trials=int(cfg["trials"]), seed=int(cfg["seed"]))
                row.update(verdict=c.verdict, certified=c.certified, trials=c.trials, reason=c.reason)
                if c.witness is not None:
                    row["witness"] = c.witness.format()
            fh.write(_dump(row) + "\n")
    return 0


def _scan_cell(args):
    from .spectrum import lyapunov_spectrum, sufficiency_onset
    idx, n, ratio, seed, events, onset_events, tol = args
    masses = MassVector(tuple(Fraction(ratio).limit_denominator(10 ** 6) ** k for k in range(n)),
                        strict=True)
    x0 = sample_state(masses, np.random.default_rng(seed))
    row = {"index": idx, "ratio": ratio, "seed": seed, "masses": masses.format(),
           "onset": "", "top_exponent": "", "pairing_residual": "", "status": "ok"}
    try:
        onset = sufficiency_onset(x0, masses, onset_events, tol=tol)
        row["onset"] = "" if onset is None else onset
        if events:
            rep = lyapunov_spectrum(x0, masses, events, seed=seed, tol=tol)
            row["top_exponent"] = repr(rep.top)
            row["pairing_residual"] = repr(rep.pairing_residual)
    except SimulationError as exc:
        row["status"] = type(exc).__name__
    return row


def cmd_scan(cfg, h):
    n = int(cfg.get("n", 3))
    ratios = [float(r) for r in str(cfg["ratios"]).split(",") if r.strip()]
    if any(not 0 < r < 1 for r in ratios):
        raise ConfigError("ratios must lie in (0, 1)")
    events = int(cfg["events"]) if cfg.get("events") is not None else 0
    items = []
    for r in ratios:
        for s in seed_list(cfg):
            items.append((len(items), n, r, s, events, int(cfg["onset_events"]), tolerances(cfg)))
    rows = _pool_map(_scan_cell, items, int(cfg["jobs"]))
    rows.sort(key=lambda r: r["index"])
    cols = ["index", "ratio", "seed", "masses", "onset", "top_exponent", "pairing_residual",
            "status", "config"]
    with output(cfg, ".csv") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(dict(row, config=h))
    return EXIT_SINGULAR if any(r["status"] != "ok" for r in rows) else 0


def cmd_cone_check(cfg, h):
    from .spectrum import strict_invariance_check
    masses = parse_masses(cfg)
    if cfg.get("events") is None:
        raise ConfigError("--events is required")
    state = initial_state(cfg, masses)
    try:
        res = strict_invariance_check(state, masses, int(cfg["events"]), tol=tolerances(cfg))
    except SimulationError as exc:
        print(f"fallingballs: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    with output(cfg, ".json") as fh:
        fh.write(_dump({"strict": res.strict, "neutral_dim_h": res.neutral_dim_h,
                        "neutral_dim_v": res.neutral_dim_v, "sequence": res.sequence.format(),
                        "reason": res.reason, "config": h}) + "\n")
    return 0


def cmd_verify(cfg, h):
    from .verify import run_suites
    buf = io.StringIO()
    ok = run_suites(buf, seed=int(cfg["seed"]))
    with output(cfg, ".txt") as fh:
        fh.write(buf.getvalue())
    return 0 if ok else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "lyapunov": cmd_lyapunov,
    "sufficiency": cmd_sufficiency,
    "scan": cmd_scan,
    "cone-check": cmd_cone_check,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, config_hash(cfg))
    except ConfigError as exc:
        print(f"fallingballs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FallingBallsError, ValueError) as exc:
        print(f"fallingballs: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
