"""Command-line runner: ``transchaos {classify,witness,entropy,chain,diagnose}``.

Exit codes: 0 success, 1 configuration error, 2 inconclusive tier evidence,
3 a construction failed (the error class name is printed).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics as D
from . import entropy as E
from . import witness as W
from .config import load_config
from .errors import ConfigError, InconclusiveEvidence, TransChaosError
from .io import write_csv, write_report
from .space import GridFunction, Mode, norm, norm_p, translate
from .weights import certify_admissibility, classify_tier, sup_ratio

EXIT_OK, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_CONSTRUCTION = 0, 1, 2, 3


class Run:
    """Output sink bound to one config: every file gets the hash/seed header."""

    def __init__(self, cfg, out, threads=1):
        self.cfg = cfg
        self.out = Path(out)
        self.threads = threads
        self.summary = {}

    def csv(self, name, columns, rows):
        return write_csv(self.out / name, columns, rows, self.cfg.sha256, self.cfg.seed)

    def report(self, name, payload):
        return write_report(self.out / name, payload, self.cfg.sha256, self.cfg.seed)

    def finish(self, command):
        self.summary = {"command": command, "config_sha256": self.cfg.sha256,
                        "seed": self.cfg.seed, **self.summary}
        return self.report("summary.txt", self.summary)


# -- commands -----------------------------------------------------------------


def cmd_classify(cfg, run):
    sp = cfg.space
    kwargs = {"refine_mixing": cfg.get_bool("classify", "refine_mixing", False)}
    for key in ("tail_fraction", "ratio_threshold", "growth"):
        if cfg.has("classify", key):
            kwargs[key] = cfg.get_float("classify", key)
    code = EXIT_OK
    try:
        rep = classify_tier(cfg.weight, sp.x_max, sp.step, **kwargs)
    except InconclusiveEvidence as exc:
        rep, code = exc.report, EXIT_INCONCLUSIVE
        run.summary["inconclusive"] = str(exc)
    if rep is not None:
        run.report("tier_report.txt", rep.to_dict())
        run.csv("tier_evidence.csv", ("field", "at_H1", "at_H2", "verdict"), rep.evidence_rows())
        run.summary["tier"] = rep.tier.value if rep.tier is not None else "Inconclusive"
        run.summary["chain_ok"] = rep.chain_ok()
    return code


def _escape(cfg, section, a=None):
    sp = cfg.space
    N = cfg.get_int(section, "n", 4)
    cert = certify_admissibility(cfg.weight, sp.x_max, sp.step)
    multiple = W.required_cell_multiple(a, sp.mode) if a else cfg.get_int(section, "cell_multiple", 2)
    return cert, W.find_escape_sequences(cfg.weight, cert, N, sp.x_max, sp.step, cell_multiple=multiple)


def _escape_rows(seq):
    return [(n, y, z, t, math.exp(r))
            for n, (y, z, t, r) in enumerate(zip(seq.y, seq.z, seq.t, seq.log_ratios), start=1)]


def _schedule(cfg, section, N, cert):
    text = cfg.get_str(section, "a_schedule", "factorial")
    if text in ("factorial", "square"):
        return W.a_schedule(text, N, int(math.floor(cert.gamma / cfg.space.step + 1e-9)))
    try:
        return W.a_schedule([int(x) for x in text.replace(",", " ").split()], N)
    except ValueError as exc:
        raise ConfigError(f"[{section}] a_schedule: {exc}", cfg.line(section, "a_schedule")) from None


def _witness_nonvanishing(cfg, run):
    sp = cfg.space
    cert, seq = _escape(cfg, "witness")
    f = W.build_nonvanishing_witness(seq, sp)
    rows = W.verify_nonvanishing(f, seq, sp)
    run.csv("escape_sequences.csv", ("n", "y", "z", "t", "ratio"), _escape_rows(seq))
    run.csv("witness.csv", ("x", "value"), f.rows())
    run.csv("checks.csv", ("check", "n", "measured", "bound", "passed"),
            [(r["check"], r["n"], r["measured"], r["bound"], r["passed"]) for r in rows])
    run.summary.update(gamma=seq.gamma, M=seq.M, w=seq.w, levels=seq.N,
                       all_passed=all(r["passed"] for r in rows))


def _witness_separated(cfg, run):
    sp = cfg.space
    N = cfg.get_int("witness", "n", 4)
    cert = certify_admissibility(cfg.weight, sp.x_max, sp.step)
    a = _schedule(cfg, "witness", N, cert)
    seq = W.find_escape_sequences(cfg.weight, cert, N, sp.x_max, sp.step,
                                  cell_multiple=W.required_cell_multiple(a, sp.mode))
    rng = np.random.default_rng(cfg.seed)
    fam = W.build_separated_family(seq, a, cfg.get_int("witness", "sample_budget", 0), sp, rng=rng)
    bound = W.separation_bound(seq, sp)
    pieces, pairs = [], []
    for n in range(1, seq.N + 1):
        for k, (lo, hi) in enumerate(fam.intervals(n), start=1):
            pieces.append((n, k, lo, hi, math.exp(fam.log_amplitudes[n - 1])))
        members = fam.level_members(n)
        t = float(seq.t[n - 1])
        for i in range(len(members)):
            for j in range(i):
                d = norm_p(translate(members[i] - members[j], t), sp)
                pairs.append((n, j + 1, i + 1, t, d, bound, d >= bound * 0.95))
    run.csv("escape_sequences.csv", ("n", "y", "z", "t", "ratio"), _escape_rows(seq))
    run.csv("family_intervals.csv", ("n", "k", "lo", "hi", "amplitude"), pieces)
    run.csv("separation.csv", ("n", "i", "j", "t", "distance", "bound", "passed"), pairs)
    run.report("family.txt", fam.to_dict())
    run.summary.update(gamma=seq.gamma, M=seq.M, a=list(a), epsilon=W.separation_epsilon(seq, sp),
                       all_passed=all(p[-1] for p in pairs))


def _witness_periodic(cfg, run):
    sp = cfg.space
    period = cfg.grid_value("witness", "period")
    P = sp.steps(period)
    full = cfg.function("witness", "shape")
    shape = sp.from_samples(full.samples, full.interpretation).samples[:P + 1]
    f = W.build_periodic_witness(sp, period, GridFunction(shape, sp.step, full.interpretation))
    Tf = translate(f, period)
    overlap = sp.n_cells - P
    gap = float(np.max(np.abs(Tf.samples[:overlap] - f.samples[:overlap]))) if overlap > 0 else 0.0
    run.csv("witness.csv", ("x", "value"), f.rows())
    run.summary.update(period=period, norm=norm(f, sp), periodic_defect=gap, all_passed=gap == 0.0)


def _witness_windowed(cfg, run):
    sp = cfg.space
    a = cfg.grid_value("witness", "window", 1.0)
    K = cfg.get_int("witness", "k", 5)
    ww = W.build_windowed_witness(sp, a, K)
    trace = D.orbit_trace(ww.f, sp, list(ww.visit_times), window=ww.window)
    rows = [(k, t, wn, ww.c0, wn >= ww.c0 * (1 - 1e-9))
            for k, (t, wn) in enumerate(zip(trace.times, trace.windowed), start=1)]
    run.csv("witness.csv", ("x", "value"), ww.f.rows())
    run.csv("visits.csv", ("k", "t", "windowed_norm", "c0", "passed"), rows)
    run.summary.update(window=ww.window, c0=ww.c0, norm=norm(ww.f, sp),
                       all_passed=all(r[-1] for r in rows))


def cmd_witness(cfg, run):
    kind = cfg.get_str("witness", "kind", "nonvanishing")
    builders = {
        "nonvanishing": _witness_nonvanishing,
        "separated": _witness_separated,
        "periodic": _witness_periodic,
        "windowed": _witness_windowed,
    }
    if kind not in builders:
        raise ConfigError(f"unknown witness kind {kind!r}", cfg.line("witness", "kind"))
    run.summary["kind"] = kind
    builders[kind](cfg, run)
    return EXIT_OK


def cmd_entropy(cfg, run):
    sp = cfg.space
    N = cfg.get_int("entropy", "n", 4)
    cert = certify_admissibility(cfg.weight, sp.x_max, sp.step)
    a = _schedule(cfg, "entropy", N, cert)
    rng = np.random.default_rng(cfg.seed)
    rep = E.infinite_entropy_experiment(cfg.weight, cert, N, a, sp,
                                        sample_budget=cfg.get_int("entropy", "sample_budget", 0),
                                        rng=rng, threads=run.threads)
    cols = ("n", "t", "epsilon", "a", "count", "mode", "rate", "rate_theory")
    run.csv("entropy.csv", cols, [tuple(r[c] for c in cols) for r in rep.rows()])
    run.summary.update(epsilon=rep.epsilon, counts=list(rep.counts), a=list(rep.a),
                       counts_match=rep.counts_match, rates_increasing=rep.rates_increasing)
    return EXIT_OK


def _chain_points(chain):
    for i, p in enumerate(chain.points):
        for x, y in p.rows():
            yield (i, x, y)


def cmd_chain(cfg, run):
    sp = cfg.space
    kind = cfg.get_str("chain", "kind", "constant")
    t = cfg.grid_value("chain", "t", 1.0)
    normalize = cfg.get_bool("chain", "normalize", False)

    def load(key, default=None):
        f = cfg.function("chain", key, default)
        if normalize and norm(f, sp) > 0:
            f = f / norm(f, sp)
        return f

    if kind == "constant":
        eps = cfg.get_float("chain", "epsilon")
        g = load("g")
        chain = D.build_chain_constant_weight(g, sp, t, eps)
        if cfg.has("chain", "f"):
            f = load("f")
            chain = D.concatenate(D.decay_chain(f, sp, t, eps), chain)
        ok, errs = D.verify_chain(chain, sp)
        rows = [(0, norm(chain.points[0], sp), "")]
        rows += [(i, norm(p, sp), e) for i, (p, e) in enumerate(zip(chain.points[1:], errs), start=1)]
        run.csv("chain.csv", ("i", "norm", "step_error"), rows)
        run.csv("chain_points.csv", ("point", "x", "value"), _chain_points(chain))
        run.summary.update(kind=kind, t=t, epsilon=eps, length=len(chain),
                           max_step_error=float(np.max(errs)) if errs.size else 0.0, valid=ok)
        return EXIT_OK
    if kind == "contraction":
        f = load("f")
        factor = D.contraction_factor(sp, t)
        bound = (0.5 - 0.5 * factor) * norm(f, sp)
        eps = (cfg.get_float("chain", "epsilon") if cfg.has("chain", "epsilon")
               else cfg.get_float("chain", "epsilon_fraction", 0.9) * bound)
        rng = np.random.default_rng(cfg.seed)
        rep = D.chain_escape_test(sp, t, f, eps, cfg.get_int("chain", "budget", 10_000), rng=rng)
        run.csv("contraction.csv", ("pair", "ratio", "factor"),
                [(i, r, rep.factor) for i, r in enumerate(rep.measured_ratios, start=1)])
        run.summary.update(kind=kind, t=t, epsilon=eps, epsilon_bound=bound, verdict=rep.verdict,
                           steps=rep.steps, max_norm=rep.max_norm, radius=rep.radius,
                           ball_violations=rep.ball_violations, factor=rep.factor)
        return EXIT_OK
    raise ConfigError(f"unknown chain kind {kind!r}", cfg.line("chain", "kind"))


def cmd_diagnose(cfg, run):
    sp = cfg.space
    f = cfg.function("diagnose", "f")
    g = cfg.function("diagnose", "g", "zero")
    ts = cfg.get_times("diagnose", "t_list")
    delta = cfg.get_float("diagnose", "delta", 1e-3)
    window = cfg.grid_value("diagnose", "window") if cfg.has("diagnose", "window") else None
    tf = D.orbit_trace(f, sp, ts, window)
    tg = D.orbit_trace(g, sp, ts)
    td = D.orbit_trace(f - g, sp, ts)
    cols = ["t", "norm_f", "norm_g", "distance"] + (["windowed_f"] if window else [])
    rows = []
    for k, t in enumerate(tf.times):
        row = [t, tf.norms[k], tg.norms[k], td.norms[k]]
        if window:
            row.append(tf.windowed[k])
        rows.append(row)
    run.csv("orbit.csv", cols, rows)
    ly = D.li_yorke_check(f, g, sp, ts, delta)
    run.summary.update(li_yorke=ly.verdict, min_distance=ly.min_distance,
                       trailing_max=ly.trailing_max, tol_zero=ly.tol_zero, horizon=ly.horizon)
    if cfg.has("diagnose", "horizon"):
        horizon = cfg.grid_value("diagnose", "horizon")
        eps = cfg.get_float("diagnose", "eps", delta)
        lo, hi = D.distributional_densities(f, g, sp, horizon, delta, eps)
        run.summary.update(lower_density=lo, upper_density=hi)
    probes = [h for h in (f, g) if norm(h, sp) > 0]
    if probes:
        pr = D.uniform_bound_probe(sp, ts, probes)
        B, _ = sup_ratio(cfg.weight, sp.x_max, sp.step)
        power = 1.0 if sp.mode is Mode.C0V else 1.0 / sp.p
        run.summary.update(max_norm_ratio=pr.max_ratio, ratio_bound=B ** power)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "witness": cmd_witness,
    "entropy": cmd_entropy,
    "chain": cmd_chain,
    "diagnose": cmd_diagnose,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="transchaos", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="INI experiment file")
    ap.add_argument("--out", default=None, help="output directory (default: [run] out or ./out)")
    ap.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
    ap.add_argument("--threads", type=int, default=1)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, seed=args.seed)
        out = args.out or cfg.get_str("run", "out", "out")
        run = Run(cfg, out, threads=max(1, args.threads))
        code = COMMANDS[args.command](cfg, run)
        run.finish(args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransChaosError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    for key in ("tier", "all_passed", "verdict", "li_yorke", "rates_increasing"):
        if key in run.summary:
            print(f"{key} = {run.summary[key]}")
    return code


if __name__ == "__main__":
    sys.exit(main())
