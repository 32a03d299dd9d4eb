"""Command-line entry point: simulate, fit, analyze, measure, eval.

Every invocation writes a JSON manifest next to its primary output
(``<out>.manifest.json``) recording the argument vector, seeds, paths, tool
version and wall-clock time.  ``hypercopy replay MANIFEST`` re-runs it.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .asym import (
    AsymptoticSummary,
    DivergenceError,
    NonConvergenceError,
    UnsupportedRegimeError,
    intersection_profile,
    predicted_rk,
    stationary_edge_size_dist,
)
from .core import HypergraphFormatError, TemporalHypergraph, load_tsv, write_tsv
from .gen import SIMULATORS, ModelParams
from .linkpred import EvalConfig, RejectionBudgetError, SourceCapError, evaluate
from .metrics import (
    degree_histogram,
    edge_size_histogram,
    log_checkpoints,
    rk_timeseries,
    tail_slope,
)
from .sem import SemConfig, kl_divergence, sem_fit

log = logging.getLogger("hypercopy")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return v


def _fmt(x) -> str:
    """Stable text form of a number for CSV output."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return ""
    return repr(x)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_graph(path, timestamps=True) -> TemporalHypergraph:
    try:
        return load_tsv(path, timestamps=timestamps)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None


def _load_params(path) -> ModelParams:
    try:
        return ModelParams.load(path)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except (json.JSONDecodeError, ValueError, TypeError) as exc:
        raise DataError(f"bad parameter file {path}: {exc}") from None


def _params_from_args(args) -> ModelParams:
    if args.params:
        return _load_params(args.params)
    if args.eta is None or args.gamma is None or args.beta is None:
        raise UsageError("give either --params or all of --eta, --gamma, --beta")
    try:
        return ModelParams(args.eta, args.gamma, args.beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ----------------------------------------------------------------------
# subcommands; each returns (exit code, manifest extras)
# ----------------------------------------------------------------------


def cmd_simulate(args):
    params = _params_from_args(args)
    seed_hg = _load_graph(args.seed_hg) if args.seed_hg else None
    h, state = SIMULATORS[args.model](params, args.steps, seed_hg=seed_hg,
                                      rng_seed=args.rng_seed, return_state=True)
    write_tsv(h, args.out)
    diag = {"edges": h.m, "nodes": h.n, "clamped_extant": state.clamped_extant,
            "capped_poisson": state.capped_poisson}
    return EXIT_OK, {"outputs": [args.out], "diagnostics": diag}


def cmd_fit(args):
    h = _load_graph(args.input, timestamps=not args.no_timestamps)
    if not 0.0 < args.train_frac <= 1.0:
        raise UsageError("--train-frac must be in (0, 1]")
    rng = np.random.default_rng(args.rng_seed)
    if args.train_frac < 1.0:
        m_train = max(2, int(round(args.train_frac * h.m)))
        if args.ordering == "temporal":
            h = h.prefix(m_train)
        else:
            keep = np.sort(rng.choice(h.m, size=m_train, replace=False))
            h = h.reordered(keep.tolist())
    if h.m < 2:
        raise DataError("need at least two edges to fit")
    kbar = args.kbar if args.kbar is not None else int(h.edge_sizes().max())
    truth = _load_params(args.truth) if args.truth else None
    config = SemConfig(kbar=kbar, batch_size=args.batch_size, ordering=args.ordering,
                       max_steps=args.max_steps)
    params, trace = sem_fit(h, config, rng_seed=int(rng.integers(0, 2**63)))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(params.dumps())
    outputs = [args.out]
    if args.trace:
        rows = []
        for r in trace.records:
            if truth is not None:
                kg = kl_divergence(truth.gamma, r.gamma)
                kb = kl_divergence(truth.beta, r.beta)
            else:
                kg = kb = float("nan")
            rows.append((r.tau, r.eta, kg, kb, r.seconds))
        _write_csv(args.trace, ["tau", "eta", "kl_gamma", "kl_beta", "seconds"], rows)
        outputs.append(args.trace)
    extras = {"outputs": outputs,
              "diagnostics": {"converged": trace.converged, "steps": trace.steps,
                              "skipped": trace.skipped, "exhausted": trace.exhausted,
                              "kbar": kbar}}
    if not trace.converged:
        log.error("SEM did not converge after %d steps", trace.steps)
        return EXIT_NUMERIC, extras
    return EXIT_OK, extras


def cmd_analyze(args):
    params = _load_params(args.params)
    prefix = args.out_prefix
    summary = AsymptoticSummary.of(params).to_dict()
    size = stationary_edge_size_dist(params, kmax=args.kmax)
    summary.update({
        "mu_gamma": params.mu_gamma,
        "mu_beta": params.mu_beta,
        "size_dist_mean": size.mean(),
        "size_dist_eigenvalue": size.eigenvalue,
        "size_dist_residual": size.residual,
        "size_dist_truncation_mass": size.truncation_mass,
        "kmax": args.kmax,
        "imax": args.imax,
    })
    outputs = [f"{prefix}_summary.json", f"{prefix}_sizedist.csv"]
    _write_csv(outputs[1], ["size", "p"], zip(size.sizes.tolist(), size.p.tolist()))
    try:
        prof = intersection_profile(params, imax=args.imax)
    except UnsupportedRegimeError as exc:
        log.warning("intersection profile skipped: %s", exc)
        summary["intersection"] = None
    else:
        summary["intersection"] = {"eigenvalue": prof.eigenvalue, "residual": prof.residual,
                                   "q_k": prof.q_k().tolist()}
        q = prof.q
        rows = []
        for i in range(1, q.shape[0]):
            for j in range(1, q.shape[1]):
                for k in range(0, min(i, j) + 1):
                    rows.append((i, j, k, q[i, j, k]))
        outputs.append(f"{prefix}_qtensor.csv")
        _write_csv(outputs[-1], ["i", "j", "k", "q"], rows)
        rows = []
        for m in log_checkpoints(args.m_max, per_decade=args.per_decade):
            rk = predicted_rk(prof, m)
            rows.extend((m, k, rk[k]) for k in range(rk.size))
        outputs.append(f"{prefix}_rk_pred.csv")
        _write_csv(outputs[-1], ["m", "k", "r_k"], rows)
    _write_json(outputs[0], summary)
    return EXIT_OK, {"outputs": outputs}


def _parse_checkpoints(spec: str, m: int) -> list[int]:
    if spec.startswith("log:"):
        try:
            per = int(spec[4:])
        except ValueError:
            raise UsageError(f"bad checkpoint spec {spec!r}") from None
        return log_checkpoints(m, per_decade=per)
    if spec == "final":
        return [m]
    try:
        cps = sorted({int(x) for x in spec.split(",")})
    except ValueError:
        raise UsageError(f"bad checkpoint spec {spec!r}") from None
    if not cps or cps[0] < 2 or cps[-1] > m:
        raise UsageError(f"checkpoints must lie in [2, {m}]")
    return cps


def cmd_measure(args):
    h = _load_graph(args.input, timestamps=not args.no_timestamps)
    if args.what == "rk":
        if h.m < 2:
            raise DataError("need at least two edges")
        series = rk_timeseries(h, _parse_checkpoints(args.checkpoints, h.m), kmax=args.kmax)
        header = ["m"] + [f"r{k}" for k in range(args.kmax + 1)] + ["r_over"]
        rows = [[int(m)] + row.tolist() for m, row in zip(series.checkpoints, series.rk)]
        _write_csv(args.out, header, rows)
    elif args.what == "degrees":
        _write_csv(args.out, ["degree", "count"], sorted(degree_histogram(h).items()))
    elif args.what == "sizes":
        _write_csv(args.out, ["size", "count"], sorted(edge_size_histogram(h).items()))
    else:
        hist = degree_histogram(h)
        try:
            zeta = tail_slope(hist, dmin=args.dmin)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        n_tail = sum(c for d, c in hist.items() if d >= args.dmin)
        _write_csv(args.out, ["dmin", "n_tail", "zeta_hat"], [(args.dmin, n_tail, zeta)])
    return EXIT_OK, {"outputs": [args.out]}


def cmd_eval(args):
    h = _load_graph(args.input, timestamps=not args.no_timestamps)
    try:
        config = EvalConfig(ordering=args.ordering, negatives=args.negatives,
                            train_frac=args.train_frac, max_pos=args.max_pos,
                            rng_seed=args.rng_seed, kbar=args.kbar,
                            threshold=args.threshold, max_sources=args.max_sources)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        report = evaluate(h, config)
    except (RejectionBudgetError, SourceCapError) as exc:
        raise DataError(str(exc)) from None
    _write_json(args.out, report.to_dict(timing=False))
    outputs = [args.out]
    if args.scores:
        rows = [(i, "positive" if c.label else "negative", c.log_score)
                for i, c in enumerate(report.candidates)]
        _write_csv(args.scores, ["candidate_id", "label", "log_score"], rows)
        outputs.append(args.scores)
    return EXIT_OK, {"outputs": outputs,
                     "diagnostics": {"seconds_fit": report.seconds_fit,
                                     "seconds_score": report.seconds_score}}


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypercopy", description="Hyperedge copy model toolkit.")
    p.add_argument("--version", action="version", version=f"hypercopy {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="grow a synthetic hypergraph")
    s.add_argument("--model", choices=sorted(SIMULATORS), default="hcm")
    s.add_argument("--eta", type=float)
    s.add_argument("--gamma", type=_floats)
    s.add_argument("--beta", type=_floats)
    s.add_argument("--params", help="params.json (replaces --eta/--gamma/--beta)")
    s.add_argument("--steps", type=int, default=1000)
    s.add_argument("--rng-seed", type=_u64, default=0)
    s.add_argument("--seed-hg", help="TSV hypergraph to start from")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit parameters by stochastic EM")
    f.add_argument("--input", required=True)
    f.add_argument("--kbar", type=int, help="default: largest edge size")
    f.add_argument("--batch-size", type=int, default=30)
    f.add_argument("--ordering", choices=["temporal", "shuffled"], default="temporal")
    f.add_argument("--rng-seed", type=_u64, default=0)
    f.add_argument("--train-frac", type=float, default=1.0)
    f.add_argument("--max-steps", type=int, default=100_000)
    f.add_argument("--out", required=True)
    f.add_argument("--trace")
    f.add_argument("--truth", help="params.json of the generating model (adds KL columns)")
    f.add_argument("--no-timestamps", action="store_true")
    f.set_defaults(func=cmd_fit)

    a = sub.add_parser("analyze", help="asymptotic predictions for a parameter set")
    a.add_argument("--params", required=True)
    a.add_argument("--kmax", type=int, default=30)
    a.add_argument("--imax", type=int, default=12)
    a.add_argument("--m-max", type=int, default=10**6, help="largest edge count on the r_k grid")
    a.add_argument("--per-decade", type=int, default=10)
    a.add_argument("--out-prefix", required=True)
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("measure", help="empirical statistics of a hypergraph")
    m.add_argument("--input", required=True)
    m.add_argument("--what", choices=["rk", "degrees", "sizes", "slope"], required=True)
    m.add_argument("--checkpoints", default="log:10",
                   help="log:N (N per decade), 'final', or comma-separated edge counts")
    m.add_argument("--kmax", type=int, default=12)
    m.add_argument("--dmin", type=int, default=10)
    m.add_argument("--out", required=True)
    m.add_argument("--no-timestamps", action="store_true")
    m.set_defaults(func=cmd_measure)

    e = sub.add_parser("eval", help="link-prediction benchmark")
    e.add_argument("--input", required=True)
    e.add_argument("--ordering", choices=["temporal", "shuffled"], default="temporal")
    e.add_argument("--negatives", choices=["matched", "halfswap"], default="matched")
    e.add_argument("--train-frac", type=float, default=0.2)
    e.add_argument("--max-pos", type=int, default=100_000)
    e.add_argument("--kbar", type=int, help="default: largest edge size")
    e.add_argument("--threshold", choices=["pooled", "train"], default="pooled")
    e.add_argument("--max-sources", type=int, default=1_000_000)
    e.add_argument("--rng-seed", type=_u64, default=0)
    e.add_argument("--out", required=True)
    e.add_argument("--scores")
    e.add_argument("--no-timestamps", action="store_true")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.set_defaults(func=None)
    return p


def _threads() -> int | None:
    raw = os.environ.get("HYPERCOPY_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"HYPERCOPY_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("HYPERCOPY_THREADS must be >= 1")
    return n


def manifest_path(args) -> str:
    base = args.out_prefix if args.command == "analyze" else args.out
    return f"{base}.manifest.json"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.INFO)
        if args.command == "replay":
            try:
                with open(args.manifest, encoding="utf-8") as fh:
                    recorded = json.load(fh)["argv"]
            except (OSError, ValueError, KeyError) as exc:
                raise DataError(f"cannot read manifest {args.manifest}: {exc}") from None
            return main(recorded)
        threads = _threads()
        start = time.time()
        t0 = time.perf_counter()
        code, extras = args.func(args)
        manifest = {
            "command": args.command,
            "argv": argv,
            "flags": {k: v for k, v in vars(args).items() if k != "func"},
            "rng_seed": getattr(args, "rng_seed", None),
            "inputs": [x for x in (getattr(args, "input", None), getattr(args, "params", None),
                                   getattr(args, "seed_hg", None), getattr(args, "truth", None))
                       if x],
            "version": __version__,
            "threads": threads,
            "started_unix": start,
            "wall_seconds": time.perf_counter() - t0,
            "exit_code": code,
        }
        manifest.update(extras)
        _write_json(manifest_path(args), manifest)
        return code
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, HypergraphFormatError) as exc:
        print(f"hypercopy: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonConvergenceError, DivergenceError) as exc:
        print(f"hypercopy: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"hypercopy: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
