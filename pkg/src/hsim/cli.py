"""Command-line experiment driver.

Subcommands ``gen``, ``bounds``, ``run``, ``randmm``, ``sampler-test`` and
``oracle``.  Every report is deterministic given the command line and
``--seed``: trial ``i`` draws from stream ``i`` of the master seed, and wall
times are only recorded with ``--timing``.

Exit codes: 0 success, 2 validation failure, 3 bound violated under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import generate, io, lcu, nystrom, oracle, randmm, sampling
from .errors import HsimError, InvalidParams, NonConvergence, ValidationError
from .matrix import HermitianMatrix, StateVector

SCHEMA = 1
CSV_HEADER = "trial,seed_stream,error,bound,satisfied,wall_ms"
EXIT_OK, EXIT_INVALID, EXIT_BOUND = 0, 2, 3
ALGORITHMS = ("psd", "general", "general-shifted", "lcu")
GEN_KINDS = ("psd-lowrank", "hermitian", "sparse-hermitian", "diag-harmonic", "state-sparse")
# stream reserved for auxiliary draws (default state, weight vectors) so that
# trial streams 0, 1, 2, ... stay untouched
AUX_STREAM = 2**32


class BoundViolated(Exception):
    pass


# -- small helpers -----------------------------------------------------------

def _resolve_threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("HSIM_THREADS", "").strip()
        try:
            n = int(env) if env else 1
        except ValueError:
            raise InvalidParams(f"HSIM_THREADS={env!r} is not an integer") from None
    if n < 1:
        raise InvalidParams("thread count must be >= 1")
    return n


def _fmt_float(x: float) -> str:
    return "" if x is None or not math.isfinite(x) else format(x, ".16e")


def _emit(args, payload: dict, summary: str, *, out_default: bool = True) -> None:
    """Write ``payload`` to ``--out`` (if given) and print JSON or a summary."""
    text = io.dumps(payload)
    if args.out and out_default:
        Path(args.out).write_text(text)
    if args.json:
        sys.stdout.write(text)
    else:
        print(summary)


def _load_state_or_default(path: str | None, dim: int, seed: int) -> StateVector:
    if path:
        psi = io.load_state(path)
        if psi.dim != dim:
            raise ValidationError(f"state dim {psi.dim} does not match matrix dim {dim}")
        return psi
    return generate.random_state(dim, sampling.seeded_rng(seed, AUX_STREAM))


def _plan_dict(plan: nystrom.SimulationPlan, dim: int | None = None) -> dict:
    return {
        "t": float(plan.t), "eps": float(plan.eps), "delta": float(plan.delta),
        "K": int(plan.K), "M": int(plan.M), "m_capped": bool(plan.m_capped),
        "exhaustive": bool(plan.exhaustive_for(dim)) if dim else False,
        "m_required": float(plan.m_required),
        "m_branches": [float(b) for b in plan.m_branches],
        "seed": int(plan.seed),
    }


# -- gen ---------------------------------------------------------------------

def _norm_arg(value: str | None, default: float | None) -> float | None:
    if value is None:
        return default
    return None if value.lower() in ("none", "") else float(value)


def cmd_gen(args) -> int:
    rng = sampling.seeded_rng(args.seed, 0)
    kind = args.kind
    trace = None if args.trace in ("none", "") else float(args.trace)
    if kind == "diag-harmonic":
        n = args.qubits
        if n is None:
            if args.dim is None or args.dim < 1 or args.dim & (args.dim - 1):
                raise InvalidParams("diag-harmonic needs --qubits n or a power-of-two --dim")
            n = args.dim.bit_length() - 1
        if n < 0:
            raise InvalidParams("--qubits must be >= 0")
        obj = generate.diag_harmonic(n)
    else:
        if args.dim is None or args.dim < 1:
            raise InvalidParams(f"{kind} needs --dim >= 1")
        if kind == "psd-lowrank":
            obj = generate.psd_lowrank(args.dim, args.rank or 1, rng, trace=trace)
        elif kind == "hermitian":
            norm = _norm_arg(args.norm, 1.0)
            obj = generate.hermitian(args.dim, rng, spectral_norm=norm, rank=args.rank)
        elif kind == "sparse-hermitian":
            norm = _norm_arg(args.norm, None)
            obj = generate.sparse_hermitian(args.dim, args.sparsity or 2, rng, spectral_norm=norm)
        elif kind == "state-sparse":
            obj = generate.sparse_state(args.dim, args.q or 1, rng)
        else:  # pragma: no cover - argparse restricts choices
            raise InvalidParams(f"unknown kind {kind!r}")
    d = io.state_to_dict(obj) if isinstance(obj, StateVector) else io.matrix_to_dict(obj)
    text = io.dumps(d)
    if args.out:
        Path(args.out).write_text(text)
    if args.json or not args.out:
        sys.stdout.write(text)
    else:
        print(f"wrote {kind} (dim {obj.dim}) to {args.out}")
    return EXIT_OK


# -- bounds ------------------------------------------------------------------

def _make_plan(algo: str, h: HermitianMatrix, t: float, eps: float, delta: float, seed: int):
    if algo == "psd":
        return nystrom.psd_plan(h, t, eps, delta, seed)
    if algo == "general":
        return nystrom.general_plan(h, t, eps, delta, seed)
    if algo == "general-shifted":
        return nystrom.general_plan(nystrom.trace_shift(h)[1], t, eps, delta, seed)
    raise InvalidParams(f"no sampling plan for algorithm {algo!r}")


def cmd_bounds(args) -> int:
    h = io.load_matrix(args.matrix)
    if args.algo == "lcu":
        nb = h.norms
        k = lcu.truncation_order(args.t, nb, args.eps)
        payload = {"schema": SCHEMA, "algorithm": "lcu", "t": float(args.t),
                   "eps": float(args.eps), "k": int(k), "lambda1": float(nb.induced1),
                   "segments": len(lcu.segment_plan(args.t * nb.induced1))}
        summary = f"lcu: k={k} lambda1={nb.induced1:.6g}"
    else:
        plan = _make_plan(args.algo, h, args.t, args.eps, args.delta, args.seed)
        payload = {"schema": SCHEMA, "algorithm": args.algo, **_plan_dict(plan, h.dim)}
        b = ", ".join(f"{x:.6g}" for x in plan.m_branches)
        summary = (f"{args.algo}: K={plan.K} M={plan.M} m_capped={plan.m_capped} "
                   f"m_required={plan.m_required:.6g} branches=({b})")
    _emit(args, payload, summary)
    return EXIT_OK


# -- run ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed_stream: int
    error: float
    satisfied: bool
    wall_ms: float | None


def run_trials(algo: str, h: HermitianMatrix, psi: StateVector, *, t: float, eps: float,
               delta: float, trials: int, seed: int, threads: int = 1, m: int | None = None,
               k: int | None = None, timing: bool = False) -> dict:
    """Run ``trials`` independent estimates and assemble a report dict."""
    if algo not in ALGORITHMS:
        raise InvalidParams(f"algorithm must be one of {ALGORITHMS}")
    if trials < 1:
        raise InvalidParams("trials must be >= 1")
    reference = oracle.exact_evolve(h, psi, t).state.amplitudes
    extra: dict = {}
    if algo == "lcu":
        # deterministic; the walk is dense so compute once and share
        lcu_out, rep = lcu.lcu_evolve(h, psi, t, eps, sign=1, return_report=True)
        plan_d = {"t": float(t), "eps": float(eps), "delta": float(delta),
                  "K": max((s.k for s in rep.segments), default=0), "M": None,
                  "m_capped": False, "exhaustive": False, "seed": int(seed)}
        extra["lcu"] = {
            "diagonal_shift": float(rep.diagonal_shift), "lambda1": float(rep.lambda1),
            "max_alpha_l1": float(rep.max_alpha_l1),
            "segments": [{"z": float(s.z), "k": int(s.k), "alpha_l1": float(s.alpha_l1),
                          "bound": float(s.bound)} for s in rep.segments],
        }

        def one(i: int) -> np.ndarray:
            return lcu_out.amplitudes
    else:
        plan = _make_plan(algo, h, t, eps, delta, seed)
        if m is not None:
            plan = plan.with_m(m)
        if k is not None:
            plan = replace(plan, K=int(k))
        plan_d = _plan_dict(plan, h.dim)
        evolve = {"psd": nystrom.nystrom_psd_evolve, "general": nystrom.general_evolve,
                  "general-shifted": nystrom.evolve_with_shift}[algo]

        def one(i: int) -> np.ndarray:
            return evolve(h, psi, plan, sampling.seeded_rng(seed, i)).amplitudes

    def task(i: int) -> TrialResult:
        start = time.perf_counter()
        est = one(i)
        ms = (time.perf_counter() - start) * 1e3 if timing else None
        err = oracle.state_error(est, reference)
        return TrialResult(i, i, err, bool(err <= eps), ms)

    started = time.perf_counter()
    if threads == 1:
        results = [task(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(trials)))
    results.sort(key=lambda r: r.trial)
    total_ms = (time.perf_counter() - started) * 1e3 if timing else None

    errors = [r.error for r in results]
    report = {
        "schema": SCHEMA,
        "algorithm": algo,
        "dim": int(h.dim),
        "plan": plan_d,
        "achieved_error": float(max(errors)),
        "median_error": float(np.median(errors)),
        "bound_satisfied": all(r.satisfied for r in results),
        "satisfied_fraction": sum(r.satisfied for r in results) / trials,
        "wall_time_ms": total_ms,
        "trial_count": trials,
        "trials": [{"trial": r.trial, "seed_stream": r.seed_stream, "error": float(r.error),
                    "satisfied": r.satisfied, "wall_ms": r.wall_ms} for r in results],
        **extra,
    }
    return report


def report_csv(report: dict) -> str:
    eps = report["plan"]["eps"]
    lines = [CSV_HEADER]
    for r in report["trials"]:
        lines.append(",".join([str(r["trial"]), str(r["seed_stream"]), _fmt_float(r["error"]),
                               _fmt_float(eps), "true" if r["satisfied"] else "false",
                               "" if r["wall_ms"] is None else f"{r['wall_ms']:.3f}"]))
    return "\n".join(lines) + "\n"


def _csv_path(out: str, csv: str | None) -> Path:
    if csv:
        return Path(csv)
    p = Path(out)
    return p.with_suffix(".csv") if p.suffix != ".csv" else p.with_name(p.stem + ".trials.csv")


def cmd_run(args) -> int:
    h = io.load_matrix(args.matrix)
    psi = _load_state_or_default(args.state, h.dim, args.seed)
    report = run_trials(args.algo, h, psi, t=args.t, eps=args.eps, delta=args.delta,
                        trials=args.trials, seed=args.seed, threads=_resolve_threads(args.threads),
                        m=args.M, k=args.K, timing=args.timing)
    if args.out:
        _csv_path(args.out, args.csv).write_text(report_csv(report))
    summary = (f"{args.algo}: trials={report['trial_count']} max_error={report['achieved_error']:.3e} "
               f"median_error={report['median_error']:.3e} eps={args.eps:g} "
               f"satisfied={report['satisfied_fraction']:.3f}")
    _emit(args, report, summary)
    if args.strict and not report["bound_satisfied"]:
        raise BoundViolated(summary)
    return EXIT_OK


# -- randmm ------------------------------------------------------------------

def randmm_report(a: np.ndarray, b: np.ndarray, c: int, trials: int, seed: int,
                  probabilities: str = "optimal") -> dict:
    if probabilities == "optimal":
        p = randmm.optimal_probabilities(a, b)
    elif probabilities == "uniform":
        p = np.full(a.shape[1], 1.0 / a.shape[1])
    else:
        raise InvalidParams(f"unknown probabilities {probabilities!r}")
    mean, var = randmm.entrywise_moments(a, b, c, p)
    expected_fro = randmm.expected_frobenius_error(a, b, c, p)
    prods = np.empty((trials,) + mean.shape, dtype=complex)
    fro = np.empty(trials)
    for i in range(trials):
        sk = randmm.sketch_multiply(a, b, c, p, sampling.seeded_rng(seed, i))
        prods[i] = sk.product
        fro[i] = np.linalg.norm(a @ b - prods[i]) ** 2
    emp_mean = prods.mean(axis=0)
    emp_var = np.mean(np.abs(prods - emp_mean) ** 2, axis=0) * trials / max(trials - 1, 1)
    # standard error of the entrywise mean, from the exact variance
    se = np.sqrt(np.maximum(var, 0) / trials)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(emp_mean - mean) / se, 0.0)
    return {
        "schema": SCHEMA,
        "c": int(c), "trials": int(trials), "seed": int(seed),
        "probabilities": probabilities,
        "p": [float(x) for x in p],
        "max_abs_mean_deviation": float(np.max(np.abs(emp_mean - mean))),
        "max_mean_z_score": float(np.max(z)),
        "max_abs_variance_deviation": float(np.max(np.abs(emp_var - var))),
        "max_exact_variance": float(np.max(var)),
        "expected_frobenius_sq": float(expected_fro),
        "empirical_frobenius_sq": float(fro.mean()),
        "frobenius_sq_std_error": float(fro.std(ddof=1) / math.sqrt(trials)) if trials > 1 else None,
    }


def cmd_randmm(args) -> int:
    a = io.load_matrix(args.a).dense
    b = io.load_matrix(args.b).dense
    rep = randmm_report(a, b, args.c, args.trials, args.seed, args.probabilities)
    summary = (f"randmm: c={args.c} E||AB-CR||_F^2 exact={rep['expected_frobenius_sq']:.6g} "
               f"empirical={rep['empirical_frobenius_sq']:.6g} "
               f"max mean z-score={rep['max_mean_z_score']:.3f}")
    _emit(args, rep, summary)
    return EXIT_OK


# -- sampler-test ------------------------------------------------------------

SOURCES = ("select", "tree", "rowsearch")


def weight_vectors(count: int, rng: np.random.Generator, harmonic_n: int = 4) -> list[np.ndarray]:
    """Test vectors: the harmonic diagonal first, then assorted random shapes."""
    out = [1.0 / np.arange(1, 2 ** harmonic_n + 1)]
    shapes = ("uniform", "exponential", "sparse", "power")
    while len(out) < count:
        n = int(2 ** rng.integers(1, 7))
        kind = shapes[len(out) % len(shapes)]
        if kind == "uniform":
            w = rng.random(n)
        elif kind == "exponential":
            w = rng.exponential(size=n)
        elif kind == "sparse":
            w = rng.random(n) * (rng.random(n) < 0.4)
            if not np.any(w):
                w[rng.integers(n)] = 1.0
        else:
            w = rng.random(n) ** 4
        out.append(w)
    return out


def _draw(source: str, w: np.ndarray, rng: np.random.Generator, draws: int,
          harmonic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Samples plus the exact target distribution for one weight vector."""
    if source == "select":
        return sampling.select_stream_many(w, rng, draws), w / w.sum()
    if source == "tree":
        # the tree stores |v_k|^2, so feed amplitudes sqrt(w) with random phases
        amps = np.sqrt(w) * np.exp(2j * np.pi * rng.random(w.size))
        tree = sampling.build_tree(amps)
        return sampling.tree_sample_many(tree, rng, draws), w / w.sum()
    if source == "rowsearch":
        if harmonic:
            orc = sampling.RowSearchOracle.diag_harmonic(int(w.size).bit_length() - 1)
        else:
            orc = sampling.RowSearchOracle.from_weights(w)
        p = sampling.exact_row_search_distribution(orc)
        return sampling.row_search_sample_many(orc, rng, draws), p
    raise InvalidParams(f"source must be one of {SOURCES}")


def chi_square(samples: np.ndarray, p: np.ndarray) -> tuple[float, float, int, bool]:
    """Pearson statistic, p-value, dof, and whether any draw hit a zero-weight bin."""
    counts = np.bincount(samples, minlength=p.size)[: p.size]
    if samples.size and (samples.max() >= p.size or samples.min() < 0):
        return math.inf, 0.0, 0, True
    support = p > 0
    leaked = bool(np.any(counts[~support]))
    expected = p[support] * samples.size
    if support.sum() < 2:
        return 0.0, 1.0, 0, leaked
    res = stats.chisquare(counts[support], expected)
    return float(res.statistic), float(res.pvalue), int(support.sum() - 1), leaked


def sampler_report(source: str, draws: int, seed: int, vectors: int = 20,
                   alpha: float = 1e-3) -> dict:
    rng_w = sampling.seeded_rng(seed, AUX_STREAM)
    ws = weight_vectors(vectors, rng_w)
    rows = []
    for i, w in enumerate(ws):
        samples, p = _draw(source, w, sampling.seeded_rng(seed, i), draws, harmonic=(i == 0))
        stat, pval, dof, leaked = chi_square(samples, p)
        rows.append({"vector": i, "size": int(w.size), "statistic": stat, "p_value": pval,
                     "dof": dof, "zero_weight_hits": leaked,
                     "passed": bool(pval >= alpha and not leaked)})
    return {"schema": SCHEMA, "source": source, "draws": int(draws), "seed": int(seed),
            "significance": float(alpha), "vectors": rows,
            "all_passed": all(r["passed"] for r in rows)}


def cmd_sampler_test(args) -> int:
    rep = sampler_report(args.source, args.draws, args.seed, args.vectors, args.alpha)
    npass = sum(r["passed"] for r in rep["vectors"])
    minp = min(r["p_value"] for r in rep["vectors"])
    summary = (f"{args.source}: {npass}/{len(rep['vectors'])} vectors pass chi-square at "
               f"{args.alpha:g} (min p-value {minp:.3g})")
    _emit(args, rep, summary)
    if args.strict and not rep["all_passed"]:
        raise BoundViolated(summary)
    return EXIT_OK


# -- oracle ------------------------------------------------------------------

def cmd_oracle(args) -> int:
    h = io.load_matrix(args.matrix)
    psi = _load_state_or_default(args.state, h.dim, args.seed)
    res = oracle.exact_evolve(h, psi, args.t, method=args.method)
    d = io.state_to_dict(res.state)
    if args.out:
        Path(args.out).write_text(io.dumps(d))
    if args.json:
        sys.stdout.write(io.dumps({"schema": SCHEMA, "method": res.method,
                                   "residual_estimate": float(res.residual_estimate),
                                   "state": d}))
    else:
        print(f"oracle ({res.method}): dim {h.dim}, residual estimate {res.residual_estimate:.3e}"
              + (f", wrote {args.out}" if args.out else ""))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d if suppress else 0,
                        help="master seed (u64); trial i uses stream i")
    parser.add_argument("--out", default=d, help="output file")
    parser.add_argument("--json", action="store_true", default=d if suppress else False,
                        help="print machine-readable JSON to stdout")
    parser.add_argument("--strict", action="store_true", default=d if suppress else False,
                        help="exit 3 when a bound is violated")
    parser.add_argument("--threads", type=int, default=d,
                        help="worker threads for trials (fallback: HSIM_THREADS, then 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsim", description=__doc__.split("\n")[0])
    _global_flags(parser, suppress=False)
    # the same flags are accepted after the subcommand too
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a test matrix or state")
    g.add_argument("kind", choices=GEN_KINDS)
    g.add_argument("--dim", type=int)
    g.add_argument("--rank", type=int)
    g.add_argument("--sparsity", type=int)
    g.add_argument("--qubits", type=int, help="diag-harmonic: dimension 2^n")
    g.add_argument("--q", type=int, help="state-sparse: number of nonzeros")
    g.add_argument("--trace", default="1.0", help="psd-lowrank trace, or 'none'")
    g.add_argument("--norm", help="spectral norm to rescale to, or 'none' "
                   "(default: 1 for hermitian, none for sparse-hermitian)")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bounds", parents=[common], help="print the K/M plan for a matrix")
    b.add_argument("--matrix", required=True)
    b.add_argument("--algo", choices=ALGORITHMS, default="psd")
    b.add_argument("--t", type=float, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--delta", type=float, default=0.1)
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("run", parents=[common], help="run trials against the exact oracle")
    r.add_argument("--algo", choices=ALGORITHMS, required=True)
    r.add_argument("--matrix", required=True)
    r.add_argument("--state", help="state file (default: seeded random unit vector)")
    r.add_argument("--t", type=float, required=True)
    r.add_argument("--eps", type=float, required=True)
    r.add_argument("--delta", type=float, default=0.1)
    r.add_argument("--trials", type=int, default=10)
    r.add_argument("--M", type=int, help="override the sample count")
    r.add_argument("--K", type=int, help="override the truncation order")
    r.add_argument("--csv", help="CSV path (default: --out with .csv suffix)")
    r.add_argument("--timing", action="store_true",
                   help="record wall times (reports are then no longer byte-reproducible)")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("randmm", parents=[common], help="randomized matrix product statistics")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--c", type=int, required=True)
    m.add_argument("--trials", type=int, default=1000)
    m.add_argument("--probabilities", choices=("optimal", "uniform"), default="optimal")
    m.set_defaults(func=cmd_randmm)

    s = sub.add_parser("sampler-test", parents=[common], help="chi-square tests for the samplers")
    s.add_argument("--source", choices=SOURCES, required=True)
    s.add_argument("--draws", type=int, default=100_000)
    s.add_argument("--vectors", type=int, default=20)
    s.add_argument("--alpha", type=float, default=1e-3, help="significance level")
    s.set_defaults(func=cmd_sampler_test)

    o = sub.add_parser("oracle", parents=[common], help="exact exp(iHt) psi")
    o.add_argument("--matrix", required=True)
    o.add_argument("--state")
    o.add_argument("--t", type=float, required=True)
    o.add_argument("--method", choices=(oracle.EIGEN, oracle.SERIES), default=oracle.EIGEN)
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BoundViolated as exc:
        print(f"bound violated: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (ValidationError, FileNotFoundError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonConvergence, HsimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
