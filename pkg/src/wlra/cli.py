"""Benchmark harness: experiment specs, trace export, and the command line.

Subcommands: ingest, sample, synth, init-svd, run, compare. Trace CSVs have
the header ``t,elapsed_seconds,cost_unregularized``. By default the elapsed
column is written as 0.0 so that a fixed seed yields byte-identical output;
pass --wall-clock to export measured times instead.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path


from .data_io import (
    TripletMatrix,
    load_triplets,
    problem_from_triplets,
    sample_submatrix,
    synth_lowrank,
    write_triplets,
)
from .errors import MismatchedData, WlraError
from .model import ProblemData, confinement_euclidean, confinement_manifold, cost_unregularized
from .solvers import (
    ArmijoParams,
    Budget,
    IterTrace,
    SolverConfig,
    als_euclidean,
    als_manifold,
    als_pw,
    sgd_euclidean,
    sgd_manifold,
    sgd_pw,
)
from .step_policy import PolicyKind, make_policy
from .svd_init import best_rank_k, fill_missing_column_mean, truncated_svd_init

ALGORITHMS = (
    "sgd-manifold",
    "sgd-euclidean",
    "sgd-pw",
    "als-manifold",
    "als-euclidean",
    "als-pw",
)

# Line-search iota values tuned for lambda in {1e-2, 1e-4, 1e-6}; they were
# fitted to one specific ratings sample and are only starting points.
IOTA_PRESETS = {
    1e-2: 108.0 / 270000.0,
    1e-4: 11.0 / 270000000.0,
    1e-6: 1.0 / 54000000000.0,
}
DEFAULT_IOTA = 1e-4

# K values tuned per algorithm on the same sample; see --bigK preset.
BIGK_PRESETS = {
    "sgd-manifold": {1e-2: 1e3, 1e-4: 1e3, 1e-6: 1e4},
    "sgd-euclidean": {1e-2: 1e4, 1e-4: 1.0, 1e-6: 1.0},
    "sgd-pw": {},
}


@dataclass(frozen=True)
class ExperimentSpec:
    algorithm: str
    k: int
    seed: int
    budget: Budget
    lam: float | None = None
    big_k: float = 1.0
    iota: float | None = None
    alpha_bar: float = 1.0
    beta: float = 0.5
    trace_every: int | None = None
    adaptive: bool = False
    wall_clock: bool = False
    out: str | None = None
    name: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise MismatchedData(
                f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}"
            )

    @property
    def label(self) -> str:
        return self.name or self.algorithm

    def effective_trace_every(self) -> int:
        if self.trace_every is not None:
            return self.trace_every
        return 1 if self.algorithm.startswith("als") else 10


def _lookup_preset(table: dict, lam: float | None):
    if lam is None:
        return None
    for key, value in table.items():
        if abs(lam - key) <= 1e-15 * max(1.0, key):
            return value
    return None


def resolve_iota(spec: ExperimentSpec) -> float:
    if spec.iota is not None:
        return spec.iota
    preset = _lookup_preset(IOTA_PRESETS, spec.lam)
    return preset if preset is not None else DEFAULT_IOTA


def run_experiment(spec: ExperimentSpec, tm: TripletMatrix) -> IterTrace:
    """Impute, initialize from the truncated SVD, run the chosen solver,
    and (if spec.out is set) export the trace CSV."""
    if spec.algorithm not in ("sgd-pw", "als-pw") and (
        spec.lam is None or spec.lam <= 0
    ):
        raise MismatchedData("--lambda must be positive")
    data = problem_from_triplets(tm, spec.k)
    dense = fill_missing_column_mean(data)
    point0, pair0 = truncated_svd_init(dense, spec.k)
    trace = _dispatch(spec, data, point0, pair0)
    if spec.out is not None:
        write_trace_csv(trace, spec.out, wall_clock=spec.wall_clock)
    return trace


def _dispatch(spec: ExperimentSpec, data: ProblemData, point0, pair0) -> IterTrace:
    if spec.algorithm.startswith("als"):
        params = ArmijoParams(
            iota=resolve_iota(spec), alpha_bar=spec.alpha_bar, beta=spec.beta
        )
        every = spec.effective_trace_every()
        if spec.algorithm == "als-manifold":
            _, trace = als_manifold(point0, data, spec.lam, params, spec.budget, every)
        elif spec.algorithm == "als-euclidean":
            _, trace = als_euclidean(pair0, data, spec.lam, params, spec.budget, every)
        else:
            _, trace = als_pw(point0, data, params, spec.budget, every)
        return trace

    if spec.algorithm == "sgd-manifold":
        kind, init, runner = PolicyKind.MANIFOLD, point0, sgd_manifold
        init_sq = confinement_manifold(point0)
    elif spec.algorithm == "sgd-euclidean":
        kind, init, runner = PolicyKind.EUCLIDEAN, pair0, sgd_euclidean
        init_sq = confinement_euclidean(pair0)
    else:
        kind, init, runner = PolicyKind.POSITIVE_WEIGHTS, point0, sgd_pw
        init_sq = confinement_manifold(point0)
    policy = make_policy(kind, data, init_sq, spec.lam, spec.big_k)
    config = SolverConfig(
        kind=kind,
        policy=policy,
        budget=spec.budget,
        seed=spec.seed,
        trace_every=spec.effective_trace_every(),
        adaptive=spec.adaptive,
    )
    _, trace = runner(init, data, config)
    return trace


def write_trace_csv(trace: IterTrace, path, wall_clock: bool = False) -> None:
    """Locale-independent CSV: '.' decimals, LF endings, repr round-tripping."""
    with open(path, "w", newline="\n") as fh:
        fh.write("t,elapsed_seconds,cost_unregularized\n")
        for rec in trace.records:
            elapsed = float(rec.elapsed_seconds) if wall_clock else 0.0
            fh.write(f"{rec.t},{elapsed!r},{float(rec.cost_unregularized)!r}\n")


# ---------------------------------------------------------------------------
# Trace merging for `compare`.


def merge_on_iterations(
    traces: list[IterTrace], names: list[str]
) -> tuple[list[str], list[list[float]]]:
    """Align traces on iteration number; missing rows carry the last cost forward."""
    grid = sorted({int(rec.t) for tr in traces for rec in tr.records})
    header = ["t"] + list(names)
    rows = []
    for t in grid:
        row: list[float] = [t]
        for tr in traces:
            row.append(_locf(tr, key=lambda r: r.t, limit=t))
        rows.append(row)
    return header, rows


def merge_on_time(
    traces: list[IterTrace],
    names: list[str],
    bin_width: float,
    horizon: float | None = None,
) -> tuple[list[str], list[list[float]]]:
    """Align traces on elapsed-time bins (last observation carried forward)."""
    if bin_width <= 0:
        raise MismatchedData("--bin must be positive")
    if horizon is None:
        horizon = max(tr.records[-1].elapsed_seconds for tr in traces)
    nbins = int(math.floor(horizon / bin_width + 1e-9))
    header = ["seconds"] + list(names)
    rows = []
    for b in range(1, nbins + 1):
        edge = b * bin_width
        row: list[float] = [edge]
        for tr in traces:
            row.append(_locf(tr, key=lambda r: r.elapsed_seconds, limit=edge))
        rows.append(row)
    return header, rows


def _locf(trace: IterTrace, key, limit) -> float:
    value = trace.records[0].cost_unregularized
    for rec in trace.records:
        if key(rec) <= limit:
            value = rec.cost_unregularized
        else:
            break
    return value


def compare_experiments(
    specs: list[ExperimentSpec],
    tm: TripletMatrix,
    out,
    align: str = "iterations",
    bin_width: float = 0.1,
) -> tuple[list[str], list[list[float]]]:
    """Run several specs on the same data and write one merged cost CSV."""
    if not specs:
        raise MismatchedData("compare needs at least one run spec")
    if len({s.k for s in specs}) != 1:
        raise MismatchedData("compare runs must share the same k")
    traces = []
    for spec in specs:
        traces.append(run_experiment(replace(spec, out=None), tm))
    names = [s.label for s in specs]
    if align == "iterations":
        header, rows = merge_on_iterations(traces, names)
    elif align == "seconds":
        header, rows = merge_on_time(traces, names, bin_width)
    else:
        raise MismatchedData(f"unknown alignment {align!r}")
    with open(out, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            first = str(int(row[0])) if align == "iterations" else repr(float(row[0]))
            fh.write(",".join([first] + [repr(float(v)) for v in row[1:]]) + "\n")
    return header, rows


# ---------------------------------------------------------------------------
# Command line.


def _read_config(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MismatchedData(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


_RUN_KEYS = {
    "algorithm": str,
    "k": int,
    "lambda": float,
    "bigK": str,
    "iota": float,
    "alpha-bar": float,
    "beta": float,
    "seed": int,
    "iters": int,
    "seconds": float,
    "trace-every": int,
    "adaptive": lambda v: v.lower() in ("1", "true", "yes"),
    "name": str,
}


def _parse_kv_spec(text: str) -> dict:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise MismatchedData(f"expected key=value in run spec, got {part!r}")
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in _RUN_KEYS:
            raise MismatchedData(f"unknown run-spec key {key!r}")
        out[key] = _RUN_KEYS[key](value.strip())
    return out


def _resolve_bigk(raw, algorithm: str, lam: float | None) -> float:
    if raw is None:
        return 1.0
    if isinstance(raw, str) and raw.strip().lower() == "preset":
        preset = _lookup_preset(BIGK_PRESETS.get(algorithm, {}), lam)
        if preset is None:
            raise MismatchedData(
                f"no K preset for {algorithm} at lambda={lam}; pass a number"
            )
        print(
            f"warning: K preset {preset:g} was tuned on one specific ratings "
            "sample and may not transfer",
            file=sys.stderr,
        )
        return preset
    return float(raw)


def _spec_from_values(values: dict) -> ExperimentSpec:
    algorithm = values.get("algorithm")
    if algorithm is None:
        raise MismatchedData("--algorithm is required")
    if values.get("iters") is None and values.get("seconds") is None:
        raise MismatchedData("set a budget with --iters or --seconds")
    if values.get("iters") is not None and values.get("seconds") is not None:
        raise MismatchedData("--iters and --seconds are mutually exclusive")
    budget = (
        Budget(max_iterations=values["iters"])
        if values.get("iters") is not None
        else Budget(max_seconds=values["seconds"])
    )
    lam = values.get("lambda")
    if algorithm not in ("sgd-pw", "als-pw") and (lam is None or lam <= 0):
        raise MismatchedData("--lambda must be positive")
    return ExperimentSpec(
        algorithm=algorithm,
        k=values["k"],
        seed=values.get("seed", 0),
        budget=budget,
        lam=lam,
        big_k=_resolve_bigk(values.get("bigK"), algorithm, lam),
        iota=values.get("iota"),
        alpha_bar=values.get("alpha-bar", 1.0),
        beta=values.get("beta", 0.5),
        trace_every=values.get("trace-every"),
        adaptive=bool(values.get("adaptive", False)),
        wall_clock=bool(values.get("wall-clock", False)),
        out=values.get("out"),
        name=values.get("name"),
    )


def _merge_flag_values(args, config: dict[str, str]) -> dict:
    """Config supplies defaults; explicitly passed flags win."""
    values: dict = {}
    for key, cast in _RUN_KEYS.items():
        if key in config:
            values[key] = cast(config[key])
    flag_map = {
        "algorithm": args.algorithm,
        "k": args.k,
        "lambda": getattr(args, "lam"),
        "bigK": args.bigK,
        "iota": args.iota,
        "alpha-bar": args.alpha_bar,
        "beta": args.beta,
        "seed": args.seed,
        "iters": args.iters,
        "seconds": args.seconds,
        "trace-every": args.trace_every,
    }
    for key, value in flag_map.items():
        if value is not None:
            values[key] = value
    if args.adaptive:
        values["adaptive"] = True
    if args.wall_clock:
        values["wall-clock"] = True
    values["out"] = args.out
    if "k" not in values or values["k"] is None:
        raise MismatchedData("--k is required")
    values.setdefault("seed", 0)
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wlra",
        description="Weighted low-rank approximation benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p):
        p.add_argument("--in", dest="infile", required=True, help="triplet CSV input")
        p.add_argument("--one-based", action="store_true", help="input uses 1-based indices")
        p.add_argument("--rows", type=int, default=None, help="declared row count")
        p.add_argument("--cols", type=int, default=None, help="declared column count")

    p = sub.add_parser("ingest", help="validate a triplet file and rewrite it 0-based")
    add_input(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="restrict to a random row/column submatrix")
    add_input(p)
    p.add_argument("--sample-rows", type=int, required=True)
    p.add_argument("--sample-cols", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate a noisy low-rank instance")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--observe-prob", type=float, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("init-svd", help="report the truncated-SVD initial costs")
    add_input(p)
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("run", help="run one algorithm and export its trace")
    add_input(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--bigK", default=None, help="K >= 1, or 'preset'")
    p.add_argument("--iota", type=float, default=None)
    p.add_argument("--alpha-bar", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--seconds", type=float, default=None)
    p.add_argument("--trace-every", type=int, default=None)
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--wall-clock", action="store_true", help="export measured times")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="run several specs and merge their costs")
    add_input(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--align", choices=("iterations", "seconds"), default="iterations")
    p.add_argument("--bin", type=float, default=0.1, help="bin width for --align seconds")
    p.add_argument(
        "--run",
        action="append",
        required=True,
        metavar="KVS",
        help="comma-separated key=value pairs, e.g. "
        "'name=m,algorithm=sgd-manifold,lambda=1e-2,seed=0,iters=1000'",
    )
    p.add_argument("--out", required=True)

    return parser


def _cmd_ingest(args) -> int:
    tm = load_triplets(args.infile, args.one_based, args.rows, args.cols)
    write_triplets(tm, args.out)
    print(f"{tm.m}x{tm.n}, {tm.nnz} observations, density {tm.density:.4%}")
    return 0


def _cmd_sample(args) -> int:
    tm = load_triplets(args.infile, args.one_based, args.rows, args.cols)
    sub_tm = sample_submatrix(tm, args.sample_rows, args.sample_cols, args.seed)
    write_triplets(sub_tm, args.out)
    print(f"{sub_tm.m}x{sub_tm.n}, {sub_tm.nnz} observations kept")
    return 0


def _cmd_synth(args) -> int:
    tm = synth_lowrank(
        args.rows, args.cols, args.rank, args.observe_prob, args.noise, args.seed
    )
    write_triplets(tm, args.out)
    print(f"{tm.m}x{tm.n}, {tm.nnz} observations, density {tm.density:.4%}")
    return 0


def _cmd_init_svd(args) -> int:
    tm = load_triplets(args.infile, args.one_based, args.rows, args.cols)
    data = problem_from_triplets(tm, args.k)
    dense = fill_missing_column_mean(data)
    point0, pair0 = truncated_svd_init(dense, args.k)
    _, trunc_err = best_rank_k(dense, args.k)
    print(f"weighted_init_cost={cost_unregularized(point0, data)!r}")
    print(f"factored_init_cost={cost_unregularized(pair0, data)!r}")
    print(f"imputed_truncation_error={trunc_err!r}")
    return 0


def _cmd_run(args) -> int:
    config = _read_config(args.config) if args.config else {}
    spec = _spec_from_values(_merge_flag_values(args, config))
    tm = load_triplets(args.infile, args.one_based, args.rows, args.cols)
    trace = run_experiment(spec, tm)
    print(f"wrote {args.out} ({len(trace.records)} rows, final cost {trace.final_cost()!r})")
    return 0


def _cmd_compare(args) -> int:
    tm = load_triplets(args.infile, args.one_based, args.rows, args.cols)
    specs = []
    for text in args.run:
        values = _parse_kv_spec(text)
        values.setdefault("k", args.k)
        spec = _spec_from_values(values)
        if spec.k != args.k:
            raise MismatchedData("compare runs must share the same k")
        specs.append(spec)
    header, rows = compare_experiments(specs, tm, args.out, args.align, args.bin)
    print(f"wrote {args.out} ({len(rows)} rows, columns {header})")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "sample": _cmd_sample,
    "synth": _cmd_synth,
    "init-svd": _cmd_init_svd,
    "run": _cmd_run,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except WlraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
