"""Experiment harness: data ingestion, instance construction, sweep runner.

Experiments are declared in a TOML file (one experiment per file) and
expanded into a grid of (lambda, s, c, theta, k) cells; every cell runs
each requested method for the configured number of trials, sharing the
initial point across methods within a (cell, trial) pair so comparisons
are paired.  Each run writes a per-iteration trace CSV plus the final
iterate and a metadata sidecar, and contributes one row to summary.csv.

All randomness flows from the experiment seed through named Philox
streams, so a spec plus seed fully determines every numeric output.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import diagnostics, problems, selection, solvers
from .errors import CsvFormatError, TooLarge
from .problems import Family, FeasibleSet, SetKind

SUMMARY_COLUMNS = [
    "family",
    "method",
    "lambda",
    "s",
    "c",
    "theta",
    "k",
    "trial",
    "final_objective",
    "iters",
    "elapsed_s",
    "cws_probe",
    "exactness_flags",
]

TRACE_COLUMNS = ["iter", "elapsed_s", "objective", "step_norm", "feas_residual"]


# ---------------------------------------------------------------------------
# data ingestion
# ---------------------------------------------------------------------------

def load_matrix_csv(path) -> np.ndarray:
    """Parse a rectangular numeric CSV into a dense matrix.

    A header row is skipped automatically when any of its fields fails to
    parse as a number.  Decimal points only; locale independent.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines:
        raise CsvFormatError(f"{path}: empty file")

    def parse_row(line):
        return [cell.strip() for cell in line.split(",")]

    rows = [parse_row(ln) for ln in lines]
    start = 0
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        start = 1
        if len(rows) == 1:
            raise CsvFormatError(f"{path}: header only, no data rows")
    width = len(rows[start])
    out = []
    for r, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise CsvFormatError(f"{path}: ragged row {r} has {len(row)} fields, expected {width}")
        vals = []
        for cidx, cell in enumerate(row, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise CsvFormatError(f"{path}: non-numeric cell at row {r}, col {cidx}: {cell!r}")
        out.append(vals)
    return np.array(out, dtype=float)


def gen_randn(m: int, n: int, seed: int) -> np.ndarray:
    """Standard Gaussian matrix from a Philox (64-bit counter-based)
    stream via the ziggurat sampler; reproducible across platforms."""
    if m < 1 or n < 1:
        raise ValueError("need m, n >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.standard_normal((m, n))


def subsample(Asrc: np.ndarray, m: int, n: int, seed: int) -> np.ndarray:
    """Uniform row/column subsets without replacement, sorted ascending."""
    rows, cols = Asrc.shape
    if m > rows or n > cols:
        raise TooLarge(f"requested {m}x{n} from a {rows}x{cols} source")
    rng = np.random.Generator(np.random.Philox(seed))
    ri = np.sort(rng.choice(rows, size=m, replace=False))
    ci = np.sort(rng.choice(cols, size=n, replace=False))
    return Asrc[np.ix_(ri, ci)]


# ---------------------------------------------------------------------------
# experiment description
# ---------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    family: Family
    dataset: dict
    grid: dict
    methods: list
    trials: int = 1
    seed: int = 0
    out_dir: str = "bench_out"
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for key in ("lam", "s", "c", "theta", "k"):
            self.grid.setdefault(key, [_GRID_DEFAULTS[key]])
            if not self.grid[key]:
                raise ValueError(f"grid entry {key} must be nonempty")


_GRID_DEFAULTS = {"lam": 1.0, "s": 5, "c": 0.0, "theta": 1e-4, "k": 2}

_METHOD_MAP = {
    "bcdg": solvers.Method.BCDG,
    "bcdl": solvers.Method.BCDL,
    "psg": solvers.Method.PSG,
    "mscr": solvers.Method.MSCR,
    "pdca": solvers.Method.PDCA,
}

_SELECTION_MAP = {
    "cyclic": selection.SelectionKind.CYCLIC,
    "uniform": selection.SelectionKind.UNIFORM_RANDOM,
    "semigreedy": None,  # resolved per family
}


def load_spec(path) -> ExperimentSpec:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    exp = raw.get("experiment", {})
    return ExperimentSpec(
        family=Family(exp.get("family", "SIT")),
        dataset=raw.get("dataset", {"kind": "synthetic", "m": 10, "n": 8}),
        grid=dict(raw.get("grid", {})),
        methods=list(exp.get("methods", ["bcdg", "psg", "mscr", "pdca"])),
        trials=int(exp.get("trials", 1)),
        seed=int(exp.get("seed", 0)),
        out_dir=str(exp.get("out_dir", "bench_out")),
        solver=dict(raw.get("solver", {})),
    )


def _resolve_dataset(spec: ExperimentSpec):
    ds = spec.dataset
    kind = ds.get("kind", "synthetic")
    if kind == "csv":
        A = load_matrix_csv(ds["a"])
        y = load_matrix_csv(ds["y"]).ravel() if "y" in ds else np.zeros(A.shape[0])
        return A, y
    if kind == "synthetic":
        m, n = int(ds["m"]), int(ds["n"])
        if m < 2 or n < 2:
            raise ValueError(f"synthetic dataset needs m, n >= 2, got {m}x{n}")
        seed = int(ds.get("seed", spec.seed))
        rng = np.random.Generator(np.random.Philox(seed))
        A = rng.standard_normal((m, n))
        y = rng.standard_normal(m)
        return A, y
    if kind == "subsample":
        Asrc = load_matrix_csv(ds["source"])
        A = subsample(Asrc, int(ds["m"]), int(ds["n"]), int(ds.get("seed", spec.seed)))
        y = np.zeros(A.shape[0])
        if "y" in ds:
            y = load_matrix_csv(ds["y"]).ravel()[: A.shape[0]]
        return A, y
    raise ValueError(f"unknown dataset kind {kind!r}")


def _make_instance(spec: ExperimentSpec, A, y, lam, s, c, theta) -> problems.ProblemInstance:
    fam = spec.family
    if fam is Family.SIT:
        return problems.sit_problem(A, y, lam, int(s), theta)
    if fam is Family.NNSPCA:
        return problems.nnspca_problem(A, lam, int(s), "auto", theta)
    if fam is Family.DCPB1:
        return problems.dcpb1_problem(A, y, "auto", c, theta)
    return problems.dcpb2_problem(A, y, lam, c, theta)


def _initial_point(p: problems.ProblemInstance, fs: FeasibleSet, seed_key) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_key)))
    z = rng.standard_normal(p.n)
    if fs.kind in (SetKind.SIMPLEX, SetKind.NONNEG_SPHERE):
        z = np.abs(z)
    return problems.project(fs, z)


def _selection_kind(spec: ExperimentSpec):
    name = spec.solver.get("selection", "uniform")
    if name == "semigreedy":
        if spec.family is Family.SIT:
            return selection.SelectionKind.SEMI_GREEDY_SIT
        if spec.family is Family.NNSPCA:
            return selection.SelectionKind.SEMI_GREEDY_NNSPCA
        raise ValueError("semigreedy selection exists for SIT and NNSPCA only")
    return _SELECTION_MAP[name]


def _solver_config(spec: ExperimentSpec, method: str, k: int, sel_seed: int) -> solvers.SolverConfig:
    s = spec.solver
    return solvers.SolverConfig(
        method=_METHOD_MAP[method],
        max_iters=int(s.get("max_iters", 2000)),
        tol=float(s.get("tol", 1e-8)),
        window=s.get("window"),
        selection=_selection_kind(spec),
        seed=sel_seed,
        k=int(k),
        mscr_outer=int(s.get("mscr_outer", 10)),
        pdca_L=s.get("pdca_l", "auto"),
    )


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _exactness_flags(p, qbar, x) -> str:
    if p.family is Family.SIT:
        rep = diagnostics.check_sit_exactness(p, x)
        if not rep["active"]:
            return "sit:inactive"
        return f"sit:{'pass' if rep['pass'] else 'fail'}"
    if p.family is Family.DCPB1:
        return f"extreme:{str(diagnostics.check_extreme_point(x)).lower()}"
    if p.family is Family.DCPB2:
        rep = diagnostics.check_dcpb2_exactness(p, qbar, x)
        if rep["regime"] == "inactive":
            return "dcpb2:inactive"
        return f"dcpb2:{rep['regime']}:{'pass' if rep['pass'] else 'fail'}"
    return ""


def _run_one(args):
    """One (grid cell, trial, method) run; returns the summary row."""
    (spec, A, y, gi, params, trial, method, out_dir, reproducible) = args
    lam, s, c, theta, k = params
    p = _make_instance(spec, A, y, lam, s, c, theta)
    fs = problems.feasible_set_for(p)
    x0 = _initial_point(p, fs, (spec.seed, gi, trial))
    midx = spec.methods.index(method)
    cfg = _solver_config(spec, method, k, _derive_seed((spec.seed, gi, trial, midx)))
    clock = (lambda: 0.0) if reproducible else time.monotonic
    trace = solvers.run_solver(p, fs, cfg, x0, clock=clock)

    tag = f"{method}_g{gi:03d}_{trial}"
    _write_trace(Path(out_dir) / f"trace_{tag}.csv", trace)
    _write_vector(Path(out_dir) / f"final_{tag}.csv", trace.final_x)
    meta = {
        "family": spec.family.value,
        "method": method,
        "lambda": lam,
        "s": int(s),
        "c": c,
        "theta": theta,
        "k": int(k),
        "trial": trial,
        "gamma": p.gamma,
        "a_csv": "A.csv",
        "y_csv": "y.csv",
        "seed": spec.seed,
    }
    (Path(out_dir) / f"meta_{tag}.json").write_text(json.dumps(meta, sort_keys=True))

    qbar = problems.curvature_matrix(p)
    n = p.n
    probe = diagnostics.probe_cws(
        p,
        fs,
        trace.final_x,
        k=2,
        mode="sampled",
        count=min(200, n * (n - 1) // 2),
        seed=_derive_seed((spec.seed, gi, trial, midx, 7)),
    )
    row = [
        spec.family.value,
        method,
        _fmt(lam),
        str(int(s)),
        _fmt(c),
        _fmt(theta),
        str(int(k)),
        str(trial),
        _fmt(trace.final_objective),
        str(len(trace.records)),
        _fmt(trace.records[-1].elapsed_s if trace.records else 0.0),
        _fmt(probe.worst_improvement),
        _exactness_flags(p, qbar, trace.final_x),
    ]
    return (gi, trial, method), row


def _derive_seed(key) -> int:
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def _write_trace(path: Path, trace: solvers.SolveTrace) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for r in trace.records:
        lines.append(
            ",".join(
                [
                    str(r.iteration),
                    _fmt(r.elapsed_s),
                    _fmt(r.objective),
                    _fmt(r.step_norm),
                    _fmt(r.feas_residual),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _write_vector(path: Path, x: np.ndarray) -> None:
    path.write_text("\n".join(_fmt(v) for v in x) + "\n")


def _write_matrix(path: Path, M: np.ndarray) -> None:
    path.write_text("\n".join(",".join(_fmt(v) for v in row) for row in np.atleast_2d(M)) + "\n")


def run_experiment(spec: ExperimentSpec, jobs: int = 1, reproducible: bool = False) -> int:
    """Execute the full grid x method x trial sweep.

    Returns 0 on success.  With reproducible=True the per-record clock is
    replaced by a zero clock so outputs are byte-identical across reruns;
    wall time is otherwise recorded from a monotonic clock.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    A, y = _resolve_dataset(spec)
    _write_matrix(out_dir / "A.csv", A)
    _write_vector(out_dir / "y.csv", y)

    cells = list(
        itertools.product(
            spec.grid["lam"], spec.grid["s"], spec.grid["c"], spec.grid["theta"], spec.grid["k"]
        )
    )
    tasks = [
        (spec, A, y, gi, params, trial, method, str(out_dir), reproducible)
        for gi, params in enumerate(cells)
        for trial in range(spec.trials)
        for method in spec.methods
    ]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_run_one, tasks))
    else:
        results = dict(_run_one(t) for t in tasks)

    lines = [",".join(SUMMARY_COLUMNS)]
    for gi in range(len(cells)):
        for trial in range(spec.trials):
            for method in spec.methods:
                lines.append(",".join(results[(gi, trial, method)]))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    return 0
