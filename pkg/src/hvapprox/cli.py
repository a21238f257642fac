"""Experiment driver: data generation, recovery, network training, error
evaluation, convergence studies and plot-script emission.

Subcommands: gen-data, run-scs, train-dnn, test-error, bounds, study, plots.
Global flags --config/--out/--threads/--seed; flags override config fields.
Study cells record failures and continue; the process exits 0 only when
every cell succeeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as hvio
from . import pde, quadrature, theory
from .estimators import DNNSurrogate, SparsePolynomialSurrogate

REPORT_COLUMNS = ["trial", "m", "method", "seed", "err_l2", "err_h1", "train_time_s", "status"]
AGGREGATE_COLUMNS = ["method", "m", "trials", "err_l2", "err_h1", "train_time_s"]


@dataclass
class ExperimentConfig:
    """Declarative description of a convergence study; JSON round-trippable."""

    problem: dict = field(
        default_factory=lambda: {
            "coefficient": {"kind": "affine", "d": 2},
            "mesh_n": 17,
            "forcing": 10.0,
        }
    )
    methods: list = field(
        default_factory=lambda: [{"name": "scs", "order": 3, "lam": "auto"}]
    )
    sampling: dict = field(
        default_factory=lambda: {"m_schedule": [20, 40], "trials": 2, "seed_base": 0}
    )
    testing: dict = field(default_factory=lambda: {"grid_level": 2})
    output: str = "study_out"

    def __post_init__(self):
        sched = self.sampling.get("m_schedule", [])
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("m_schedule must be strictly increasing")
        if self.sampling.get("trials", 1) < 1:
            raise ValueError("trials must be >= 1")
        if not self.methods:
            raise ValueError("at least one method is required")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(
            problem=data.get("problem", {}),
            methods=data.get("methods", []),
            sampling=data.get("sampling", {}),
            testing=data.get("testing", {}),
            output=data.get("output", "study_out"),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def _make_method(spec: dict, gram=None):
    name = spec["name"]
    if name in ("scs", "srlasso"):
        return SparsePolynomialSurrogate(
            order=spec.get("order", 3),
            lam=spec.get("lam", "auto"),
            solver="lasso" if name == "scs" else "srlasso",
            gram=gram,
            max_iters=spec.get("max_iters", 200_000),
            continuation_stages=spec.get("continuation_stages", 6),
        )
    if name == "dnn":
        return DNNSurrogate(
            hidden_layers=spec.get("hidden_layers", 5),
            width=spec.get("width", 50),
            activation=spec.get("activation", "tanh"),
            loss=spec.get("loss", "mse"),
            gram=gram if spec.get("loss") == "mvnse" else None,
            epochs=spec.get("epochs", 50_000),
            lr=spec.get("lr", 1e-3),
            lr_decay=spec.get("lr_decay", 0.99),
            decay_every=spec.get("decay_every", 1000),
            batch_size=spec.get("batch_size"),
        )
    raise ValueError(f"unknown method {name!r}")


def _method_label(spec: dict) -> str:
    if spec["name"] == "dnn":
        return f"dnn-{spec.get('activation', 'tanh')}-{spec.get('hidden_layers', 5)}x{spec.get('width', 50)}-{spec.get('loss', 'mse')}"
    return spec["name"]


class StudyProblem:
    """Shared mesh, spaces, test grid and reference test data for one study."""

    def __init__(self, config: ExperimentConfig):
        prob = config.problem
        self.mesh = pde.build_mesh(prob.get("mesh_n", 17))
        self.coefficient = pde.make_coefficient(prob["coefficient"])
        self.forcing = prob.get("forcing", 10.0)
        self.d = self.coefficient.d
        mass, stiff = pde.gram_matrices(self.mesh)
        interior = self.mesh.interior
        self.gram_l2 = mass[np.ix_(interior, interior)]
        self.gram_h1 = stiff[np.ix_(interior, interior)]
        testing = config.testing
        if "grid_level" in testing:
            self.grid = quadrature.smolyak_grid(self.d, testing["grid_level"])
        else:
            self.grid = quadrature.monte_carlo_grid(
                self.d, testing.get("mc_count", 1000), testing.get("mc_seed", 10**6)
            )
        solver = pde.DiffusionSolver(self.coefficient, self.forcing, self.mesh)
        ref = np.empty((len(self.grid), interior.size))
        for i, y in enumerate(self.grid.points):
            ref[i] = solver.solve(y).nodal[interior]
        self.reference = ref

    def dataset(self, m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        ds = pde.generate_dataset(self.coefficient, self.forcing, self.mesh, m, seed)
        return ds.points, pde.restrict_to_interior(self.mesh, ds.values)

    def errors(self, predict) -> tuple[float, float]:
        pred = predict(self.grid.points)
        e_l2 = quadrature.bochner_error(self.reference, pred, self.grid, gram=self.gram_l2)
        e_h1 = quadrature.bochner_error(self.reference, pred, self.grid, gram=self.gram_h1)
        return e_l2, e_h1


def _run_cell(problem: StudyProblem, spec: dict, points, values, trial, m, seed):
    label = _method_label(spec)
    row = {"trial": trial, "m": m, "method": label, "seed": seed}
    try:
        gram = problem.gram_h1 if spec.get("space", "h1") == "h1" else problem.gram_l2
        est = _make_method(spec, gram=np.asarray(gram.todense()))
        t0 = time.perf_counter()
        est.fit(points[:m], values[:m])
        elapsed = time.perf_counter() - t0
        e_l2, e_h1 = problem.errors(est.predict)
        row.update(err_l2=e_l2, err_h1=e_h1, train_time_s=elapsed, status="ok")
    except Exception as exc:  # cell failures are recorded, the study continues
        row.update(err_l2="", err_h1="", train_time_s="", status=f"error: {exc}")
    return row


def run_convergence_study(config: ExperimentConfig, out_dir=None, threads: int = 1) -> bool:
    """Full (trial x m x method) sweep with per-run and aggregate CSV output.

    Per trial, one dataset of size max(m_schedule) is generated with the
    trial number as the seed and every method is fitted on its first m
    samples. Returns True iff every cell succeeded.
    """
    out = Path(out_dir or config.output)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.json")
    problem = StudyProblem(config)
    m_schedule = config.sampling["m_schedule"]
    trials = config.sampling.get("trials", 1)
    seed_base = config.sampling.get("seed_base", 0)
    m_max = max(m_schedule)

    jobs = []
    datasets = {}
    for trial in range(trials):
        seed = seed_base + trial
        datasets[trial] = problem.dataset(m_max, seed)
        for m in m_schedule:
            for spec in config.methods:
                jobs.append((trial, seed, m, spec))

    def run(job):
        trial, seed, m, spec = job
        points, values = datasets[trial]
        return _run_cell(problem, spec, points, values, trial, m, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]

    runs_path = out / "runs.csv"
    with open(runs_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    aggregate = aggregate_runs(rows)
    with open(out / "aggregate.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        writer.writeheader()
        writer.writerows(aggregate)
    return all(row["status"] == "ok" for row in rows)


def aggregate_runs(rows: list[dict]) -> list[dict]:
    """Trial means per (method, m) over successful runs."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        groups.setdefault((row["method"], int(row["m"])), []).append(row)
    out = []
    for (method, m), members in sorted(groups.items()):
        out.append(
            {
                "method": method,
                "m": m,
                "trials": len(members),
                "err_l2": float(np.mean([float(r["err_l2"]) for r in members])),
                "err_h1": float(np.mean([float(r["err_h1"]) for r in members])),
                "train_time_s": float(np.mean([float(r["train_time_s"]) for r in members])),
            }
        )
    return out


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Render convergence panels from aggregate.csv (generated file).\"\"\"
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(list)
with open("aggregate.csv") as fh:
    for row in csv.DictReader(fh):
        series[row["method"]].append(
            (int(row["m"]), float(row["err_l2"]), float(row["err_h1"]), float(row["train_time_s"]))
        )

panels = [("err_l2", 1, "mean L2 test error"), ("err_h1", 2, "mean H1 test error"),
          ("train_time_s", 3, "mean training time [s]")]
fig, axes = plt.subplots(1, 3, figsize=(15, 4))
for ax, (key, col, title) in zip(axes, panels):
    for method, rows in sorted(series.items()):
        rows = sorted(rows)
        ax.plot([r[0] for r in rows], [r[col] for r in rows], marker="o", label=method)
    ax.set_xlabel("m")
    ax.set_title(title)
    if key != "train_time_s":
        ax.set_yscale("log")
    ax.legend()
fig.tight_layout()
fig.savefig("study_panels.png", dpi=150)
print("wrote study_panels.png")
"""


def emit_plots(aggregate_csv, out_dir) -> Path:
    """Write a standalone plotting script next to a copy of the aggregate data."""
    src = Path(aggregate_csv)
    if not src.exists():
        raise FileNotFoundError(f"aggregate file {src} does not exist")
    with open(src) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("aggregate file has no data rows")
    missing = [c for c in AGGREGATE_COLUMNS if c not in rows[0]]
    if missing:
        raise ValueError(f"aggregate file is missing columns: {missing}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "aggregate.csv").write_text(src.read_text())
    script = out / "plot_study.py"
    script.write_text(_PLOT_SCRIPT)
    return script


def _load_config_dict(args) -> dict:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            return json.load(fh)
    return {}


def _cmd_gen_data(args) -> int:
    cfg = _load_config_dict(args)
    kind = args.coef or cfg.get("coefficient", {}).get("kind", "affine")
    d = args.d or cfg.get("coefficient", {}).get("d", 2)
    coef = pde.make_coefficient({"kind": kind, "d": d})
    mesh = pde.build_mesh(args.mesh_n or cfg.get("mesh_n", 17))
    forcing = args.g if args.g is not None else cfg.get("forcing", 10.0)
    m = args.m or cfg.get("m", 100)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    ds = pde.generate_dataset(coef, forcing, mesh, m, seed)
    out = Path(args.out or "dataset.hvds")
    hvio.save_dataset(ds, out)
    print(f"wrote {out} (d={ds.meta['d']}, m={ds.meta['m']}, K={ds.meta['K']})")
    return 0


def _fit_common(args):
    ds = hvio.load_dataset(args.data)
    mesh = pde.build_mesh(ds.meta["mesh_n"])
    values = pde.restrict_to_interior(mesh, ds.values)
    mass, stiff = pde.gram_matrices(mesh)
    interior = mesh.interior
    gram = {"l2": mass, "h1": stiff}[args.space][np.ix_(interior, interior)]
    return ds, mesh, values, np.asarray(gram.todense())


def _cmd_run_scs(args) -> int:
    ds, mesh, values, gram = _fit_common(args)
    est = SparsePolynomialSurrogate(
        order=args.order,
        lam=args.lam if args.lam != "auto" else "auto",
        solver=args.solver,
        gram=gram,
        max_iters=args.max_iters,
    )
    t0 = time.perf_counter()
    est.fit(ds.points, values)
    elapsed = time.perf_counter() - t0
    out = Path(args.out or "scs_out")
    out.mkdir(parents=True, exist_ok=True)
    hvio.save_hilbert_vector(est.result_.solution, out / "coefficients.hvv")
    hvio.save_result_summary(est.result_, out / "summary.json")
    from .multiindex import save_index_set

    save_index_set(est.index_set_, out / "index_set.txt")
    print(
        f"fitted {args.solver} surrogate: N={len(est.index_set_)}, "
        f"iterations={est.result_.iterations}, residual={est.result_.residual:.3e}, "
        f"time={elapsed:.2f}s -> {out}"
    )
    return 0


def _cmd_train_dnn(args) -> int:
    ds, mesh, values, gram = _fit_common(args)
    est = DNNSurrogate(
        hidden_layers=args.layers,
        width=args.width,
        activation=args.activation,
        loss=args.loss,
        gram=gram if args.loss == "mvnse" else None,
        epochs=args.epochs,
        lr=args.lr,
        shuffle_seed=args.seed if args.seed is not None else 0,
    )
    t0 = time.perf_counter()
    est.fit(ds.points, values)
    elapsed = time.perf_counter() - t0
    out = Path(args.out or "dnn_out")
    out.mkdir(parents=True, exist_ok=True)
    hvio.save_model(est.model_, out / "model.hvnn", extra={"loss": args.loss})
    with open(out / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, loss in enumerate(est.history_.losses, start=1):
            writer.writerow([i, loss])
    print(
        f"trained {args.activation} {args.layers}x{args.width} ({args.loss}); "
        f"final loss={est.history_.losses[-1]:.3e}, epochs={est.history_.epochs_run}, "
        f"time={elapsed:.1f}s -> {out}"
    )
    return 0


def _cmd_test_error(args) -> int:
    ds = hvio.load_dataset(args.data)
    mesh = pde.build_mesh(ds.meta["mesh_n"])
    coef = pde.make_coefficient(ds.meta["coefficient"])
    forcing = ds.meta["forcing"].get("value", 10.0)
    grid = quadrature.smolyak_grid(ds.meta["d"], args.grid_level)
    interior = mesh.interior
    solver = pde.DiffusionSolver(coef, forcing, mesh)
    reference = np.empty((len(grid), interior.size))
    for i, y in enumerate(grid.points):
        reference[i] = solver.solve(y).nodal[interior]
    mass, stiff = pde.gram_matrices(mesh)
    gram_l2 = mass[np.ix_(interior, interior)]
    gram_h1 = stiff[np.ix_(interior, interior)]

    if args.model:
        model, _ = hvio.load_model(args.model)
        from .dnn import forward

        pred = forward(model, grid.points)
    elif args.solution:
        from .multiindex import load_index_set
        from .polybasis import evaluate_basis

        coeffs, _ = hvio.load_hilbert_vector(args.solution)
        index_set = load_index_set(args.index_set)
        pred = evaluate_basis(index_set, grid.points) @ coeffs
    else:
        raise SystemExit("one of --model or --solution is required")

    e_l2 = quadrature.bochner_error(reference, pred, grid, gram=gram_l2)
    e_h1 = quadrature.bochner_error(reference, pred, grid, gram=gram_h1)
    report = {"m_test": len(grid), "err_l2": e_l2, "err_h1": e_h1}
    print(json.dumps(report, indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    return 0


def _cmd_bounds(args) -> int:
    report = theory.theorem_bounds(
        args.m, args.d, args.eps, args.gamma, args.K, c0=args.c0, c1=args.c1, c2=args.c2
    ).as_dict()
    print(json.dumps(report, indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    return 0


def _cmd_study(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config.sampling["seed_base"] = args.seed
    ok = run_convergence_study(config, out_dir=args.out, threads=args.threads)
    print("study complete:", "all cells ok" if ok else "FAILURES recorded in runs.csv")
    return 0 if ok else 1


def _cmd_plots(args) -> int:
    script = emit_plots(args.aggregate, args.out or "plots_out")
    print(f"wrote {script}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hvapprox", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override fields")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("gen-data", help="solve the diffusion problem at seeded random points")
    common(p)
    p.add_argument("--coef", choices=["affine", "logkl"])
    p.add_argument("--d", type=int)
    p.add_argument("--mesh-n", type=int, dest="mesh_n")
    p.add_argument("--g", type=float, help="constant forcing value")
    p.add_argument("--m", type=int)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("run-scs", help="fit the sparse polynomial surrogate to a dataset")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--lam", default="auto")
    p.add_argument("--solver", choices=["srlasso", "lasso"], default="lasso")
    p.add_argument("--space", choices=["l2", "h1"], default="h1")
    p.add_argument("--max-iters", type=int, default=200_000, dest="max_iters")
    p.set_defaults(func=_cmd_run_scs)

    p = sub.add_parser("train-dnn", help="train a network surrogate on a dataset")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--width", type=int, default=50)
    p.add_argument("--activation", choices=["tanh", "relu", "leaky_relu"], default="tanh")
    p.add_argument("--loss", choices=["mse", "mvnse"], default="mse")
    p.add_argument("--space", choices=["l2", "h1"], default="h1")
    p.add_argument("--epochs", type=int, default=50_000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.set_defaults(func=_cmd_train_dnn)

    p = sub.add_parser("test-error", help="sparse-grid test errors of a fitted surrogate")
    common(p)
    p.add_argument("--data", required=True, help="dataset file (for problem metadata)")
    p.add_argument("--grid-level", type=int, default=2, dest="grid_level")
    p.add_argument("--model", help="network model file")
    p.add_argument("--solution", help="coefficient vector file")
    p.add_argument("--index-set", dest="index_set", help="index set file for --solution")
    p.set_defaults(func=_cmd_test_error)

    p = sub.add_parser("bounds", help="evaluate the theoretical bound calculator")
    common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("study", help="run a convergence study from a config file")
    common(p)
    p.set_defaults(func=_cmd_study)
    p.add_argument("--require-config", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("plots", help="emit a plotting script for an aggregate CSV")
    common(p)
    p.add_argument("--aggregate", required=True)
    p.set_defaults(func=_cmd_plots)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "study" and not args.config:
        raise SystemExit("study requires --config")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
