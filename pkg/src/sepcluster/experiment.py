"""Experiment configuration, instance generation and the sweep engine.

A sweep runs generate -> cluster -> evaluate -> verify for every point of
(c grid) x (k grid) x (gamma grid) x trials. Each trial draws its seed from
``derive_seed(master_seed, c_index, k_index, gamma_index, trial)``, so the
result of a trial does not depend on scheduling, and rows are sorted by their
axes before anything is written.
"""

from __future__ import annotations

import csv
import io as _io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import analysis
from .algorithm import ClusterOptions, cluster
from .errors import InputError
from .generators import PlantedPartitionSpec, gaussian_instance, gen_orss, gen_planted_partition
from .model import spectral_stats
from .seeds import derive_seed

GENERATOR_KINDS = ("gaussian", "planted", "orss")


def _tuple(values, name, cast=float) -> tuple:
    if isinstance(values, (int, float)):
        values = [values]
    out = tuple(cast(v) for v in values)
    if not out:
        raise InputError(f"{name} must be non-empty")
    return out


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "gaussian"
    k: int = 4
    d: int = 50
    n: int = 2000
    target_c: float = 100.0  # gaussian
    sigma: float = 1.0  # gaussian, orss
    weights: tuple | None = None  # gaussian; uniform when omitted
    p_in: float = 0.5  # planted
    p_out: float = 0.1  # planted
    c0: float = 1.0  # planted condition multiplier
    delta: float = 0.05  # planted failure probability
    epsilon: float = 0.01  # orss

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise InputError(f"generator kind must be one of {GENERATOR_KINDS}, got {self.kind!r}")
        if self.k < 1 or self.d < 1 or self.n < self.k:
            raise InputError("need k >= 1, d >= 1 and n >= k")
        if self.weights is not None:
            object.__setattr__(self, "weights", _tuple(self.weights, "weights"))
        if not (0 <= self.p_in <= 1 and 0 <= self.p_out <= 1):
            raise InputError("p_in and p_out must lie in [0, 1]")
        if not 0 < self.epsilon < 0.25:
            raise InputError("epsilon must lie in (0, 1/4)")


@dataclass(frozen=True)
class SweepAxes:
    c_grid: tuple = (100.0,)
    k_grid: tuple = (4,)
    gamma_grid: tuple = (1.0,)
    trials: int = 1

    def __post_init__(self):
        object.__setattr__(self, "c_grid", _tuple(self.c_grid, "c_grid"))
        object.__setattr__(self, "k_grid", _tuple(self.k_grid, "k_grid", int))
        object.__setattr__(self, "gamma_grid", _tuple(self.gamma_grid, "gamma_grid"))
        if self.trials < 1:
            raise InputError("trials must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    options: ClusterOptions = field(default_factory=ClusterOptions)
    suites: tuple = analysis.SUITES
    sweep: SweepAxes = field(default_factory=SweepAxes)
    out: str | None = None
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "suites", tuple(self.suites))
        unknown = [s for s in self.suites if s not in analysis.SUITES]
        if unknown:
            raise InputError(f"unknown suite(s) {unknown}; choose from {list(analysis.SUITES)}")

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("suites",):
            out[key] = list(out[key])
        for key in ("c_grid", "k_grid", "gamma_grid"):
            out["sweep"][key] = list(out["sweep"][key])
        if out["generator"]["weights"] is not None:
            out["generator"]["weights"] = list(out["generator"]["weights"])
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> ExperimentConfig:
        if not isinstance(obj, dict):
            raise InputError("config must be a JSON object")

        def build(kind, raw):
            raw = raw or {}
            allowed = {f.name for f in fields(kind)}
            extra = set(raw) - allowed
            if extra:
                raise InputError(f"unknown {kind.__name__} key(s): {sorted(extra)}")
            try:
                return kind(**raw)
            except TypeError as exc:
                raise InputError(str(exc)) from exc

        extra = set(obj) - {f.name for f in fields(cls)}
        if extra:
            raise InputError(f"unknown config key(s): {sorted(extra)}")
        return cls(
            generator=build(GeneratorConfig, obj.get("generator")),
            options=build(ClusterOptions, obj.get("options")),
            suites=tuple(obj.get("suites", analysis.SUITES)),
            sweep=build(SweepAxes, obj.get("sweep")),
            out=obj.get("out"),
            master_seed=int(obj.get("master_seed", 0)),
        )


# ---------------------------------------------------------------------------
# Instances


def planted_spec(cfg: GeneratorConfig, k: int) -> PlantedPartitionSpec:
    P = np.full((k, k), cfg.p_out)
    np.fill_diagonal(P, cfg.p_in)
    sizes = np.full(k, cfg.n // k)
    sizes[: cfg.n % k] += 1
    return PlantedPartitionSpec(k, P, sizes)


def generate_instance(cfg: GeneratorConfig, seed: int, k: int | None = None, target_c: float | None = None):
    """Returns (A, T, certificate dict). ``k`` and ``target_c`` override the config values."""
    k = cfg.k if k is None else int(k)
    if cfg.kind == "gaussian":
        c = cfg.target_c if target_c is None else target_c
        weights = None if cfg.weights is None else np.asarray(cfg.weights)
        A, T, spec, placement = gaussian_instance(k, cfg.d, cfg.n, c, cfg.sigma, weights, seed)
        cert = {"kind": "gaussian", "spec": spec.to_json(), "placement": asdict(placement)}
    elif cfg.kind == "planted":
        spec = planted_spec(cfg, k)
        A, T, report = gen_planted_partition(spec, seed, cfg.c0, cfg.delta)
        cert = {"kind": "planted", "spec": spec.to_json(), "condition": report.to_json()}
    else:
        A, T, orss = gen_orss(k, cfg.d, cfg.epsilon, cfg.n, seed, cfg.sigma)
        cert = {"kind": "orss", "orss": orss.to_json()}
    cert["stats"] = spectral_stats(A, T).to_json()
    return A, T, cert


# ---------------------------------------------------------------------------
# Sweep

TRIAL_COLUMNS = (
    "c_target", "k", "gamma", "trial", "seed", "measured_c", "degenerate", "misclassified_fraction",
    "part1_misclassified_fraction", "cost_ratio", "part1_cost_ratio", "theta_error", "center_distance",
    "empty_core", "part3_converged", "checks", "check_failures",
)
AGG_COLUMNS = (
    "c_target", "k", "gamma", "trials", "mean_measured_c", "misclassified_fraction",
    "part1_misclassified_fraction", "cost_ratio", "part1_cost_ratio", "theta_error", "center_distance",
    "check_pass_rate",
)


@dataclass(frozen=True)
class TrialTask:
    config: ExperimentConfig
    c_index: int
    k_index: int
    gamma_index: int
    trial: int


def run_trial(task: TrialTask) -> tuple[dict, list[analysis.InequalityCheck]]:
    cfg = task.config
    c = cfg.sweep.c_grid[task.c_index]
    k = cfg.sweep.k_grid[task.k_index]
    gamma = cfg.sweep.gamma_grid[task.gamma_index]
    seed = derive_seed(cfg.master_seed, task.c_index, task.k_index, task.gamma_index, task.trial)
    A, T, _ = generate_instance(cfg.generator, seed, k, c)
    st = spectral_stats(A, T)
    opts = ClusterOptions(derive_seed(seed, cfg.options.seed), cfg.options.max_iter, cfg.options.run_part3)
    run = cluster(A, k, opts)
    final = analysis.evaluate(A, T, run.final_labels, run.final_centers)
    part1 = analysis.evaluate(A, T, run.z_labels, run.nu)
    checks = analysis.run_suites(A, T, run, cfg.suites, gamma, st) if cfg.suites else []
    theta_match = analysis.match_centers(T.means, run.theta)
    # ||theta_r - mu_r|| in units of ||A - C|| / sqrt(n_r)
    scale = st.spec_norm / np.sqrt(T.sizes)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta_err = np.where(scale > 0, theta_match.distances / scale, 0.0)
    row = {
        "c_target": c,
        "k": k,
        "gamma": gamma,
        "trial": task.trial,
        "seed": seed,
        "measured_c": st.separation_c,
        "degenerate": int(st.degenerate),
        "misclassified_fraction": final.total_misclassified / T.n,
        "part1_misclassified_fraction": part1.total_misclassified / T.n,
        "cost_ratio": final.cost_ratio,
        "part1_cost_ratio": part1.cost_ratio,
        "theta_error": float(theta_err.max()),
        "center_distance": float(final.center_distances.max()),
        "empty_core": int(run.empty_core.sum()),
        "part3_converged": int(run.part3_converged),
        "checks": len(checks),
        "check_failures": sum(not ch.holds for ch in checks),
    }
    return row, checks


def sweep_tasks(cfg: ExperimentConfig) -> list[TrialTask]:
    ax = cfg.sweep
    return [
        TrialTask(cfg, ci, ki, gi, t)
        for ci in range(len(ax.c_grid))
        for ki in range(len(ax.k_grid))
        for gi in range(len(ax.gamma_grid))
        for t in range(ax.trials)
    ]


def run_sweep(cfg: ExperimentConfig, jobs: int = 1):
    """All trials of the grid. Returns (rows sorted by axes, checks in the same order)."""
    tasks = sweep_tasks(cfg)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_trial, tasks))
    else:
        results = [run_trial(t) for t in tasks]
    order = sorted(range(len(tasks)), key=lambda i: (results[i][0]["c_target"], results[i][0]["k"],
                                                     results[i][0]["gamma"], results[i][0]["trial"]))
    rows = [results[i][0] for i in order]
    checks = [(rows_i, ch) for rows_i, i in enumerate(order) for ch in results[i][1]]
    return rows, checks


def _mean(values) -> float:
    values = [v for v in values]
    if any(math.isinf(v) for v in values):
        return math.inf
    return math.fsum(values) / len(values)


def aggregate_rows(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["c_target"], row["k"], row["gamma"]), []).append(row)
    out = []
    for (c, k, gamma), group in sorted(groups.items()):
        total = sum(r["checks"] for r in group)
        failed = sum(r["check_failures"] for r in group)
        out.append({
            "c_target": c,
            "k": k,
            "gamma": gamma,
            "trials": len(group),
            "mean_measured_c": _mean(r["measured_c"] for r in group),
            "misclassified_fraction": _mean(r["misclassified_fraction"] for r in group),
            "part1_misclassified_fraction": _mean(r["part1_misclassified_fraction"] for r in group),
            "cost_ratio": _mean(r["cost_ratio"] for r in group),
            "part1_cost_ratio": _mean(r["part1_cost_ratio"] for r in group),
            "theta_error": _mean(r["theta_error"] for r in group),
            "center_distance": _mean(r["center_distance"] for r in group),
            "check_pass_rate": 1.0 if total == 0 else (total - failed) / total,
        })
    return out


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_text(rows: list[dict], columns, comments: dict | None = None) -> str:
    buf = _io.StringIO()
    for key, value in sorted((comments or {}).items()):
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def summary_rows(checks) -> list[dict]:
    return [
        {"fact_id": s.fact_id, "trials": s.trials, "failures": s.failures, "worst_ratio": s.worst_ratio}
        for s in analysis.summarize(checks)
    ]


SUMMARY_COLUMNS = ("fact_id", "trials", "failures", "worst_ratio")


def write_plots(agg: list[dict], out_dir) -> list[str]:
    """Three SVG line plots against the target separation, one line per (k, gamma)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "sepcluster"
    panels = (
        ("misclassification_vs_c.svg", "misclassified_fraction", "misclassified fraction"),
        ("cost_ratio_vs_c.svg", "cost_ratio", "k-means cost / ||A - C||_F^2"),
        ("theta_error_vs_c.svg", "theta_error", "max_r ||theta_r - mu_r|| sqrt(n_r) / ||A - C||"),
    )
    written = []
    lines = sorted({(r["k"], r["gamma"]) for r in agg})
    for fname, key, ylabel in panels:
        fig, ax = plt.subplots(figsize=(6, 4))
        for k, gamma in lines:
            pts = sorted((r["c_target"], r[key]) for r in agg if r["k"] == k and r["gamma"] == gamma)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"k={k}, gamma={gamma:g}")
        ax.set_xlabel("target separation constant c")
        ax.set_ylabel(ylabel)
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = f"{out_dir}/{fname}"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


__all__ = [
    "AGG_COLUMNS",
    "ExperimentConfig",
    "GENERATOR_KINDS",
    "GeneratorConfig",
    "SUMMARY_COLUMNS",
    "SweepAxes",
    "TRIAL_COLUMNS",
    "TrialTask",
    "aggregate_rows",
    "csv_text",
    "generate_instance",
    "planted_spec",
    "run_sweep",
    "run_trial",
    "summary_rows",
    "sweep_tasks",
    "write_plots",
]
