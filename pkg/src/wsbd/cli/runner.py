"""Executing configs: per-seed runs, ablations, grids, and the consolidated report."""
from __future__ import annotations

import csv
import io
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..grad import EvalCounter
from ..noise import DEFAULT_NOISE, NoiseModel
from ..optim import (Adam, Budget, FreezeConfig, SGD, SpsaCoefficients, TrainResult, Variant, init_params,
                     nelder_mead_minimize, spsa_train, stream, wsbd_train)
from ..optim.train import STREAM_SHOTS
from .config import ExperimentConfig

log = logging.getLogger("wsbd")

ROW_COLUMNS = ("step", "window", "n_active", "loss", "forward_passes", "shots", "wall_estimate_s")
REPORT_COLUMNS = ("task", "n_qubits", "n_layers", "optimizer", "variant", "metric", "lambda_f", "tau", "seed",
                  "fp_to_target", "max_accuracy", "final_loss", "wall_estimate_s")
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte", "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte", "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class RunRecord:
    rows: list
    summary: dict
    extra: dict = field(default_factory=dict)

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in ROW_COLUMNS])
        return buf.getvalue()

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = f"{self.summary['config_hash']}_seed{self.summary['seed']}"
        (directory / f"{stem}.csv").write_text(self.rows_csv())
        (directory / f"{stem}.json").write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        return directory / f"{stem}.json"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def build_task(cfg: ExperimentConfig, seed: int):
    from ..tasks import MnistTask, ParityTask, VqeTask

    noise = None
    if cfg.noise == "default":
        noise = NoiseModel.from_mapping(cfg.noise_overrides) if cfg.noise_overrides else DEFAULT_NOISE
    shot_seed = None if cfg.shots is None else int(stream(seed, STREAM_SHOTS).integers(2**63))
    common = {"noise": noise, "shots": cfg.shots, "shot_seed": shot_seed}
    if cfg.task == "vqe":
        return VqeTask.tfim(cfg.n_qubits, cfg.n_layers, cfg.J, cfg.h, **common)
    if cfg.task == "parity":
        return ParityTask.exhaustive(cfg.n_qubits, cfg.n_layers, **common)
    root = Path(cfg.mnist_dir)
    paths = {}
    for key, name in MNIST_FILES.items():
        candidates = [root / name, root / (name + ".gz")]
        paths[key] = next((p for p in candidates if p.exists()), candidates[0])
    return MnistTask.from_idx(cfg.n_qubits, cfg.n_layers, paths, tuple(cfg.mnist_classes),
                              cfg.mnist_train_size, cfg.mnist_test_size, rng_seed=0, **common)


class Monitor:
    """Uncounted progress tracking: target detection and the plateau rule."""

    def __init__(self, cfg: ExperimentConfig, task, target: float | None):
        self.cfg = cfg
        self.task = task
        self.kind = cfg.resolved_target_kind
        self.target = target
        self.values: list[tuple[int, float]] = []  # (step, monitored loss)
        self.max_accuracy = None
        self.fp_to_target = None
        self.plateaued = False

    def reached(self, loss: float, acc: float | None) -> bool:
        if self.target is None:
            return False
        if self.kind == "energy":
            return loss <= self.target + self.cfg.tol_e
        if self.kind == "accuracy":
            return acc is not None and acc >= self.target
        return loss <= self.target

    def __call__(self, step: int, params, row: dict) -> bool:
        if step % self.cfg.eval_every:
            return False
        if self.kind == "energy" or self.task.kind == "vqe":
            loss, acc = self.task.evaluate(params)["energy"], None
        else:
            loss, acc = self.task.mean_loss(params), self.task.accuracy(params)
            self.max_accuracy = acc if self.max_accuracy is None else max(self.max_accuracy, acc)
        self.values.append((step, loss))
        if self.reached(loss, acc):
            self.fp_to_target = row["forward_passes"]
            return True
        return self._plateau(step)

    def _plateau(self, step: int) -> bool:
        p = self.cfg.patience
        if step < p:
            return False
        before = [v for s, v in self.values if s <= step - p]
        if not before:
            return False
        improvement = min(before) - min(v for _, v in self.values)
        if improvement < self.cfg.min_improvement:
            self.plateaued = True
            return True
        return False

    @property
    def final_loss(self) -> float | None:
        return self.values[-1][1] if self.values else None


def _base(cfg: ExperimentConfig):
    if cfg.optimizer == "sgd":
        return SGD(cfg.resolved_lr)
    return Adam(cfg.resolved_lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.amsgrad)


def _freeze(cfg: ExperimentConfig, seed: int) -> FreezeConfig | None:
    if not cfg.wsbd:
        return None
    return FreezeConfig(cfg.lambda_f, cfg.tau, cfg.epsilon, Variant(cfg.variant), cfg.metric, cfg.ema_beta,
                        rng_seed=seed)


def resolve_target(cfg: ExperimentConfig, task, seed: int | None = None) -> float | None:
    value = cfg.target_value
    kind = cfg.resolved_target_kind
    if value is None:
        return task.target_energy if kind == "energy" else (1.0 if kind == "accuracy" else None)
    if value == "exact":
        return task.target_energy
    if value == "baseline":
        return None  # filled in by run() once the baseline has converged
    return float(value)


def train_one(cfg: ExperimentConfig, seed: int, target: float | None = None) -> RunRecord:
    """One seed of one config. ``target`` overrides the configured one."""
    task = build_task(cfg, seed)
    if target is None:
        target = resolve_target(cfg, task, seed)
    n = task.circuit.n_params
    params0 = init_params(n, seed, cfg.init_low, cfg.init_high)
    counter = EvalCounter(seconds_per_fp=cfg.seconds_per_fp, shots_per_pass=task.shots_per_eval)
    budget = Budget(cfg.max_fp, cfg.max_steps)
    monitor = Monitor(cfg, task, target)
    if cfg.optimizer in ("sgd", "adam"):
        result = wsbd_train(task, params0, _freeze(cfg, seed), _base(cfg), budget, seed, counter,
                            cfg.batch_size, stop=monitor)
    elif cfg.optimizer == "spsa":
        coeffs = SpsaCoefficients(cfg.spsa_a, cfg.spsa_c, cfg.spsa_A)
        result = spsa_train(task, params0, budget, seed, coeffs, counter, cfg.batch_size, stop=monitor)
    else:
        result = _nelder_mead(cfg, task, params0, counter, monitor)
    for r in result.rows:
        r["window"] = r["step"] // cfg.tau
    if not monitor.values and result.params is not None:
        monitor(0, result.params, result.rows[-1] if result.rows else {"forward_passes": 0})
    summary = {
        "task": cfg.task, "n_qubits": cfg.n_qubits, "n_layers": cfg.n_layers, "optimizer": cfg.optimizer,
        "variant": cfg.variant if cfg.wsbd else "", "metric": cfg.metric if cfg.wsbd else "",
        "lambda_f": cfg.lambda_f if cfg.wsbd else "", "tau": cfg.tau if cfg.wsbd else "", "seed": seed,
        "fp_to_target": monitor.fp_to_target, "max_accuracy": monitor.max_accuracy,
        "final_loss": monitor.final_loss, "wall_estimate_s": counter.wall_clock_estimate_s,
        "forward_passes": counter.forward_passes, "shots": counter.shots_consumed,
        "target": target, "target_kind": cfg.resolved_target_kind,
        "target_reached": monitor.fp_to_target is not None, "plateaued": monitor.plateaued,
        "budget_exhausted": result.exhausted, "steps": len(result.rows),
        "config_hash": cfg.config_hash(), "label": cfg.label,
    }
    return RunRecord(result.rows, summary, {"params": result.params, "step0_loss":
                                            result.rows[0]["loss"] if result.rows else None})


def _nelder_mead(cfg, task, params0, counter, monitor) -> TrainResult:
    if task.kind == "vqe":
        cost = task.objective()
    else:
        cost = task.objective(task.train_set)
    budget = cfg.max_fp if cfg.max_fp is not None else cfg.max_steps * (task.circuit.n_params + 1)
    per_eval = max(1, getattr(cost, "n_instances", 1))
    res = nelder_mead_minimize(cost, params0, budget // per_eval, counter)
    result = TrainResult(params=res.params, exhausted=not res.converged)
    for i, (evals, best) in enumerate(res.history):
        row = {"step": i, "window": 0, "n_active": len(params0), "loss": best,
               "forward_passes": evals * per_eval, "shots": evals * per_eval * counter.shots_per_pass,
               "wall_estimate_s": evals * per_eval * counter.seconds_per_fp}
        result.rows.append(row)
    if result.rows:
        monitor(len(result.rows), res.params, result.rows[-1])
    return result


def _run_job(args):
    cfg, seed, target = args
    return train_one(cfg, seed, target)


def _map(jobs, parallel: int):
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def _median(values):
    vals = [v for v in values if v is not None]
    return statistics.median(vals) if vals else None


def _cv(values):
    vals = [v for v in values if v is not None]
    if len(vals) < 2:
        return None
    mean = statistics.fmean(vals)
    return statistics.pstdev(vals) / mean if mean else None


def aggregate(records: list[RunRecord]) -> dict:
    fps = [r.summary["fp_to_target"] for r in records]
    return {
        "label": records[0].summary["label"] if records else "",
        "n_seeds": len(records),
        "n_reached": sum(f is not None for f in fps),
        "median_fp_to_target": _median(fps),
        "cv_fp_to_target": _cv(fps),
        "median_final_loss": _median([r.summary["final_loss"] for r in records]),
        "median_max_accuracy": _median([r.summary["max_accuracy"] for r in records]),
    }


def reduction(fp_method, fp_baseline) -> float | None:
    if fp_method is None or fp_baseline in (None, 0):
        return None
    return 1.0 - fp_method / fp_baseline


def run(cfg: ExperimentConfig, parallel: int = 1, out: str | None = None) -> dict:
    """All seeds of ``cfg``; with target.value = "baseline" the base optimizer runs first."""
    out_dir = Path(out or cfg.out)
    baseline_summary = None
    target = None
    if cfg.target_value == "baseline":
        base_cfg = cfg.with_(wsbd=False, target_value=None, target_kind="loss")
        base_records = _map([(base_cfg, s, None) for s in cfg.seeds], parallel)
        converged = _median([r.summary["final_loss"] for r in base_records])
        target = converged
        tgt_cfg = cfg.with_(wsbd=False, target_value=float(converged))
        base_records = _map([(tgt_cfg, s, target) for s in cfg.seeds], parallel)
        for r in base_records:
            r.write(out_dir)
        baseline_summary = aggregate(base_records)
        baseline_summary["converged_value"] = converged
        cfg = cfg.with_(target_value=float(converged))
    records = _map([(cfg, s, target) for s in cfg.seeds], parallel)
    for r in records:
        r.write(out_dir)
    summary = aggregate(records)
    summary["config_hash"] = cfg.config_hash()
    if baseline_summary is not None:
        summary["baseline"] = baseline_summary
        summary["fp_reduction"] = reduction(summary["median_fp_to_target"], baseline_summary["median_fp_to_target"])
    (out_dir / f"summary_{cfg.config_hash()}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {"records": records, "summary": summary}


def ablate(cfg: ExperimentConfig, parallel: int = 1, out: str | None = None) -> dict:
    """Every variant on the same seeds; initial params depend only on the seed, so they are shared."""
    out_dir = Path(out or cfg.out)
    table = []
    per_variant = {}
    for variant in Variant:
        vcfg = cfg.with_(wsbd=True, variant=variant.value)
        records = _map([(vcfg, s, None) for s in cfg.seeds], parallel)
        for r in records:
            r.write(out_dir)
        per_variant[variant.value] = records
        agg = aggregate(records)
        agg["variant"] = variant.value
        table.append(agg)
    table.sort(key=lambda a: (a["median_fp_to_target"] is None, a["median_fp_to_target"] or 0.0))
    with open(out_dir / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("variant", "seed", "fp_to_target", "final_loss", "max_accuracy", "step0_loss"))
        for agg in table:
            for r in per_variant[agg["variant"]]:
                s = r.summary
                w.writerow([agg["variant"], s["seed"], _fmt(s["fp_to_target"]), _fmt(s["final_loss"]),
                            _fmt(s["max_accuracy"]), _fmt(r.extra["step0_loss"])])
    return {"table": table, "records": per_variant}


def grid_cells(cfg: ExperimentConfig, lambdas=None, taus=None) -> list[tuple[float, int]]:
    lambdas = list(cfg.grid_lambda_f if lambdas is None else lambdas)
    taus = list(cfg.grid_tau if taus is None else taus)
    if not lambdas or not taus:
        raise ValueError("grid needs non-empty lambda_f and tau lists")
    if cfg.grid_mode == "cross":
        return [(l, t) for l in lambdas for t in taus]
    return [(l, cfg.tau) for l in lambdas] + [(cfg.lambda_f, t) for t in taus]


def grid(cfg: ExperimentConfig, lambdas=None, taus=None, parallel: int = 1, out: str | None = None) -> list[dict]:
    out_dir = Path(out or cfg.out)
    cells = grid_cells(cfg, lambdas, taus)
    done: dict = {}
    rows = []
    for lam, tau in cells:
        if (lam, tau) not in done:
            ccfg = cfg.with_(wsbd=True, lambda_f=float(lam), tau=int(tau))
            records = _map([(ccfg, s, None) for s in cfg.seeds], parallel)
            for r in records:
                r.write(out_dir)
            done[(lam, tau)] = aggregate(records)
        agg = done[(lam, tau)]
        rows.append({"lambda_f": lam, "tau": tau, "median_fp_to_target": agg["median_fp_to_target"],
                     "final_loss": agg["median_final_loss"]})
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "grid.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lambda_f", "tau", "median_fp_to_target", "final_loss"))
        for r in rows:
            w.writerow([_fmt(r[k]) for k in ("lambda_f", "tau", "median_fp_to_target", "final_loss")])
    return rows


def report(directory, out_csv=None, out_json=None) -> list[dict]:
    """Merge every ``*_seed*.json`` summary below ``directory`` into one table."""
    directory = Path(directory)
    merged: dict = {}
    skipped = []
    for path in sorted(directory.glob("*_seed*.json")):
        try:
            s = json.loads(path.read_text())
            key = (s["config_hash"], s["seed"])
            row = {c: s[c] for c in REPORT_COLUMNS}
        except (OSError, ValueError, KeyError, TypeError) as exc:
            skipped.append(path.name)
            log.warning("skipping unreadable record %s (%s)", path, exc)
            continue
        merged[key] = row
    if skipped:
        log.warning("skipped %d record(s): %s", len(skipped), ", ".join(skipped))
    rows = [merged[k] for k in sorted(merged, key=lambda k: (k[0], k[1]))]
    out_csv = Path(out_csv) if out_csv else directory / "report.csv"
    out_json = Path(out_json) if out_json else directory / "report.json"
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])
    groups: dict = {}
    for (h, _), r in sorted(merged.items()):
        groups.setdefault(h, []).append(r)
    summary = {h: {"n_seeds": len(rs), "median_fp_to_target": _median([r["fp_to_target"] for r in rs]),
                   "cv_fp_to_target": _cv([r["fp_to_target"] for r in rs])} for h, rs in groups.items()}
    out_json.write_text(json.dumps({"rows": len(rows), "skipped": skipped, "groups": summary},
                                   indent=2, sort_keys=True) + "\n")
    return rows
