"""Desk-scale experiment runners: Gaussian toy, logistic regression, BNN regression."""

import dataclasses
import json
import logging
from dataclasses import dataclass

import numpy as np

from steinflow import data as datalib
from steinflow.dynamics import CLOSED_FORM, WEIGHT_MODES, run_mk_svgd, run_svgd
from steinflow.errors import InputError
from steinflow.kernel import build_grid
from steinflow.metrics import EvalReport, classification_metrics, particle_moments, regression_metrics
from steinflow.targets import BlrPosterior, BnnPosterior, predictive_blr, predictive_bnn, toy_gaussian

log = logging.getLogger(__name__)

TASKS = ("gaussian", "logreg", "bnn")

TASK_DEFAULTS = {
    "gaussian": dict(particles=500, iters=200, step=1.0, grid_lo=2.0**-4),
    "logreg": dict(particles=100, iters=1000, step=0.05, grid_lo=2.0**2, batch=100, train_fraction=0.8,
                   subsample=datalib.DEFAULT_SUBSAMPLE),
    "bnn": dict(particles=20, iters=1000, step=0.02, grid_lo=2.0**-4, batch=100, train_fraction=0.9, trials=10),
}


@dataclass
class ExperimentConfig:
    task: str = "gaussian"
    particles: int = 500
    iters: int = 200
    step: float = 1.0
    seed: int = 0
    trials: int = 1
    grid_lo: float = 2.0**-4
    grid_factor: float = 2.0
    grid_count: int = 10
    # None runs multi-kernel SVGD; "median" or a number runs vanilla SVGD
    bandwidth: str | float | None = None
    batch: int | None = None
    weight_mode: str = CLOSED_FORM
    weight_step: float = 0.05
    weight_cadence: int = 1
    dataset: str | None = None
    label: int | str = -1
    delimiter: str | None = ","
    header: bool = False
    train_fraction: float = 0.8
    subsample: int | None = None
    standardize: bool = True
    eval_every: int = 50
    hidden: int = 50
    prior_a: float = 1.0
    prior_b: float = 0.01
    out: str | None = None

    @classmethod
    def for_task(cls, task, **overrides):
        if task not in TASKS:
            raise InputError(f"unknown task {task!r}; expected one of {TASKS}")
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(overrides) - fields
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        values = {**TASK_DEFAULTS[task], **{k: v for k, v in overrides.items() if v is not None}}
        cfg = cls(task=task, **values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, task=None, **overrides):
        with open(path) as fh:
            values = json.load(fh)
        task = task or values.pop("task", None)
        values.pop("task", None)
        if task is None:
            raise InputError("config file does not name a task")
        return cls.for_task(task, **{**values, **{k: v for k, v in overrides.items() if v is not None}})

    def validate(self):
        for name in ("particles", "iters", "trials", "grid_count", "weight_cadence", "eval_every", "hidden"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be a positive integer")
        for name in ("step", "grid_lo", "grid_factor", "weight_step"):
            if not float(getattr(self, name)) > 0:
                raise InputError(f"{name} must be positive")
        if self.batch is not None and self.batch < 1:
            raise InputError("batch must be positive")
        if self.weight_mode not in WEIGHT_MODES:
            raise InputError(f"weight mode must be one of {WEIGHT_MODES}")
        if self.bandwidth is not None and self.bandwidth != "median":
            self.bandwidth = float(self.bandwidth)
            if not self.bandwidth > 0:
                raise InputError("bandwidth must be positive")
        if self.task != "gaussian" and not self.dataset:
            raise InputError(f"task {self.task!r} needs a dataset")
        if not 0 < self.train_fraction < 1:
            raise InputError("train fraction must lie in (0, 1)")

    def grid(self):
        return build_grid(self.grid_lo, self.grid_count, self.grid_factor)

    def kernel_label(self):
        return "mk-svgd" if self.bandwidth is None else f"svgd(h={self.bandwidth})"

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class RunResult:
    config: ExperimentConfig
    seed: int
    particles: np.ndarray
    trace: object
    report: EvalReport


def _run(cfg, model, init, seed, callback=None):
    if cfg.bandwidth is None:
        return run_mk_svgd(
            model, init, cfg.grid(), cfg.iters, cfg.step, seed=seed,
            weight_cadence=cfg.weight_cadence, weight_mode=cfg.weight_mode,
            weight_step=cfg.weight_step, batch_size=cfg.batch, callback=callback,
        )
    return run_svgd(model, init, cfg.bandwidth, cfg.iters, cfg.step, seed=seed, batch_size=cfg.batch, callback=callback)


def run_gaussian(cfg, seed=None):
    seed = cfg.seed if seed is None else seed
    target = toy_gaussian()
    rng = np.random.default_rng(seed)
    x, trace = _run(cfg, target, target.init_particles(cfg.particles, rng), seed)
    mean, cov = particle_moments(x)
    return RunResult(cfg, seed, x, trace, EvalReport(mean=mean, covariance=cov))


BUILTIN_DATASETS = {"boston": datalib.load_boston}


def load_dataset(cfg):
    if cfg.dataset in BUILTIN_DATASETS:
        return BUILTIN_DATASETS[cfg.dataset]()
    task = "classification" if cfg.task == "logreg" else "regression"
    delimiter = None if cfg.delimiter in (None, "whitespace") else cfg.delimiter
    schema = datalib.CsvSchema(label=cfg.label, delimiter=delimiter, header=cfg.header, task=task)
    return datalib.load_csv(cfg.dataset, schema)


def _prepare(cfg, dataset, seed):
    dataset = dataset if dataset is not None else load_dataset(cfg)
    dataset = datalib.subsample(dataset, cfg.subsample, seed)
    train, test = datalib.split(dataset, cfg.train_fraction, seed)
    if cfg.standardize:
        train, test, stats = datalib.standardize(train, test)
    else:
        stats = None
    return train, test, stats


def run_logreg(cfg, seed=None, dataset=None):
    seed = cfg.seed if seed is None else seed
    train, test, _ = _prepare(cfg, dataset, seed)
    model = BlrPosterior(train.features, train.targets, a=cfg.prior_a, b=cfg.prior_b)
    rng = np.random.default_rng(seed)

    def evaluate(x):
        return classification_metrics(predictive_blr(x, test.features), test.targets)

    def callback(t, x):
        if (t + 1) % cfg.eval_every == 0 or t + 1 == cfg.iters:
            acc, ll = evaluate(x)
            return {"test_accuracy": acc, "test_log_likelihood": ll}
        return None

    x, trace = _run(cfg, model, model.init_particles(cfg.particles, rng), seed, callback)
    acc, ll = evaluate(x)
    return RunResult(cfg, seed, x, trace, EvalReport(accuracy=acc, test_log_likelihood=ll))


def run_bnn(cfg, seed=None, dataset=None):
    seed = cfg.seed if seed is None else seed
    dataset = dataset if dataset is not None else load_dataset(cfg)
    train, test = datalib.split(datalib.subsample(dataset, cfg.subsample, seed), cfg.train_fraction, seed)
    train_z, _, stats = datalib.standardize(train, test, scale_targets=True)
    model = BnnPosterior(train_z.features, train_z.targets, hidden=cfg.hidden)
    rng = np.random.default_rng(seed)

    def evaluate(x):
        means, precisions = predictive_bnn(x, test.features, stats)
        return regression_metrics(means, precisions, test.targets)

    def callback(t, x):
        if (t + 1) % cfg.eval_every == 0 or t + 1 == cfg.iters:
            rmse, ll = evaluate(x)
            return {"test_rmse": rmse, "test_log_likelihood": ll}
        return None

    x, trace = _run(cfg, model, model.init_particles(cfg.particles, rng), seed, callback)
    rmse, ll = evaluate(x)
    return RunResult(cfg, seed, x, trace, EvalReport(rmse=rmse, test_log_likelihood=ll))


RUNNERS = {"gaussian": run_gaussian, "logreg": run_logreg, "bnn": run_bnn}


def run_trials(cfg, dataset=None):
    """Run ``cfg.trials`` trials with seeds ``cfg.seed, cfg.seed + 1, ...``."""
    runner = RUNNERS[cfg.task]
    results = []
    for k in range(cfg.trials):
        seed = cfg.seed + k
        if cfg.task == "gaussian":
            res = runner(cfg, seed)
        else:
            res = runner(cfg, seed, dataset)
        log.info("%s %s trial %d (seed %d): %s", cfg.task, cfg.kernel_label(), k, seed, res.report.as_dict())
        results.append(res)
    return results


def aggregate(results):
    """Mean and standard deviation of every scalar report field across trials."""
    reports = [r.report.as_dict() for r in results]
    out = {"trials": len(results), "seeds": [r.seed for r in results]}
    for key in reports[0] if reports else []:
        vals = np.array([rep[key] for rep in reports], dtype=float)
        out[key] = {"mean": vals.mean(axis=0).tolist(), "std": vals.std(axis=0).tolist()}
    return out
