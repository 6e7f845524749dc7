"""Grid and random hyperparameter search scored by k-fold CV RMSE."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import FoldPlan, apply_standardizer, fit_standardizer
from .errors import EmptySpace, FoldError, PdmError
from .models import ModelConfig, fit

logger = logging.getLogger(__name__)

# tuned setting commonly reported for the regularized booster on AI4I;
# kept as a labelled reference row whenever a search evaluates it
REFERENCE_OPTIMUM = {
    "n_estimators": 150,
    "max_depth": 6,
    "learning_rate": 0.1,
    "subsample": 0.8,
    "colsample_bytree": 0.7,
}


@dataclass
class CVScore:
    fold_rmse: list[float]
    mean: float
    std: float


@dataclass
class SearchSpace:
    """Candidate values per hyperparameter for one model family.

    ``fixed`` holds overrides applied to every candidate on top of the
    family defaults. Random search draws ``budget`` configurations,
    picking each hyperparameter uniformly from its listed values.
    """

    family: str
    grid: dict[str, list]
    fixed: dict = field(default_factory=dict)
    budget: int = 20

    def __post_init__(self):
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise EmptySpace(f"search space for {self.family!r} has no candidates")
        for name, values in self.grid.items():
            for v in values:
                ModelConfig.create(self.family, **{**self.fixed, name: v})

    def config(self, params: dict) -> ModelConfig:
        return ModelConfig.create(self.family, **{**self.fixed, **params})

    def enumerate(self) -> list[dict]:
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def sample(self, rng: np.random.Generator, budget: int) -> list[dict]:
        keys = list(self.grid)
        draws = []
        for _ in range(budget):
            draws.append({k: self.grid[k][int(rng.integers(len(self.grid[k])))] for k in keys})
        return draws


def _fold_rmse(config: ModelConfig, X, y, plan: FoldPlan, fold: int) -> float:
    train, test = plan.train_rows(fold), plan.test_rows(fold)
    try:
        scaler = fit_standardizer(X, train)
        model = fit(config, apply_standardizer(scaler, X[train]), y[train])
        pred = model.predict(apply_standardizer(scaler, X[test]))
    except PdmError as exc:
        raise FoldError(fold, exc) from exc
    return float(np.sqrt(np.mean((y[test] - pred) ** 2)))


def _score(fold_rmse) -> CVScore:
    arr = np.asarray(fold_rmse, dtype=np.float64)
    return CVScore(fold_rmse=[float(v) for v in arr], mean=float(arr.mean()), std=float(arr.std()))


def cross_validate(config: ModelConfig, X, y, plan: FoldPlan, threads: int = 1) -> CVScore:
    """Per-fold RMSE with the standardizer refit on each fold's training rows."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    folds = range(plan.k)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(lambda i: _fold_rmse(config, X, y, plan, i), folds))
    else:
        scores = [_fold_rmse(config, X, y, plan, i) for i in folds]
    return _score(scores)


@dataclass
class TuningResult:
    family: str
    method: str
    params: list[dict]
    fold_rmse: np.ndarray
    mean_rmse: np.ndarray
    std_rmse: np.ndarray
    best_index: int
    k: int
    seed: int
    fixed: dict = field(default_factory=dict)
    reference_index: int | None = None

    @property
    def best_params(self) -> dict:
        return self.params[self.best_index]

    @property
    def best_config(self) -> ModelConfig:
        return ModelConfig.create(self.family, **{**self.fixed, **self.best_params})

    @property
    def best_mean_rmse(self) -> float:
        return float(self.mean_rmse[self.best_index])

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "method": self.method,
            "k": self.k,
            "seed": self.seed,
            "fixed": self.fixed,
            "best_index": self.best_index,
            "best_params": self.best_params,
            "best_mean_rmse": self.best_mean_rmse,
            "reference_params": REFERENCE_OPTIMUM,
            "reference_index": self.reference_index,
            "reference_mean_rmse": None if self.reference_index is None else float(self.mean_rmse[self.reference_index]),
            "configs": [
                {
                    "index": i,
                    "params": p,
                    "fold_rmse": [float(v) for v in self.fold_rmse[i]],
                    "mean_rmse": float(self.mean_rmse[i]),
                    "std_rmse": float(self.std_rmse[i]),
                }
                for i, p in enumerate(self.params)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["config", "fold", "rmse", "params"])
        for i, p in enumerate(self.params):
            for f in range(self.k):
                writer.writerow([i, f, repr(float(self.fold_rmse[i, f])), json.dumps(p, sort_keys=True)])
        return buf.getvalue()


def _reference_index(params: list[dict], fixed: dict) -> int | None:
    for i, p in enumerate(params):
        merged = {**fixed, **p}
        if all(merged.get(k) == v for k, v in REFERENCE_OPTIMUM.items()):
            return i
    return None


def _evaluate(space: SearchSpace, params: list[dict], X, y, plan: FoldPlan, threads: int):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    # identical draws share one evaluation
    unique = []
    for p in params:
        key = json.dumps(p, sort_keys=True)
        if key not in unique:
            unique.append(key)
    cells = [(u, f) for u in range(len(unique)) for f in range(plan.k)]
    configs = [space.config(json.loads(u)) for u in unique]

    def run(cell):
        u, f = cell
        return _fold_rmse(configs[u], X, y, plan, f)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(run, cells))
    else:
        values = [run(c) for c in cells]
    table = np.asarray(values, dtype=np.float64).reshape(len(unique), plan.k)
    rows = np.stack([table[unique.index(json.dumps(p, sort_keys=True))] for p in params])
    return rows


def _result(space, method, params, fold_rmse, plan, seed) -> TuningResult:
    mean = fold_rmse.mean(axis=1)
    std = fold_rmse.std(axis=1)
    best = int(np.argmin(mean))  # first minimum -> enumeration order breaks ties
    logger.info("%s search over %d configs: best mean RMSE %.6g at %s", method, len(params), mean[best], params[best])
    return TuningResult(
        family=space.family,
        method=method,
        params=params,
        fold_rmse=fold_rmse,
        mean_rmse=mean,
        std_rmse=std,
        best_index=best,
        k=plan.k,
        seed=seed,
        fixed=dict(space.fixed),
        reference_index=_reference_index(params, space.fixed),
    )


def grid_search(space: SearchSpace, X, y, plan: FoldPlan, threads: int = 1) -> TuningResult:
    params = space.enumerate()
    return _result(space, "grid", params, _evaluate(space, params, X, y, plan, threads), plan, plan.seed)


def random_search(space: SearchSpace, X, y, plan: FoldPlan, seed: int = 42, budget: int | None = None, threads: int = 1) -> TuningResult:
    budget = space.budget if budget is None else budget
    if budget < 1:
        raise EmptySpace(f"random search budget must be >= 1, got {budget}")
    params = space.sample(np.random.default_rng(seed), budget)
    return _result(space, "random", params, _evaluate(space, params, X, y, plan, threads), plan, seed)
