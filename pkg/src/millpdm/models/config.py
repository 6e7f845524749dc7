from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import InvalidConfig

FAMILIES = (
    "linear",
    "cart",
    "knn",
    "svr",
    "adaboost_r2",
    "random_forest",
    "gradient_boosting",
    "regularized_boosting",
)

TREE_FAMILIES = ("cart", "random_forest", "gradient_boosting", "regularized_boosting")
ENSEMBLE_FAMILIES = ("adaboost_r2", "random_forest", "gradient_boosting", "regularized_boosting")

DISPLAY_NAMES = {
    "linear": "Linear Regression",
    "cart": "Decision Tree",
    "knn": "KNN",
    "svr": "SVR",
    "adaboost_r2": "AdaBoost",
    "random_forest": "Random Forest",
    "gradient_boosting": "Gradient Boosting",
    "regularized_boosting": "XGBoost",
}

FAMILY_DEFAULTS = {
    "linear": {},
    "cart": {"max_depth": None},
    "knn": {"k": 5},
    "svr": {"C": 1.0, "epsilon": 0.1, "kernel_gamma": None},
    "adaboost_r2": {"n_estimators": 50, "max_depth": None, "learning_rate": 1.0},
    "random_forest": {"n_estimators": 100, "max_depth": None, "bootstrap": True},
    "gradient_boosting": {"n_estimators": 100, "max_depth": 3, "learning_rate": 0.1},
    "regularized_boosting": {
        "n_estimators": 150,
        "max_depth": 6,
        "learning_rate": 0.1,
        "subsample": 0.8,
        "colsample_bytree": 0.7,
        "reg_lambda": 1.0,
        "split_gamma": 0.0,
        "min_child_weight": 1.0,
    },
}


@dataclass(frozen=True)
class ModelConfig:
    """Learner family plus every hyperparameter any family reads.

    Fields a family does not use are carried along unchanged. Build with
    :meth:`create` to start from the family's defaults.
    """

    family: str
    n_estimators: int = 100
    max_depth: int | None = None
    learning_rate: float = 0.1
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    min_samples_leaf: int = 1
    max_features: int | None = None  # random forest; None -> max(1, p // 3)
    bootstrap: bool = True
    k: int = 5
    C: float = 1.0
    epsilon: float = 0.1
    kernel_gamma: float | None = None  # None -> 1 / n_features
    tol: float = 1e-3
    max_iter: int = 200_000
    reg_lambda: float = 0.0
    split_gamma: float = 0.0
    min_child_weight: float = 0.0
    seed: int = 42

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidConfig(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidConfig(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if not 0.0 < self.subsample <= 1.0:
            raise InvalidConfig(f"subsample must lie in (0, 1], got {self.subsample}")
        if not 0.0 < self.colsample_bytree <= 1.0:
            raise InvalidConfig(f"colsample_bytree must lie in (0, 1], got {self.colsample_bytree}")
        if self.n_estimators < 1:
            raise InvalidConfig(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidConfig(f"max_depth must be >= 0 or None, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise InvalidConfig(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.C <= 0 or self.epsilon < 0:
            raise InvalidConfig("SVR needs C > 0 and epsilon >= 0")
        if self.kernel_gamma is not None and self.kernel_gamma <= 0:
            raise InvalidConfig(f"kernel_gamma must be > 0, got {self.kernel_gamma}")
        if self.reg_lambda < 0 or self.split_gamma < 0 or self.min_child_weight < 0:
            raise InvalidConfig("reg_lambda, split_gamma and min_child_weight must be >= 0")

    @classmethod
    def create(cls, family: str, **overrides) -> "ModelConfig":
        if family not in FAMILY_DEFAULTS:
            raise InvalidConfig(f"unknown model family {family!r}; expected one of {FAMILIES}")
        unknown = set(overrides) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidConfig(f"unknown hyperparameter(s) {sorted(unknown)}")
        return cls(family=family, **{**FAMILY_DEFAULTS[family], **overrides})

    def with_params(self, **params) -> "ModelConfig":
        unknown = set(params) - {f.name for f in fields(self)}
        if unknown:
            raise InvalidConfig(f"unknown hyperparameter(s) {sorted(unknown)}")
        return replace(self, **params)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.family]
