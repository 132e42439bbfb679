"""Permutation test outcome container."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def perm_pvalue(statistic: float, null_statistics: np.ndarray) -> float:
    """Finite-sample-valid permutation p-value with add-one correction."""
    nulls = np.asarray(null_statistics, dtype=float)
    return float((1.0 + np.count_nonzero(nulls >= statistic)) / (nulls.size + 1.0))


@dataclass
class TestResult:
    """Statistic, permutation null, p-value and decision of one test."""

    statistic: float
    null_statistics: np.ndarray
    p_value: float
    alpha: float
    reject: bool
    seed: int
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_null(
        cls,
        statistic: float,
        null_statistics: np.ndarray,
        alpha: float,
        seed: int,
        meta: dict | None = None,
    ) -> "TestResult":
        p = perm_pvalue(statistic, null_statistics)
        return cls(
            statistic=float(statistic),
            null_statistics=np.asarray(null_statistics, dtype=float),
            p_value=p,
            alpha=alpha,
            reject=p < alpha,
            seed=seed,
            meta=dict(meta or {}),
        )

    def to_json(self) -> dict:
        out = {
            "test": self.meta.get("test"),
            "variables": self.meta.get("variables"),
            "n": self.meta.get("n"),
            "P": int(self.null_statistics.size),
            "alpha": self.alpha,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject": bool(self.reject),
            "seed": self.seed,
            "sigma2": self.meta.get("sigma2"),
        }
        for key, value in self.meta.items():
            if key not in out:
                out[key] = value
        return out
