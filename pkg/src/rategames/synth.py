"""Deterministic synthetic dataset generators.

The two benchmark-style generators reproduce the shape and group structure
of the public recidivism and census-income fairness benchmarks (instance
counts, feature counts, group imbalance, base-rate disparity) so the
experiment pipeline can run end to end in environments where the real files
cannot be fetched.  Real CSVs with the documented schema are drop-in
replacements.

Every generator is a pure function of its seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .data import ColumnSchema, Dataset


def _latent_risk_features(rng, risk, n_noise, noise_binary_frac=0.5):
    """Noisy views of a latent risk score plus uninformative padding."""
    cols = {}
    cols["age"] = np.round(36.0 - 6.0 * risk + rng.normal(0, 7.0, risk.size), 1)
    cols["priors_count"] = rng.poisson(np.exp(0.7 + 0.55 * risk))
    cols["juv_count"] = rng.poisson(np.exp(-1.2 + 0.5 * risk))
    cols["charge_degree"] = (rng.random(risk.size)
                             < 1.0 / (1.0 + np.exp(-0.8 * risk))).astype(int)
    n_bin = int(n_noise * noise_binary_frac)
    for j in range(n_noise - n_bin):
        cols[f"score_{j}"] = np.round(0.35 * risk + rng.normal(0, 1.0, risk.size), 4)
    for j in range(n_bin):
        q = rng.uniform(0.05, 0.4)
        cols[f"flag_{j}"] = (rng.random(risk.size) < q).astype(int)
    return cols


def make_recidivism_style(n: int = 4073, seed: int = 7) -> pd.DataFrame:
    """Two-group binary task shaped like the recidivism benchmark.

    30 feature columns plus a binary group column (the loader appends the
    group as a feature, giving 31 model inputs); positive proportion around
    0.46 with the minority group at a lower base rate.
    """
    rng = np.random.default_rng(seed)
    group = (rng.random(n) < 0.81).astype(int)  # 1 = majority
    risk = rng.normal(0.0, 1.0, n) + 0.2 * (2 * group - 1)
    z = 1.3 * risk + 0.12 * (2 * group - 1) - 0.22
    label = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(int)
    cols = _latent_risk_features(rng, risk, n_noise=26)
    frame = pd.DataFrame(cols)
    frame["sex"] = group
    frame["two_year_recid"] = label
    return frame


def make_income_style(n: int = 32561, seed: int = 11) -> pd.DataFrame:
    """Two-group binary task shaped like the census-income benchmark.

    121 feature columns plus the binary group column (122 model inputs with
    the group appended); positive proportion near 0.24, strongly skewed
    across groups.
    """
    rng = np.random.default_rng(seed)
    group = (rng.random(n) < 0.67).astype(int)  # 1 = majority
    skill = rng.normal(0.0, 1.0, n) + 0.2 * (2 * group - 1)
    cols = {}
    cols["age"] = np.round(38.0 + 7.0 * skill + rng.normal(0, 9.0, n), 0)
    cols["education_num"] = np.clip(np.round(10.0 + 2.1 * skill
                                             + rng.normal(0, 1.6, n)), 1, 16)
    cols["hours_per_week"] = np.clip(np.round(40.0 + 5.5 * skill
                                              + rng.normal(0, 9.0, n)), 5, 99)
    spike = rng.random(n) < 1.0 / (1.0 + np.exp(-(skill - 2.0)))
    cols["capital_gain"] = np.where(spike, rng.lognormal(8.5, 1.0, n), 0.0).round(0)
    cols["capital_loss"] = np.where(rng.random(n) < 0.045,
                                    rng.lognormal(7.4, 0.4, n), 0.0).round(0)
    for j in range(116):
        tilt = rng.uniform(-0.45, 0.45)
        base = rng.uniform(-3.3, -0.8)
        q = 1.0 / (1.0 + np.exp(-(base + tilt * skill)))
        cols[f"cat_{j}"] = (rng.random(n) < q).astype(int)
    z = 1.5 * skill + 0.5 * (2 * group - 1) - 1.35
    label = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(int)
    frame = pd.DataFrame(cols)
    frame["sex"] = group
    frame["income_high"] = label
    return frame


def make_two_gaussians(n: int = 1200, seed: int = 0, *, separation: float = 1.6,
                       group_fraction: float = 0.3, group_shift: float = 0.8,
                       name: str = "gaussians") -> Dataset:
    """Small 2-d task for optimizer checks: class-conditional Gaussians with
    a group whose scores are shifted, creating a coverage disparity."""
    rng = np.random.default_rng(seed)
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    X = rng.normal(0.0, 1.0, (n, 2))
    X[:, 0] += 0.5 * separation * labels
    X[:, 1] += 0.25 * separation * labels
    group = (rng.random(n) < group_fraction).astype(int)
    X[:, 0] -= group_shift * (group == 1) * 0.8
    return Dataset(X, labels, group, name=name)


RECIDIVISM_SCHEMA = ColumnSchema(label="two_year_recid", group="sex",
                                 positive_label=1)
INCOME_SCHEMA = ColumnSchema(label="income_high", group="sex", positive_label=1)

BENCHMARK_FILES = {
    "recidivism": ("compas_synthetic.csv", make_recidivism_style, RECIDIVISM_SCHEMA),
    "income": ("adult_synthetic.csv", make_income_style, INCOME_SCHEMA),
}


def ensure_benchmark_csv(kind: str, data_dir) -> Path:
    """Write the synthetic replica CSV if it is not already present."""
    filename, maker, _schema = BENCHMARK_FILES[kind]
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    path = data_dir / filename
    if not path.exists():
        maker().to_csv(path, index=False)
    return path
