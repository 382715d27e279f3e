"""Synthetic stand-ins for the salary and recidivism-score datasets.

Both generators inject known group biases so that the effect of the
constraints is visible. Protected columns are tree features by default;
pass ``protected_role="group-only"`` to keep them out of the splits.
"""

from __future__ import annotations

import numpy as np

from .data_io import Column, Dataset, Schema

SALARY_GROUPS = ("female_nonvet", "male_nonvet", "female_vet", "male_vet", "male", "female", "vet", "nonvet")
COMPAS_GROUPS = ("african_american", "hispanic", "other")


def salary_dataset(n_rows: int = 20_000, seed: int = 0, protected_role: str = "feature") -> Dataset:
    """State-employee salaries with gender and veteran-status pay gaps.

    Men earn about $5k more than comparable women and female veterans a
    further ~$4.5k less, roughly mimicking the ordering of real state-payroll
    group means. Department choice is correlated with gender so that the
    bias also leaks through a proxy feature.
    """
    rng = np.random.default_rng(seed)
    male = rng.random(n_rows) < 0.55
    vet = rng.random(n_rows) < np.where(male, 0.14, 0.06)
    dept_probs = np.where(male[:, None], [0.25, 0.2, 0.1, 0.1, 0.15, 0.2], [0.1, 0.1, 0.25, 0.25, 0.15, 0.15])
    dept = (rng.random(n_rows)[:, None] > np.cumsum(dept_probs, axis=1)).sum(axis=1)
    years = np.clip(rng.gamma(2.0, 5.0, n_rows), 0, 40).round(1)
    education = rng.choice(4, n_rows, p=[0.3, 0.4, 0.2, 0.1])
    dept_effect = np.array([6000.0, 4000.0, -3000.0, -2000.0, 0.0, 1500.0])[dept]
    salary = (
        36000.0
        + 650.0 * years
        + 3500.0 * education
        + dept_effect
        + np.where(male, 5000.0, 0.0)
        + np.where(vet & ~male, -4500.0, 0.0)
        + np.where(vet & male, -1500.0, 0.0)
        + rng.normal(0.0, 6000.0, n_rows)
    ).round(0)
    schema = Schema((
        Column("years_service", "numeric", "feature"),
        Column("education", "numeric", "feature"),
        Column("department", "categorical", "feature"),
        Column("gender", "categorical", protected_role),
        Column("veteran", "categorical", protected_role),
        Column("salary", "numeric", "target"),
    ))
    return Dataset.from_columns(schema, {
        "years_service": years,
        "education": education,
        "department": [f"D{d}" for d in dept],
        "gender": np.where(male, "M", "F"),
        "veteran": np.where(vet, "yes", "no"),
        "salary": salary,
    })


def salary_constraints() -> dict:
    """Four gender x veteran intersections plus both marginals.

    Intersections are equalised against female non-veterans; the two
    marginal pairs are added explicitly. The marginal columns are linear
    combinations of the intersection columns, so the constraint matrix is
    rank deficient by construction.
    """
    def g(name, **cols):
        return {"name": name, "all": [{"col": c, "op": "equals", "value": v} for c, v in cols.items()]}

    return {
        "groups": [
            g("female_nonvet", gender="F", veteran="no"),
            g("male_nonvet", gender="M", veteran="no"),
            g("female_vet", gender="F", veteran="yes"),
            g("male_vet", gender="M", veteran="yes"),
            g("male", gender="M"),
            g("female", gender="F"),
            g("vet", veteran="yes"),
            g("nonvet", veteran="no"),
        ],
        "equalize": [["female_nonvet", "male_nonvet", "female_vet", "male_vet"]],
        "constraints": [{"a": "male", "b": "female"}, {"a": "vet", "b": "nonvet"}],
    }


def compas_dataset(n_rows: int = 6_000, seed: int = 0, protected_role: str = "feature") -> Dataset:
    """Recidivism decile scores (1-10) with race-dependent offsets.

    African-American and Hispanic defendants receive scores about 2.4 and
    1.2 deciles above otherwise similar defendants, partly through a higher
    simulated prior count.
    """
    rng = np.random.default_rng(seed)
    race = rng.choice(3, n_rows, p=[0.5, 0.15, 0.35])
    age = np.clip(rng.normal(34, 11, n_rows), 18, 75).round()
    priors = rng.poisson(np.array([3.5, 2.5, 2.0])[race])
    felony = rng.random(n_rows) < 0.65
    sex_male = rng.random(n_rows) < 0.8
    latent = (
        3.2
        + 0.3 * priors
        - 0.06 * (age - 34)
        + 0.6 * felony
        + 0.3 * sex_male
        + np.array([1.9, 0.9, 0.0])[race]
        + rng.normal(0.0, 1.5, n_rows)
    )
    decile = np.clip(np.round(latent), 1, 10)
    schema = Schema((
        Column("age", "numeric", "feature"),
        Column("priors_count", "numeric", "feature"),
        Column("charge_degree", "categorical", "feature"),
        Column("sex", "categorical", "feature"),
        Column("race", "categorical", protected_role),
        Column("decile_score", "numeric", "target"),
    ))
    labels = np.array(["African-American", "Hispanic", "Other"])
    return Dataset.from_columns(schema, {
        "age": age,
        "priors_count": priors.astype(float),
        "charge_degree": np.where(felony, "F", "M"),
        "sex": np.where(sex_male, "Male", "Female"),
        "race": labels[race],
        "decile_score": decile,
    })


def compas_constraints() -> dict:
    return {
        "groups": [
            {"name": "african_american", "all": [{"col": "race", "op": "equals", "value": "African-American"}]},
            {"name": "hispanic", "all": [{"col": "race", "op": "equals", "value": "Hispanic"}]},
            {"name": "other", "all": [{"col": "race", "op": "equals", "value": "Other"}]},
        ],
        "equalize": [list(COMPAS_GROUPS)],
    }
