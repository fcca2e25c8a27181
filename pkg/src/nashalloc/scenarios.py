"""Finite stress-scenario sets and dependence constructions.

A scenario set is a discrete joint law for the asset shocks of N banks:
an (N, S) value matrix together with S strictly positive probabilities
summing to one. Everything downstream (risk evaluation, Nash solvers,
LP encodings) consumes this representation, so the module also provides
the two constructions used in the case studies: the comonotonic
rearrangement of a joint law and Gaussian-copula sampling with uniform
marginals scaled per bank.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import NotPositiveDefinite, ParseError

PROB_TOL = 1e-12
# Cumulative-probability breakpoints closer than this are merged when
# building the comonotonic grid.
GRID_MERGE_TOL = 1e-13


@dataclass(frozen=True)
class ScenarioSet:
    """Discrete joint distribution of bank shocks.

    values : (N, S) array, entry (i, w) is bank i's shock in scenario w.
    probs : (S,) strictly positive weights summing to one.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if values.ndim != 2 or probs.ndim != 1:
            raise ValueError("values must be (N, S) and probs (S,)")
        if values.shape[1] != probs.shape[0] or probs.shape[0] < 1:
            raise ValueError("probability vector must match the scenario count")
        if not np.all(np.isfinite(values)):
            raise ValueError("scenario values must be finite")
        if np.any(probs <= 0.0):
            raise ValueError("scenario probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, expected 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        values.setflags(write=False)
        probs.setflags(write=False)

    @property
    def n_banks(self) -> int:
        return self.values.shape[0]

    @property
    def n_scenarios(self) -> int:
        return self.values.shape[1]

    @classmethod
    def deterministic(cls, x) -> "ScenarioSet":
        """Single-scenario set with the given shock vector."""
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(values=x[:, None].copy(), probs=np.ones(1))


def ess_bounds(scen: ScenarioSet):
    """Componentwise essential bounds (all scenarios carry positive mass)."""
    return scen.values.min(axis=1), scen.values.max(axis=1)


def comonotonic_copula(scen: ScenarioSet) -> ScenarioSet:
    """Comonotone rearrangement preserving every marginal law.

    The scenarios of the result live on the merged grid of the cumulative
    probability breakpoints of all marginals; each marginal quantile is
    evaluated at the interior of every grid cell, which reproduces the
    marginal distributions exactly and makes the coordinates comonotone.
    For equal scenario probabilities this reduces to sorting each bank's
    values.
    """
    n = scen.n_banks
    total = float(scen.probs.sum())
    marginals = []
    for i in range(n):
        order = np.argsort(scen.values[i], kind="stable")
        vals = scen.values[i, order]
        probs = scen.probs[order]
        # collapse repeated values into single atoms of the marginal law
        fresh = np.empty(vals.shape, dtype=bool)
        fresh[0] = True
        fresh[1:] = np.diff(vals) != 0.0
        atoms = vals[fresh]
        cum = np.cumsum(probs)[np.append(np.flatnonzero(fresh)[1:] - 1, vals.size - 1)]
        cum[-1] = total
        marginals.append((atoms, cum))

    levels = np.sort(np.unique(np.concatenate([cum for _, cum in marginals])))
    keep = np.empty(levels.shape, dtype=bool)
    keep[-1] = True
    keep[:-1] = np.diff(levels) > GRID_MERGE_TOL
    levels = levels[keep]
    cells = np.diff(levels, prepend=0.0)
    mid = levels - 0.5 * cells

    values = np.empty((n, levels.shape[0]))
    for i, (atoms, cum) in enumerate(marginals):
        pos = np.searchsorted(cum, mid, side="left")
        values[i] = atoms[np.minimum(pos, atoms.size - 1)]
    return ScenarioSet(values=values, probs=cells / cells.sum())


def gaussian_copula_sample(corr, scales, n, seed) -> ScenarioSet:
    """Equal-probability sample X_i = scales_i * Phi(G_i), G ~ N(0, corr).

    Sampling uses numpy's seeded PCG64 generator with its standard normal
    variates (ziggurat method) and a Cholesky factor of the correlation
    matrix, so the output is reproducible bit for bit given the seed.
    """
    corr = np.asarray(corr, dtype=float)
    scales = np.asarray(scales, dtype=float).reshape(-1)
    if n < 1:
        raise ValueError(f"sample count must be at least 1, got {n}")
    dim = scales.shape[0]
    if corr.shape != (dim, dim):
        raise NotPositiveDefinite(
            f"correlation matrix must be {dim} x {dim}, got {corr.shape}"
        )
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise NotPositiveDefinite("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise NotPositiveDefinite("correlation matrix must have unit diagonal")
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if np.any(scales < 0.0):
        raise ValueError("scales must be nonnegative")

    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((n, dim)) @ chol.T
    uniforms = ndtr(gauss)
    return ScenarioSet(
        values=scales[:, None] * uniforms.T, probs=np.full(n, 1.0 / n)
    )


def load_scenarios(path) -> ScenarioSet:
    """Read a scenario CSV with header prob,bank_1,...,bank_N."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {path}: {exc}") from exc
    if not rows:
        raise ParseError("scenario file is empty")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "prob" or len(header) < 2:
        raise ParseError("scenario header must be prob,bank_1,...,bank_N")
    n = len(header) - 1
    probs, cols = [], []
    for k, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n + 1:
            raise ParseError(f"line {k}: expected {n + 1} fields, got {len(row)}")
        try:
            probs.append(float(row[0]))
            cols.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ParseError(f"line {k}: {exc}") from exc
    if not probs:
        raise ParseError("scenario file has no data rows")
    try:
        return ScenarioSet(values=np.array(cols).T, probs=np.array(probs))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def save_scenarios(scen: ScenarioSet, path) -> None:
    """Write the scenario CSV schema; float repr keeps round-trips exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prob"] + [f"bank_{i + 1}" for i in range(scen.n_banks)])
        for w in range(scen.n_scenarios):
            writer.writerow(
                [repr(float(scen.probs[w]))]
                + [repr(float(v)) for v in scen.values[:, w]]
            )
