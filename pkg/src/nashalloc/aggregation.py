"""Aggregation functions, per-bank decompositions, and capital lifts.

A single-element aggregator maps a vector of bank positions to per-bank
impact components that sum to the aggregate impact. Capital enters through
one of two lifts: the insensitive lift adds each bank's capital after
aggregation (component i is its base component plus m_i), while the
sensitive lift injects capital into the positions before aggregation
(component i is the base component evaluated at x + m).

The catalog covers four bases: sums of univariate utilities, mean-field
utilities with a shared externality term split equally across banks,
clearing-network society payments, and weighted-affine components. All of
them are increasing and concave with a rectangular domain, which is what
the Nash solvers rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import clearing
from .errors import (
    BracketFailure,
    DecompositionMismatch,
    EmptyDomain,
    OutOfDomain,
    ParseError,
)
from .network import FinancialNetwork
from .scenarios import ScenarioSet

DOMAIN_TOL = 1e-9
SUM_CHECK_TOL = 1e-10
# Strict-positivity margin used when constructing self-feasible levels.
FEASIBLE_MARGIN = 1e-3


# ---------------------------------------------------------------------------
# univariate utilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Affine:
    """u(t) = a*t + b, increasing for a >= 0.

    The default domain is the nonnegative half-line; domain="real" extends
    it to the whole line, which the identity-sum aggregation of the
    non-coherent counterexample needs.
    """

    a: float
    b: float = 0.0
    domain: str = "nonneg"

    def __post_init__(self):
        if self.a < 0.0:
            raise ValueError(f"affine utility slope must be nonnegative, got {self.a}")
        if self.domain not in ("nonneg", "real"):
            raise ValueError(f"unknown utility domain {self.domain!r}")

    @property
    def lower(self) -> float:
        return 0.0 if self.domain == "nonneg" else -np.inf

    def value(self, t):
        return self.a * np.asarray(t, dtype=float) + self.b

    def positive_level(self, margin):
        """Smallest in-domain t with u(t) >= margin, or None if unattainable."""
        if self.a > 0.0:
            t = (margin - self.b) / self.a
            return t if self.domain == "real" else max(0.0, t)
        return self.lower if self.b >= margin else None


@dataclass(frozen=True)
class ShiftedLog:
    """u(t) = weight * log(eps + t) on t >= 0."""

    eps: float
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"log shift must lie in (0, 1), got {self.eps}")
        if self.weight <= 0.0:
            raise ValueError(f"log utility weight must be positive, got {self.weight}")

    @property
    def lower(self) -> float:
        return 0.0

    def value(self, t):
        return self.weight * np.log(self.eps + np.asarray(t, dtype=float))

    def positive_level(self, margin):
        return max(0.0, float(np.exp(margin / self.weight) - self.eps))


def utility_from_json(doc) -> "Affine | ShiftedLog":
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError(f"utility spec must be an object with a 'kind': {doc!r}")
    kind = doc["kind"]
    try:
        if kind == "affine":
            return Affine(
                a=float(doc["a"]),
                b=float(doc.get("b", 0.0)),
                domain=doc.get("domain", "nonneg"),
            )
        if kind == "shifted_log":
            return ShiftedLog(eps=float(doc["eps"]), weight=float(doc.get("weight", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad utility spec {doc!r}: {exc}") from exc
    raise ParseError(f"unknown utility kind {kind!r}")


# ---------------------------------------------------------------------------
# single-element aggregators
# ---------------------------------------------------------------------------

class _AggregatorBase:
    """Shared domain handling; subclasses provide _components on clean input."""

    @property
    def domain_lower(self) -> np.ndarray:
        raise NotImplementedError

    def _components(self, x):
        raise NotImplementedError

    def components(self, x) -> np.ndarray:
        """Per-bank impact values at position vectors x with shape (..., N)."""
        x = np.asarray(x, dtype=float)
        lower = self.domain_lower
        bad = x < lower - DOMAIN_TOL
        if bad.any():
            raise OutOfDomain(
                f"position {np.argwhere(bad)[0].tolist()} lies below the domain"
            )
        finite = np.isfinite(lower)
        if finite.any():
            x = np.maximum(x, np.where(finite, lower, -np.inf))
        return self._components(x)

    def total(self, x) -> np.ndarray:
        return self.components(x).sum(axis=-1)

    def self_feasible_point(self) -> np.ndarray:
        """A position x_bar with component i strictly positive at (x_bar_i, lower_-i).

        By monotonicity the same holds against every in-domain configuration
        of the other banks, which is the upper anchor the Nash solvers need.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class UtilitySum(_AggregatorBase):
    """Component i is u_i(x_i); banks interact only through the risk measure."""

    utilities: tuple

    def __post_init__(self):
        object.__setattr__(self, "utilities", tuple(self.utilities))
        if not self.utilities:
            raise ValueError("need at least one utility")

    @property
    def n_banks(self) -> int:
        return len(self.utilities)

    @property
    def domain_lower(self) -> np.ndarray:
        return np.array([u.lower for u in self.utilities])

    def _components(self, x):
        out = np.empty_like(x)
        for i, u in enumerate(self.utilities):
            out[..., i] = u.value(x[..., i])
        return out

    def self_feasible_point(self):
        levels = []
        for i, u in enumerate(self.utilities):
            t = u.positive_level(FEASIBLE_MARGIN)
            if t is None:
                raise BracketFailure(f"utility {i} never reaches a positive value")
            levels.append(t)
        return np.array(levels)


@dataclass(frozen=True)
class MeanField(_AggregatorBase):
    """Component i is u_i(x_i) plus an equal 1/N share of ubar(mean(x)).

    The equal split of the externality term is the minimal-constant choice
    among symmetric decompositions; its self-preferential constant never
    exceeds 1 and equals 1 when the individual utilities are flat.
    """

    utilities: tuple
    ubar: object

    def __post_init__(self):
        object.__setattr__(self, "utilities", tuple(self.utilities))
        if not self.utilities:
            raise ValueError("need at least one utility")
        for u in (*self.utilities, self.ubar):
            if not np.isfinite(u.lower) or u.lower != 0.0:
                raise ValueError("mean-field utilities must have domain t >= 0")

    @property
    def n_banks(self) -> int:
        return len(self.utilities)

    @property
    def domain_lower(self) -> np.ndarray:
        return np.zeros(self.n_banks)

    def _components(self, x):
        n = self.n_banks
        shared = self.ubar.value(x.mean(axis=-1)) / n
        out = np.empty_like(x)
        for i, u in enumerate(self.utilities):
            out[..., i] = u.value(x[..., i]) + shared
        return out

    def total(self, x):
        x = np.asarray(x, dtype=float)
        own = sum(u.value(x[..., i]) for i, u in enumerate(self.utilities))
        return own + self.ubar.value(x.mean(axis=-1))

    def self_feasible_point(self):
        n = self.n_banks
        levels = np.empty(n)
        for i, u in enumerate(self.utilities):
            t = 1.0
            for _ in range(200):
                if u.value(t) + self.ubar.value(t / n) / n > FEASIBLE_MARGIN:
                    break
                t *= 2.0
            else:
                raise BracketFailure(f"component {i} never reaches a positive value")
            levels[i] = t
        return levels


@dataclass(frozen=True)
class EisenbergNoe(_AggregatorBase):
    """Component i is bank i's society payment surplus pi_i0 p_i(x) - gamma pbar_i0."""

    net: FinancialNetwork
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def n_banks(self) -> int:
        return self.net.n_banks

    @property
    def domain_lower(self) -> np.ndarray:
        return np.zeros(self.n_banks)

    def _components(self, x):
        flat = x.reshape(-1, self.n_banks)
        vals = clearing.society_components_batch(self.net, flat, self.gamma)
        return vals.reshape(x.shape)

    def total(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.maximum(x, 0.0).reshape(-1, self.n_banks)
        p = clearing.clearing_payments_batch(self.net, flat)
        agg = p @ self.net.pi_society - self.gamma * self.net.society_obligations.sum()
        return agg.reshape(x.shape[:-1])

    def self_feasible_point(self):
        # holding one's full obligations guarantees full payment, hence a
        # society surplus of (1 - gamma) * pbar_i0 > 0 whatever the others do
        return self.net.total_obligations.copy()


@dataclass(frozen=True)
class WeightedAffine(_AggregatorBase):
    """Component i is a_i . x - c_i on the nonnegative orthant.

    Requires nonnegative weights with strictly positive diagonal so each
    component responds to its own bank. This base expresses decompositions
    whose cross weights create non-unique Nash allocations.
    """

    a: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        c = np.array(self.c, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != c.shape[0]:
            raise ValueError("weights must be N x N with a length-N offset")
        if np.any(a < 0.0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diag(a) <= 0.0):
            raise ValueError("diagonal weights must be strictly positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        a.setflags(write=False)
        c.setflags(write=False)

    @property
    def n_banks(self) -> int:
        return self.c.shape[0]

    @property
    def domain_lower(self) -> np.ndarray:
        return np.zeros(self.n_banks)

    def _components(self, x):
        return x @ self.a.T - self.c

    def self_feasible_point(self):
        return np.maximum(0.0, (self.c + FEASIBLE_MARGIN) / np.diag(self.a))


def aggregator_from_json(doc, net: FinancialNetwork = None, n_banks: int = None):
    """Build an aggregator from its JSON spec; EN kinds need the network."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError("aggregator spec must be a JSON object with a 'kind'")
    kind = doc["kind"]
    try:
        if kind == "eisenberg_noe":
            if net is None:
                raise ParseError("eisenberg_noe aggregator needs a network file")
            return EisenbergNoe(net=net, gamma=float(doc.get("gamma", 0.95)))
        if kind == "utility_sum":
            return UtilitySum(tuple(utility_from_json(u) for u in doc["utilities"]))
        if kind == "identity_sum":
            n = int(doc.get("n", n_banks or 0))
            if n < 1:
                raise ParseError("identity_sum needs a bank count")
            return UtilitySum(tuple(Affine(1.0, 0.0, domain="real") for _ in range(n)))
        if kind == "mean_field":
            if "utilities" in doc:
                utilities = tuple(utility_from_json(u) for u in doc["utilities"])
                ubar = utility_from_json(doc["ubar"])
            else:
                n = int(doc.get("n", n_banks or 0))
                if n < 1:
                    raise ParseError("mean_field shorthand needs a bank count")
                eps = float(doc.get("eps", 0.1))
                weight = float(doc.get("weight", 1.0))
                utilities = tuple(ShiftedLog(eps) for _ in range(n))
                ubar = ShiftedLog(eps, weight)
            return MeanField(utilities=utilities, ubar=ubar)
        if kind == "weighted_affine":
            return WeightedAffine(a=np.array(doc["a"], dtype=float),
                                  c=np.array(doc["c"], dtype=float))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad aggregator spec: {exc}") from exc
    raise ParseError(f"unknown aggregator kind {kind!r}")


# ---------------------------------------------------------------------------
# capital lifts
# ---------------------------------------------------------------------------

LIFTS = ("sensitive", "insensitive")


@dataclass(frozen=True)
class AggregationSystem:
    """A single-element aggregator together with its capital lift."""

    base: _AggregatorBase
    lift: str = "sensitive"

    def __post_init__(self):
        if self.lift not in LIFTS:
            raise ValueError(f"lift must be one of {LIFTS}, got {self.lift!r}")

    @property
    def n_banks(self) -> int:
        return self.base.n_banks

    def eval_components(self, scen: ScenarioSet, m) -> np.ndarray:
        """All lifted components as an (N, S) matrix of scenario outcomes."""
        m = np.asarray(m, dtype=float).reshape(-1)
        if m.shape[0] != self.n_banks:
            raise ValueError(f"capital vector must have length {self.n_banks}")
        positions = scen.values.T
        if self.lift == "sensitive":
            return self.base.components(positions + m).T
        self._require_insensitive_domain(scen)
        return (self.base.components(positions) + m).T

    def eval_component(self, i: int, scen: ScenarioSet, m) -> np.ndarray:
        """The scenario outcomes of bank i's lifted component at capital m."""
        return self.eval_components(scen, m)[i]

    def eval_total(self, scen: ScenarioSet, m) -> np.ndarray:
        """The aggregate lifted impact per scenario, shape (S,)."""
        m = np.asarray(m, dtype=float).reshape(-1)
        positions = scen.values.T
        if self.lift == "sensitive":
            return self.base.total(positions + m)
        self._require_insensitive_domain(scen)
        return self.base.total(positions) + m.sum()

    def _require_insensitive_domain(self, scen: ScenarioSet):
        essinf = scen.values.min(axis=1)
        if np.any(essinf < self.base.domain_lower - DOMAIN_TOL):
            raise EmptyDomain(
                "a shock leaves the aggregation domain; no capital vector "
                "can repair an insensitive lift"
            )

    def domain_lower_bound(self, scen: ScenarioSet) -> np.ndarray:
        """Minimal admissible capital per bank; -inf marks unbounded coordinates."""
        essinf = scen.values.min(axis=1)
        if self.lift == "sensitive":
            return self.base.domain_lower - essinf
        self._require_insensitive_domain(scen)
        return np.full(self.n_banks, -np.inf)

    def self_feasible_upper(self, scen: ScenarioSet) -> np.ndarray:
        """Capital level above every best response, from the base's anchor point."""
        if self.lift == "insensitive":
            return np.zeros(self.n_banks)
        essinf = scen.values.min(axis=1)
        return self.base.self_feasible_point() - essinf


# ---------------------------------------------------------------------------
# decomposition diagnostics
# ---------------------------------------------------------------------------

@dataclass
class DecompositionReport:
    n_probes: int
    max_sum_gap: float
    monotone_ok: bool
    estimated_L: float
    samples: int = 0


def _component_at(sys: AggregationSystem, point, m) -> np.ndarray:
    scen = ScenarioSet.deterministic(point)
    return sys.eval_components(scen, m)[:, 0]


def check_decomposition(
    sys: AggregationSystem,
    probe_points,
    deltas=(0.25, 1.0, 4.0),
    l_cap=64.0,
    tol=SUM_CHECK_TOL,
) -> DecompositionReport:
    """Verify the decomposition identity and sample the self-preferential constant.

    probe_points are base-domain positions. At each probe the component sum
    is compared against the aggregate (DecompositionMismatch on failure),
    monotonicity is checked along coordinate rays, and for every ordered
    bank pair the smallest factor L with
    component_i(probe + L*d*e_i) >= component_i(probe + d*e_j) is found by
    bisection; the report carries the largest such factor seen.
    """
    probes = np.atleast_2d(np.asarray(probe_points, dtype=float))
    n = sys.n_banks
    zeros = np.zeros(n)
    max_gap = 0.0
    monotone_ok = True
    worst_l = 0.0
    samples = 0

    for point in probes:
        scen = ScenarioSet.deterministic(point)
        comps = sys.eval_components(scen, zeros)[:, 0]
        total = float(sys.eval_total(scen, zeros)[0])
        gap = abs(comps.sum() - total)
        scale = max(1.0, abs(total))
        if gap > tol * scale:
            raise DecompositionMismatch(point.tolist(), gap)
        max_gap = max(max_gap, gap)

        for j in range(n):
            steps = [_component_at(sys, point, t * np.eye(n)[j]) for t in (0.0, 0.5, 1.0)]
            for lo, hi in zip(steps, steps[1:]):
                if np.any(hi < lo - 1e-12):
                    monotone_ok = False

        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                for delta in deltas:
                    target = _component_at(sys, point, delta * np.eye(n)[j])[i]
                    own = lambda L: _component_at(sys, point, L * delta * np.eye(n)[i])[i]
                    samples += 1
                    if own(0.0) >= target - 1e-14:
                        continue
                    hi = 1.0
                    while own(hi) < target and hi < l_cap:
                        hi *= 2.0
                    lo = 0.0
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        if own(mid) >= target:
                            hi = mid
                        else:
                            lo = mid
                    worst_l = max(worst_l, hi)

    return DecompositionReport(
        n_probes=probes.shape[0],
        max_sum_gap=max_gap,
        monotone_ok=monotone_ok,
        estimated_L=worst_l,
        samples=samples,
    )
