"""Nash capital-allocation solvers.

A Nash allocation is a capital vector where every bank holds exactly the
smallest amount that keeps its own impact component acceptable given the
other banks' capital, i.e. a fixed point of the best-response map

    phi_i(m) = inf { r : rho(component_i(X, (r, m_-i))) <= 0 }.

Each phi_i is found by bracketing and bisection on a monotone scalar map;
the fixed point by damped Jacobi iteration started from the self-feasible
upper anchor, which brackets every best response from above. Insensitive
lifts admit a closed form, and deterministic shocks under the clearing
aggregation admit an exact finite algorithm; both are implemented
separately and double as cross-checks for the generic solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import clearing, risk
from .aggregation import AggregationSystem, EisenbergNoe, _AggregatorBase
from .errors import (
    BracketFailure,
    MaxIterations,
    NegativeAssets,
    NonCoherentRiskMeasure,
    NonConvergence,
)
from .network import FinancialNetwork
from .risk import RiskMeasureSpec
from .scenarios import ScenarioSet

BRACKET_EXPANSIONS = 60
OSCILLATION_WINDOW = 10
MIN_DAMPING = 1.0 / 4096.0


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps for the fixed-point solver."""

    outer_tol: float = 1e-8
    inner_tol: float = 1e-10
    max_outer: int = 10000
    damping: float = 1.0

    def __post_init__(self):
        if min(self.outer_tol, self.inner_tol, self.damping) <= 0.0 or self.max_outer < 1:
            raise ValueError("solver tolerances, caps, and damping must be positive")
        if self.damping > 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass
class AllocationReport:
    """Solved allocation with its certificate quantities.

    residuals are the per-bank best-response gaps |m_i - phi_i(m)|;
    rho_values the per-bank component risks at m; system_rho the risk of
    the aggregate impact.
    """

    m: np.ndarray
    rho_values: np.ndarray
    residuals: np.ndarray
    system_acceptable: bool
    total: float
    iterations: int
    system_rho: float = float("nan")
    method: str = ""

    @property
    def per_bank_acceptable(self) -> np.ndarray:
        return self.rho_values <= risk.ACCEPTABILITY_TOL


def _require_coherent(spec: RiskMeasureSpec):
    if not spec.coherent:
        raise NonCoherentRiskMeasure(
            f"{spec.label()} is not coherent; per-bank acceptability would not "
            "imply system acceptability"
        )


def _component_risks(sys, scen, spec, m) -> np.ndarray:
    y = sys.eval_components(scen, m)
    return np.atleast_1d(risk.rho(spec, y, scen.probs))


def _response_risks(sys, scen, spec, m, r_vec, active) -> np.ndarray:
    """rho of bank i's component at capital (r_vec_i, m_-i), for active banks.

    All active banks are evaluated in one batched aggregator call: the
    positions for bank i's probe differ from the shared ones only in
    coordinate i.
    """
    n = sys.n_banks
    s = scen.n_scenarios
    idx = np.flatnonzero(active)
    base_positions = scen.values.T + m
    stacked = np.broadcast_to(base_positions, (idx.size, s, n)).copy()
    for row, i in enumerate(idx):
        stacked[row, :, i] = scen.values[i] + r_vec[i]
    comps = sys.base.components(stacked.reshape(idx.size * s, n)).reshape(idx.size, s, n)
    y = comps[np.arange(idx.size), :, idx]
    out = np.full(n, np.nan)
    out[idx] = np.atleast_1d(risk.rho(spec, y, scen.probs))
    return out


def best_response_all(m, scen, sys: AggregationSystem, spec, cfg: SolverConfig,
                      hint=None, hint_width=None) -> np.ndarray:
    """The full best-response vector phi(m), one bisection per bank in lockstep.

    A hint (with its trust width) narrows the initial brackets around a
    previous response vector; the brackets are re-verified and expanded as
    needed, so hints only affect speed.
    """
    _require_coherent(spec)
    m = np.asarray(m, dtype=float).reshape(-1)
    n = sys.n_banks
    if sys.lift == "insensitive":
        # component i is base_i(X) + r, so the response is its risk, independent of m
        sys.domain_lower_bound(scen)
        y = sys.base.components(scen.values.T).T
        return np.atleast_1d(risk.rho(spec, y, scen.probs))

    lower = sys.domain_lower_bound(scen)
    upper = sys.self_feasible_upper(scen).astype(float)
    finite = np.isfinite(lower)
    phi = np.full(n, np.nan)

    # initial brackets: [lo, hi] with lo still unverified (need g(lo) > 0)
    # and hi unverified (need g(hi) <= 0)
    if hint is None:
        lo = np.where(finite, lower, np.maximum(upper, 0.0) - 1.0)
        hi = np.maximum(upper, np.where(finite, lower, -np.inf))
        down_step = np.maximum(1.0, np.abs(lo))
    else:
        hint = np.asarray(hint, dtype=float)
        trust = np.broadcast_to(
            np.maximum(np.asarray(hint_width, dtype=float), 1024.0 * cfg.inner_tol), (n,)
        )
        lo = np.where(finite, np.maximum(lower, hint - trust), hint - trust)
        hi = hint + trust
        down_step = 2.0 * trust.copy()
    hi = np.maximum(hi, lo)
    verified_hi = np.zeros(n, dtype=bool)

    # walk the lower end down until unacceptable (or pinned at the floor)
    need_down = np.ones(n, dtype=bool)
    for _ in range(BRACKET_EXPANSIONS):
        g = _response_risks(sys, scen, spec, m, lo, need_down)
        bad = need_down & (g > 0.0)
        ok = need_down & ~bad
        need_down = ok.copy()
        at_floor = ok & finite & (lo <= lower)
        phi[at_floor] = lower[at_floor]
        need_down &= ~at_floor
        if not need_down.any():
            break
        # acceptable levels are upper witnesses; push the bracket down
        shrink = need_down & (lo < hi)
        hi[shrink] = lo[shrink]
        verified_hi[need_down] = True
        nxt = lo[need_down] - down_step[need_down]
        lo[need_down] = np.where(
            finite[need_down], np.maximum(lower[need_down], nxt), nxt
        )
        down_step[need_down] *= 2.0
    else:
        raise BracketFailure("no unacceptable level found walking down the domain")

    active = np.isnan(phi)

    # make sure the upper end is acceptable, expanding away from lo
    need_up = active & ~verified_hi
    width = np.maximum(hi - lo, 1024.0 * cfg.inner_tol)
    for _ in range(BRACKET_EXPANSIONS):
        if not need_up.any():
            break
        g = _response_risks(sys, scen, spec, m, hi, need_up)
        ok = need_up & (g <= 0.0)
        need_up &= ~ok
        if not need_up.any():
            break
        width[need_up] *= 2.0
        hi = np.where(need_up, lo + width, hi)
    else:
        raise BracketFailure(
            "self-feasible upper level is not acceptable even after expansion"
        )

    # bisection, synchronized across banks
    while True:
        gap = np.where(active, hi - lo, 0.0)
        if gap.max() <= cfg.inner_tol:
            break
        mid = 0.5 * (lo + hi)
        g = _response_risks(sys, scen, spec, m, mid, active)
        take_hi = active & (g <= 0.0)
        take_lo = active & ~take_hi
        hi[take_hi] = mid[take_hi]
        lo[take_lo] = mid[take_lo]
        active &= gap > cfg.inner_tol

    fill = np.isnan(phi)
    phi[fill] = hi[fill]
    return phi


def best_response(i, m, scen, sys: AggregationSystem, spec, cfg: SolverConfig = None) -> float:
    """Smallest acceptable capital for bank i when the others hold m_-i."""
    cfg = cfg or SolverConfig()
    phi = best_response_all(m, scen, sys, spec, cfg)
    return float(phi[int(i)])


def _build_report(sys, scen, spec, m, residuals, iterations, method, cfg) -> AllocationReport:
    rho_values = _component_risks(sys, scen, spec, m)
    system_rho = float(risk.rho(spec, sys.eval_total(scen, m), scen.probs))
    tol = 10.0 * cfg.outer_tol
    return AllocationReport(
        m=np.asarray(m, dtype=float),
        rho_values=rho_values,
        residuals=np.asarray(residuals, dtype=float),
        system_acceptable=bool(system_rho <= tol),
        total=float(np.sum(m)),
        iterations=iterations,
        system_rho=system_rho,
        method=method,
    )


def nash_fixed_point(
    scen: ScenarioSet,
    sys: AggregationSystem,
    spec: RiskMeasureSpec,
    cfg: SolverConfig = None,
    m0=None,
) -> AllocationReport:
    """Damped Jacobi iteration on the best-response map.

    Starts from the self-feasible upper anchor (or m0) and stops when the
    undamped residual sup_i |phi_i(m) - m_i| falls below outer_tol. The
    damping factor is halved whenever the residual fails to decrease over a
    trailing window, which handles decompositions outside the contraction
    regime; if the cap is hit, MaxIterations carries the best iterate seen.
    """
    cfg = cfg or SolverConfig()
    _require_coherent(spec)
    lower = sys.domain_lower_bound(scen)
    if m0 is None:
        m = sys.self_feasible_upper(scen).astype(float)
    else:
        m = np.maximum(np.asarray(m0, dtype=float).reshape(-1), lower)

    damping = cfg.damping
    window = []
    best_m, best_resid = None, np.inf
    hint, hint_width = None, None
    for it in range(1, cfg.max_outer + 1):
        phi = best_response_all(m, scen, sys, spec, cfg, hint=hint,
                                hint_width=hint_width)
        resid = float(np.max(np.abs(phi - m)))
        if resid < best_resid:
            best_resid, best_m = resid, m.copy()
        if resid <= cfg.outer_tol:
            return _build_report(
                sys, scen, spec, m, np.abs(phi - m), it, "fixed-point", cfg
            )
        window.append(resid)
        if len(window) > OSCILLATION_WINDOW:
            window.pop(0)
            if all(b >= a for a, b in zip(window, window[1:])):
                damping = max(damping / 2.0, MIN_DAMPING)
                window.clear()
        m = (1.0 - damping) * m + damping * phi
        # responses move at most about as far as the iterate did
        hint, hint_width = phi, 4.0 * damping * resid + 1e6 * cfg.inner_tol

    phi = best_response_all(best_m, scen, sys, spec, cfg)
    report = _build_report(
        sys, scen, spec, best_m, np.abs(phi - best_m), cfg.max_outer, "fixed-point", cfg
    )
    raise MaxIterations(
        f"no fixed point within {cfg.max_outer} iterations "
        f"(best residual {best_resid:.3e})",
        report=report,
    )


def nash_insensitive(
    scen: ScenarioSet, base: _AggregatorBase, spec: RiskMeasureSpec, cfg: SolverConfig = None
) -> AllocationReport:
    """Closed-form allocation for the insensitive lift: r_i = rho(base_i(X)).

    Exact because adding capital m_i shifts component i by m_i, so the
    smallest acceptable shift is the component's risk. Residuals vanish by
    construction.
    """
    cfg = cfg or SolverConfig()
    _require_coherent(spec)
    sys = AggregationSystem(base=base, lift="insensitive")
    sys.domain_lower_bound(scen)
    y = base.components(scen.values.T).T
    r = np.atleast_1d(risk.rho(spec, y, scen.probs))
    return _build_report(sys, scen, spec, r, np.zeros_like(r), 1, "insensitive", cfg)


def nash_deterministic_en(
    net: FinancialNetwork, x, gamma, spec: RiskMeasureSpec, cfg: SolverConfig = None
) -> AllocationReport:
    """Exact Nash allocation for a deterministic shock under clearing aggregation.

    Iterates on the set I of banks needing no capital: banks outside I are
    charged exactly enough to pay the fraction gamma of their obligations
    given everyone else's payments; banks inside I keep capital -x_i and
    their payments solve a clearing subproblem fed by the outside banks'
    gamma-level payments. The set grows monotonically, so at most N rounds
    are needed, and the result is the unique Nash value at x.
    """
    cfg = cfg or SolverConfig()
    _require_coherent(spec)
    x = np.asarray(x, dtype=float).reshape(-1)
    neg = np.flatnonzero(x < 0.0)
    if neg.size:
        raise NegativeAssets(int(neg[0]))

    totals = net.total_obligations
    M = net.pi_bank
    target = gamma * totals
    n = net.n_banks
    passive = np.zeros(n, dtype=bool)

    for rounds in range(1, n + 2):
        p = target.copy()
        if passive.any():
            idx = np.flatnonzero(passive)
            off = np.flatnonzero(~passive)
            inflow = target[off] @ M[np.ix_(off, idx)] if off.size else np.zeros(idx.size)
            sub, _, _ = clearing._fictitious_default_batch(
                totals[idx], M[np.ix_(idx, idx)], inflow[None, :], 10 * idx.size + 2
            )
            p[idx] = sub[0]
        incoming = p @ M
        m = np.where(passive, -x, -x + target - incoming)
        slack = 1e-12 * np.maximum(1.0, totals)
        grown = passive | (m <= -x + slack)
        if np.array_equal(grown, passive):
            break
        passive = grown
    else:
        raise NonConvergence("passive set failed to stabilize (internal error)")

    scen = ScenarioSet.deterministic(x)
    sys = AggregationSystem(base=EisenbergNoe(net=net, gamma=gamma), lift="sensitive")
    phi = best_response_all(m, scen, sys, spec, cfg)
    report = _build_report(
        sys, scen, spec, m, np.abs(phi - m), rounds, "deterministic-en", cfg
    )
    return report


def verify_nash(
    m, scen: ScenarioSet, sys: AggregationSystem, spec: RiskMeasureSpec,
    cfg: SolverConfig = None,
) -> AllocationReport:
    """Recompute every best response at fixed m and report the residuals."""
    cfg = cfg or SolverConfig()
    m = np.asarray(m, dtype=float).reshape(-1)
    phi = best_response_all(m, scen, sys, spec, cfg)
    return _build_report(sys, scen, spec, m, np.abs(phi - m), 0, "verify", cfg)
