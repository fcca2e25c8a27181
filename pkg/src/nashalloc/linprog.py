"""Dense LP solver and linear encodings of the clearing-network programs.

The simplex is a self-contained two-phase dense tableau implementation
with implicit variable bounds (nonbasic variables may rest at either
bound, and bound flips avoid basis changes). Pricing is Dantzig's rule
with Bland's rule engaged after a run of degenerate pivots, which
guarantees termination. No external solver is involved.

The encodings express the minimal-total capital programs under clearing
aggregation. Clearing enters through per-scenario payment variables
constrained to be sub-solutions of the clearing equation; any feasible
sub-solution is dominated by the greatest clearing vector, so the
acceptability constraints are conservative and exact at the optimum.
Expectation constraints are single rows; average value-at-risk uses the
tail-average auxiliary form; general optimized certainty equivalents use
a shift variable and per-scenario utility bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import clearing, risk
from .aggregation import AggregationSystem, EisenbergNoe
from .errors import InfeasibleProgram, NonCoherentRiskMeasure, NumericalBreakdown
from .nash import AllocationReport, SolverConfig, verify_nash
from .network import FinancialNetwork
from .risk import RiskMeasureSpec
from .scenarios import ScenarioSet

ENTER_TOL = 1e-9
PIVOT_TOL = 1e-11
DEGENERATE_STEP = 1e-12
BLAND_TRIGGER = 500
FEASIBILITY_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """min (or max) objective . x subject to row constraints and box bounds.

    constraints is a list of (coefficients, relation, rhs) with relation one
    of "<=", "=", ">=". Bounds default to free variables.
    """

    objective: np.ndarray
    constraints: list
    lower: np.ndarray = None
    upper: np.ndarray = None
    names: list = field(default_factory=list)
    maximize: bool = False

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        self.lower = (
            np.full(n, -np.inf) if self.lower is None
            else np.asarray(self.lower, dtype=float)
        )
        self.upper = (
            np.full(n, np.inf) if self.upper is None
            else np.asarray(self.upper, dtype=float)
        )
        if not self.names:
            self.names = [f"x{j}" for j in range(n)]
        if not (self.lower.shape == self.upper.shape == (n,)):
            raise ValueError("bounds must match the objective length")
        for coeffs, rel, _ in self.constraints:
            if rel not in ("<=", "=", ">="):
                raise ValueError(f"unknown relation {rel!r}")
            if np.asarray(coeffs).shape != (n,):
                raise ValueError("constraint width must match the objective length")

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]


@dataclass
class LPResult:
    status: str
    x: np.ndarray = None
    objective: float = None
    pivots: int = 0


def format_lp(lp: LinearProgram) -> str:
    """Plain-text dump of the program for inspection."""
    sense = "max" if lp.maximize else "min"
    out = [f"{sense} " + " + ".join(
        f"{c:g}*{nm}" for c, nm in zip(lp.objective, lp.names) if c != 0.0
    )]
    for coeffs, rel, rhs in lp.constraints:
        terms = " + ".join(
            f"{c:g}*{nm}" for c, nm in zip(coeffs, lp.names) if c != 0.0
        )
        out.append(f"  {terms or '0'} {rel} {rhs:g}")
    for nm, lo, hi in zip(lp.names, lp.lower, lp.upper):
        if np.isfinite(lo) or np.isfinite(hi):
            out.append(f"  {lo:g} <= {nm} <= {hi:g}")
    return "\n".join(out)


class _Tableau:
    """Bounded-variable simplex state over a dense tableau."""

    def __init__(self, A, b, upper):
        m, n = A.shape
        self.m, self.n = m, n
        self.T = np.hstack([A, b[:, None]])
        self.cost = np.zeros(n)
        self.upper = upper
        self.basis = np.full(m, -1, dtype=int)
        self.at_upper = np.zeros(n, dtype=bool)
        self.xb = b.copy()
        self.allowed = np.ones(n, dtype=bool)
        self.pivots = 0
        self.degenerate = 0
        self.bland = False

    def set_cost(self, c):
        self.cost = np.asarray(c, dtype=float).copy()
        # reduce against the current basis so basic reduced costs vanish
        for r in range(self.m):
            j = self.basis[r]
            if self.cost[j] != 0.0:
                self.cost -= self.cost[j] * self.T[r, : self.n]

    def solution(self):
        x = np.where(self.at_upper, np.where(np.isfinite(self.upper), self.upper, 0.0), 0.0)
        x[self.basis] = self.xb
        return x

    def _entering(self):
        d = self.cost
        basic = np.zeros(self.n, dtype=bool)
        basic[self.basis] = True
        eligible = self.allowed & ~basic
        from_lower = eligible & ~self.at_upper & (d < -ENTER_TOL)
        from_upper = eligible & self.at_upper & (d > ENTER_TOL)
        candidates = np.flatnonzero(from_lower | from_upper)
        if candidates.size == 0:
            return -1, 0
        if self.bland:
            j = int(candidates[0])
        else:
            j = int(candidates[np.argmax(np.abs(d[candidates]))])
        return j, (-1 if self.at_upper[j] else +1)

    def step(self):
        """One simplex step; returns 'optimal', 'unbounded', or 'pivot'."""
        j, direction = self._entering()
        if j < 0:
            return "optimal"
        y = direction * self.T[: self.m, j]

        # largest step before some basic variable hits one of its bounds
        t_rows = np.full(self.m, np.inf)
        dec = y > PIVOT_TOL
        if dec.any():
            t_rows[dec] = np.maximum(self.xb[dec], 0.0) / y[dec]
        inc = y < -PIVOT_TOL
        if inc.any():
            ub = self.upper[self.basis]
            cap = inc & np.isfinite(ub)
            if cap.any():
                t_rows[cap] = np.maximum(ub[cap] - self.xb[cap], 0.0) / (-y[cap])
        t_basic = float(t_rows.min()) if self.m else np.inf
        own_cap = self.upper[j]

        if own_cap <= t_basic:
            if not np.isfinite(own_cap):
                return "unbounded"
            # bound flip: the entering variable crosses to its other bound
            self.xb -= own_cap * y
            self.at_upper[j] = ~self.at_upper[j]
            self.pivots += 1
            if own_cap <= DEGENERATE_STEP:
                self._note_degenerate()
            return "pivot"
        if not np.isfinite(t_basic):
            return "unbounded"

        rows = np.flatnonzero(t_rows <= t_basic + 1e-12)
        if self.bland:
            r = int(min(rows, key=lambda rr: self.basis[rr]))
        else:
            r = int(max(rows, key=lambda rr: abs(self.T[rr, j])))
        pivot = self.T[r, j]
        if abs(pivot) < PIVOT_TOL:
            raise NumericalBreakdown(f"pivot magnitude {abs(pivot):.2e} below threshold")

        self.xb -= t_basic * y
        leaving = self.basis[r]
        # the leaving variable lands on whichever of its bounds it hit
        self.at_upper[leaving] = y[r] < 0.0
        entering_value = t_basic if direction > 0 else self.upper[j] - t_basic
        self.at_upper[j] = False
        self.basis[r] = j
        self.xb[r] = entering_value
        row = self.T[r] / pivot
        self.T[r] = row
        col = self.T[: self.m, j].copy()
        col[r] = 0.0
        # eliminate only the rows the entering column actually touches
        nz = np.flatnonzero(np.abs(col) > 1e-13)
        if nz.size:
            if nz.size < self.m // 2:
                self.T[nz] -= np.outer(col[nz], row)
            else:
                self.T[: self.m] -= np.outer(col, row)
        self.cost -= self.cost[j] * row[: self.n]
        self.pivots += 1
        if t_basic <= DEGENERATE_STEP:
            self._note_degenerate()
        return "pivot"

    def _note_degenerate(self):
        self.degenerate += 1
        if self.degenerate >= BLAND_TRIGGER:
            self.bland = True


def _standardize(lp: LinearProgram):
    """Rewrite to nonnegative shifted/split variables; returns the mapping."""
    n = lp.n_vars
    cols = []  # (source var, kind, offset) with kind shift|mirror|pos|neg
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo > hi:
            return None, None, None, None
        if np.isfinite(lo):
            cols.append((j, "shift", lo))
        elif np.isfinite(hi):
            cols.append((j, "mirror", hi))
        else:
            cols.append((j, "pos", 0.0))
            cols.append((j, "neg", 0.0))
    k = len(cols)
    upper = np.full(k, np.inf)
    for idx, (j, kind, off) in enumerate(cols):
        if kind == "shift" and np.isfinite(lp.upper[j]):
            upper[idx] = lp.upper[j] - off

    src = np.array([j for j, _, _ in cols], dtype=int)
    sign = np.array([1.0 if kind in ("shift", "pos") else -1.0 for _, kind, _ in cols])
    offs = np.array([off if kind in ("shift", "mirror") else 0.0 for _, kind, off in cols])

    def expand(vec):
        return sign * np.asarray(vec, dtype=float)[src]

    def offset_term(vec):
        # constant contributed by shifted and mirrored variables
        return float(offs @ np.asarray(vec, dtype=float)[src])

    return cols, upper, expand, offset_term


def _recover(cols, z, n):
    x = np.zeros(n)
    for idx, (j, kind, off) in enumerate(cols):
        if kind == "shift":
            x[j] = off + z[idx]
        elif kind == "mirror":
            x[j] = off - z[idx]
        elif kind == "pos":
            x[j] += z[idx]
        else:
            x[j] -= z[idx]
    return x


def solve_lp(lp: LinearProgram, max_pivots=None) -> LPResult:
    """Two-phase bounded-variable simplex; exact statuses, no external solver."""
    cols, upper_struct, expand, offset_term = _standardize(lp)
    if cols is None:
        return LPResult(status=INFEASIBLE)
    n_struct = len(cols)
    c_struct = expand(-lp.objective if lp.maximize else lp.objective)

    rows = []
    senses = []
    rhs = []
    for coeffs, rel, b in lp.constraints:
        coeffs = np.asarray(coeffs, dtype=float)
        row = expand(coeffs)
        shift = offset_term(coeffs)
        rows.append(row)
        senses.append(rel)
        rhs.append(float(b) - shift)
    m = len(rows)
    A = np.array(rows) if m else np.zeros((0, n_struct))
    b = np.array(rhs)

    # flip rows to nonnegative right-hand sides
    for r in range(m):
        if b[r] < 0.0:
            A[r] *= -1.0
            b[r] *= -1.0
            senses[r] = {"<=": ">=", ">=": "<=", "=": "="}[senses[r]]

    n_slack = sum(1 for srel in senses if srel != "=")
    slack_cols = np.zeros((m, n_slack))
    art_rows = []
    si = 0
    for r, srel in enumerate(senses):
        if srel == "<=":
            slack_cols[r, si] = 1.0
            si += 1
        elif srel == ">=":
            slack_cols[r, si] = -1.0
            si += 1
            art_rows.append(r)
        else:
            art_rows.append(r)
    n_art = len(art_rows)
    art_cols = np.zeros((m, n_art))
    for k, r in enumerate(art_rows):
        art_cols[r, k] = 1.0

    full = np.hstack([A, slack_cols, art_cols]) if m else np.zeros((0, n_struct))
    upper = np.concatenate([upper_struct, np.full(n_slack + n_art, np.inf)])
    tab = _Tableau(full, b, upper)
    if max_pivots is None:
        max_pivots = 2000 + 200 * (m + n_struct)

    # initial basis: slacks where they enter positively, artificials elsewhere
    si = 0
    ai = 0
    for r, srel in enumerate(senses):
        if srel == "<=":
            tab.basis[r] = n_struct + si
            si += 1
        else:
            if srel == ">=":
                si += 1
            tab.basis[r] = n_struct + n_slack + ai
            ai += 1

    if n_art:
        c1 = np.zeros(full.shape[1])
        c1[n_struct + n_slack:] = 1.0
        tab.set_cost(c1)
        while True:
            outcome = tab.step()
            if outcome == "optimal":
                break
            if outcome == "unbounded":
                raise NumericalBreakdown("phase 1 reported unbounded (internal error)")
            if tab.pivots > max_pivots:
                raise NumericalBreakdown("phase 1 pivot limit reached")
        art_mask = np.zeros(full.shape[1], dtype=bool)
        art_mask[n_struct + n_slack:] = True
        infeas = float(tab.xb[art_mask[tab.basis]].sum())
        if infeas > 1e-7 * max(1.0, np.abs(b).max() if m else 1.0):
            return LPResult(status=INFEASIBLE, pivots=tab.pivots)
        _drive_out_artificials(tab, n_struct + n_slack)
        tab.allowed[n_struct + n_slack:] = False

    c2 = np.zeros(full.shape[1])
    c2[:n_struct] = c_struct
    tab.set_cost(c2)
    while True:
        outcome = tab.step()
        if outcome == "optimal":
            break
        if outcome == "unbounded":
            return LPResult(status=UNBOUNDED, pivots=tab.pivots)
        if tab.pivots > max_pivots:
            raise NumericalBreakdown("phase 2 pivot limit reached")

    z = tab.solution()[:n_struct]
    x = _recover(cols, z, lp.n_vars)
    _check_feasible(lp, x)
    return LPResult(
        status=OPTIMAL,
        x=x,
        objective=float(lp.objective @ x),
        pivots=tab.pivots,
    )


def _drive_out_artificials(tab: _Tableau, first_art: int):
    """Pivot zero-valued artificial basics onto structural columns where possible."""
    drop = []
    for r in range(tab.m):
        if tab.basis[r] < first_art:
            continue
        row = tab.T[r, :first_art]
        cand = np.flatnonzero(np.abs(row) > 1e-9)
        cand = cand[tab.allowed[cand]] if cand.size else cand
        if cand.size == 0:
            drop.append(r)
            continue
        j = int(cand[np.argmax(np.abs(row[cand]))])
        pivot = tab.T[r, j]
        new_row = tab.T[r] / pivot
        tab.T[r] = new_row
        col = tab.T[: tab.m, j].copy()
        col[r] = 0.0
        tab.T[: tab.m] -= np.outer(col, new_row)
        tab.at_upper[j] = False
        tab.basis[r] = j
        tab.xb[r] = max(tab.xb[r], 0.0)
    if drop:
        keep = np.ones(tab.m, dtype=bool)
        keep[drop] = False
        tab.T = tab.T[keep]
        tab.basis = tab.basis[keep]
        tab.xb = tab.xb[keep]
        tab.m = int(keep.sum())


def _check_feasible(lp: LinearProgram, x):
    scale = max(1.0, float(np.abs(x).max()))
    for coeffs, rel, b in lp.constraints:
        v = float(np.asarray(coeffs) @ x)
        if rel == "<=" and v > b + FEASIBILITY_TOL * scale:
            raise NumericalBreakdown(f"constraint violated by {v - b:.2e}")
        if rel == ">=" and v < b - FEASIBILITY_TOL * scale:
            raise NumericalBreakdown(f"constraint violated by {b - v:.2e}")
        if rel == "=" and abs(v - b) > FEASIBILITY_TOL * scale:
            raise NumericalBreakdown(f"constraint violated by {abs(v - b):.2e}")
    if np.any(x < lp.lower - FEASIBILITY_TOL * scale) or np.any(
        x > lp.upper + FEASIBILITY_TOL * scale
    ):
        raise NumericalBreakdown("bound violated at reported optimum")


# ---------------------------------------------------------------------------
# clearing-network capital programs
# ---------------------------------------------------------------------------

@dataclass
class EnLpSolution:
    """Optimal capital with the per-scenario payments recovered from the LP.

    payments is the greatest completion of the optimum (the clearing vectors
    at X + m), which the internal sub-solution variables are dominated by.
    """

    m: np.ndarray
    total: float
    payments: np.ndarray
    payments_lp: np.ndarray
    pivots: int
    program: LinearProgram


def _en_program(net: FinancialNetwork, scen: ScenarioSet, spec: RiskMeasureSpec,
                gamma, per_bank: bool) -> LinearProgram:
    if spec.kind == "entropic":
        raise NonCoherentRiskMeasure("entropic acceptability is not linear")
    n, s = scen.n_banks, scen.n_scenarios
    if n != net.n_banks:
        raise ValueError("scenario bank count does not match the network")
    X = scen.values
    probs = scen.probs
    M = net.pi_bank
    pi0 = net.pi_society
    soc = net.society_obligations
    totals = net.total_obligations
    essinf = X.min(axis=1)

    names = [f"m_{i + 1}" for i in range(n)]
    lower = list(-essinf)
    upper = [np.inf] * n

    def p_idx(w, i):
        return n + w * n + i

    for w in range(s):
        for i in range(n):
            names.append(f"p_w{w + 1}_b{i + 1}")
            lower.append(0.0)
            upper.append(totals[i])

    n_p = n + s * n
    extra_names, extra_lower, extra_upper = [], [], []
    constraints = []

    def row(width=None):
        return np.zeros(width if width is not None else n_total)

    # risk auxiliaries
    groups = range(n) if per_bank else [None]
    if spec.kind == "avar":
        t_of, s_of = {}, {}
        for g in groups:
            tag = f"_b{g + 1}" if per_bank else ""
            t_of[g] = n_p + len(extra_names)
            extra_names.append(f"t{tag}")
            extra_lower.append(-np.inf)
            extra_upper.append(np.inf)
        for g in groups:
            tag = f"_b{g + 1}" if per_bank else ""
            s_of[g] = n_p + len(extra_names)
            for w in range(s):
                extra_names.append(f"s_w{w + 1}{tag}")
                extra_lower.append(0.0)
                extra_upper.append(np.inf)
    elif spec.kind == "oce":
        eta_of, w_of = {}, {}
        for g in groups:
            tag = f"_b{g + 1}" if per_bank else ""
            eta_of[g] = n_p + len(extra_names)
            extra_names.append(f"eta{tag}")
            extra_lower.append(-np.inf)
            extra_upper.append(np.inf)
        for g in groups:
            tag = f"_b{g + 1}" if per_bank else ""
            w_of[g] = n_p + len(extra_names)
            for w in range(s):
                extra_names.append(f"u_w{w + 1}{tag}")
                extra_lower.append(-np.inf)
                extra_upper.append(np.inf)

    n_total = n_p + len(extra_names)
    names += extra_names
    lower = np.array(lower + extra_lower)
    upper = np.array(upper + extra_upper)

    # clearing sub-solution rows: p_wi - m_i - sum_j M[j,i] p_wj <= X_i(w)
    for w in range(s):
        for i in range(n):
            r = row()
            r[p_idx(w, i)] += 1.0
            r[i] -= 1.0
            for j in range(n):
                if M[j, i] != 0.0:
                    r[p_idx(w, j)] -= M[j, i]
            constraints.append((r, "<=", float(X[i, w])))

    def society_coeffs(r, w, members, scale=1.0):
        for i in members:
            r[p_idx(w, i)] += scale * pi0[i]

    for g in groups:
        members = [g] if per_bank else list(range(n))
        offset = float(gamma * soc[members].sum())
        if spec.kind == "expectation":
            r = row()
            for w in range(s):
                society_coeffs(r, w, members, scale=float(probs[w]))
            constraints.append((r, ">=", offset))
        elif spec.kind == "avar":
            alpha = spec.alpha
            r = row()
            r[t_of[g]] = 1.0
            for w in range(s):
                r[s_of[g] + w] = float(probs[w]) / alpha
            constraints.append((r, "<=", 0.0))
            for w in range(s):
                r = row()
                r[s_of[g] + w] = 1.0
                society_coeffs(r, w, members)
                r[t_of[g]] += 1.0
                constraints.append((r, ">=", offset))
        else:  # oce
            g1, g2 = spec.gamma1, spec.gamma2
            r = row()
            r[eta_of[g]] = 1.0
            for w in range(s):
                r[w_of[g] + w] = -float(probs[w])
            constraints.append((r, "<=", 0.0))
            for w in range(s):
                for slope in (g1, g2):
                    r = row()
                    r[w_of[g] + w] = 1.0
                    society_coeffs(r, w, members, scale=-slope)
                    r[eta_of[g]] -= slope
                    constraints.append((r, "<=", -slope * offset))

    objective = np.zeros(n_total)
    objective[:n] = 1.0
    return LinearProgram(
        objective=objective,
        constraints=constraints,
        lower=lower,
        upper=upper,
        names=names,
    )


MONOLITH_SCENARIO_LIMIT = 500
CUT_FEAS_TOL = 1e-9
CUT_ROUNDS = 500


def _en_cut_generation(net, scen, spec, gamma, per_bank: bool):
    """Solve the capital program by delayed constraint generation.

    Equivalent to the monolithic encoding: the per-scenario payment rows are
    projected out and reintroduced as exact linear under-estimates of the
    (piecewise-linear, convex) acceptability functions, built from clearing
    supergradients and maximizing risk reweightings. Finitely many pieces
    exist, so the master sequence reaches the true optimum.
    """
    n, s = scen.n_banks, scen.n_scenarios
    X = scen.values
    probs = scen.probs
    pi0 = net.pi_society
    soc = net.society_obligations
    lower = -X.min(axis=1)
    rbar = net.total_obligations - X.min(axis=1)
    # any optimum satisfies sum(m) <= sum(rbar), so these boxes cut nothing
    box_hi = rbar.sum() - lower.sum() + lower + 1.0

    offsets = (gamma * soc if per_bank else np.array([gamma * soc.sum()]))
    scale = max(1.0, float(net.total_obligations.max()))

    constraints = []
    m_cur = lower.copy()
    pivots = 0
    for _ in range(CUT_ROUNDS):
        payments, jac = clearing.clearing_jacobian_batch(net, X.T + m_cur)
        if per_bank:
            outcomes = pi0 * payments - gamma * soc            # (S, N)
            grads = pi0[None, :, None] * jac                   # (S, N, N)
        else:
            outcomes = (payments @ pi0 - gamma * soc.sum())[:, None]
            grads = np.einsum("i,sij->sj", pi0, jac)[:, None, :]
        worst = -np.inf
        added = 0
        for k in range(outcomes.shape[1]):
            value = risk.rho(spec, outcomes[:, k], probs)
            worst = max(worst, value)
            if value <= CUT_FEAS_TOL * scale:
                continue
            q = risk.dual_weights(spec, outcomes[:, k], probs)
            slope = -np.einsum("s,sj->j", q, grads[:, k, :])
            # rho(m) >= value + slope . (m - m_cur); require the support <= 0
            coeffs = np.zeros(n)
            coeffs[:] = slope
            rhs = float(slope @ m_cur - value)
            constraints.append((coeffs, "<=", rhs))
            added += 1
        if worst <= CUT_FEAS_TOL * scale:
            return m_cur, pivots
        if added == 0:
            raise NumericalBreakdown("cut generation stalled above tolerance")
        master = LinearProgram(
            objective=np.ones(n),
            constraints=list(constraints),
            lower=lower,
            upper=box_hi,
            names=[f"m_{i + 1}" for i in range(n)],
        )
        result = solve_lp(master)
        if result.status != OPTIMAL:
            raise InfeasibleProgram(
                f"cut master reported {result.status} (internal error)"
            )
        pivots += result.pivots
        m_cur = result.x
    raise NumericalBreakdown("cut generation exceeded its round limit")


def solve_en_program(net, scen, spec, gamma, per_bank: bool,
                     method: str = "auto") -> EnLpSolution:
    """Build and solve a clearing capital program, completing the payments.

    method "monolith" materializes every scenario's payment variables in one
    LP (the default up to MONOLITH_SCENARIO_LIMIT scenarios); "cuts" solves
    the same program by constraint generation, which scales to large
    scenario sets. Both return the same optimum.
    """
    if spec.kind == "entropic":
        raise NonCoherentRiskMeasure("entropic acceptability is not linear")
    if method == "auto":
        method = "monolith" if scen.n_scenarios <= MONOLITH_SCENARIO_LIMIT else "cuts"
    if method == "cuts":
        m, pivots = _en_cut_generation(net, scen, spec, gamma, per_bank)
        payments = clearing.clearing_payments_batch(net, scen.values.T + m)
        return EnLpSolution(
            m=m, total=float(m.sum()), payments=payments, payments_lp=None,
            pivots=pivots, program=None,
        )
    program = _en_program(net, scen, spec, gamma, per_bank)
    result = solve_lp(program)
    if result.status != OPTIMAL:
        raise InfeasibleProgram(
            f"clearing capital program reported {result.status} (internal error)"
        )
    n, s = scen.n_banks, scen.n_scenarios
    m = result.x[:n]
    payments_lp = result.x[n: n + s * n].reshape(s, n)
    payments = clearing.clearing_payments_batch(net, scen.values.T + m)
    return EnLpSolution(
        m=m,
        total=float(m.sum()),
        payments=payments,
        payments_lp=payments_lp,
        pivots=result.pivots,
        program=program,
    )


def nash_lp_en(net: FinancialNetwork, scen: ScenarioSet, spec: RiskMeasureSpec,
               gamma, cfg: SolverConfig = None, method: str = "auto") -> AllocationReport:
    """Minimal-total capital with per-bank acceptability; a Nash allocation.

    Solved as one LP; the result is re-verified through the best-response
    map before being reported.
    """
    cfg = cfg or SolverConfig()
    sol = solve_en_program(net, scen, spec, gamma, per_bank=True, method=method)
    sys = AggregationSystem(base=EisenbergNoe(net=net, gamma=gamma), lift="sensitive")
    report = verify_nash(sol.m, scen, sys, spec, cfg)
    report.method = "lp"
    report.iterations = sol.pivots
    return report


def minimal_capital_en(net: FinancialNetwork, scen: ScenarioSet, spec: RiskMeasureSpec,
                       gamma, method: str = "auto"):
    """Minimal total capital under the single system acceptability constraint."""
    sol = solve_en_program(net, scen, spec, gamma, per_bank=False, method=method)
    return sol.m, sol.total
