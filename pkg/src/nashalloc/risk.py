"""Scalar risk measures on discrete scenario laws.

Four parametric families are supported: the negated expectation, average
value-at-risk, optimized certainty equivalents with piecewise-linear
utility, and the entropic risk measure. The first three are coherent; the
entropic one is convex only and exists to demonstrate why coherence is
needed for per-bank acceptability to aggregate. All evaluations are exact
for discrete laws: AVaR via the tail average of the loss distribution and
the OCE inner infimum by scanning the breakpoints of its piecewise-linear
objective, where the minimum is always attained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

ACCEPTABILITY_TOL = 1e-9

KINDS = ("expectation", "avar", "oce", "entropic")


@dataclass(frozen=True)
class RiskMeasureSpec:
    """Parametric description of an acceptance set.

    kind : one of "expectation", "avar", "oce", "entropic".
    alpha : AVaR tail level in (0, 1].
    gamma1, gamma2 : OCE utility slopes with gamma2 >= 1 >= gamma1 >= 0.
    theta : entropic risk aversion, positive.
    """

    kind: str
    alpha: float = None
    gamma1: float = None
    gamma2: float = None
    theta: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown risk measure kind {self.kind!r}")
        if self.kind == "avar" and not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"AVaR level must lie in (0, 1], got {self.alpha}")
        if self.kind == "oce":
            if not (self.gamma2 >= 1.0 >= self.gamma1 >= 0.0):
                raise ValueError(
                    f"OCE slopes must satisfy gamma2 >= 1 >= gamma1 >= 0, "
                    f"got ({self.gamma1}, {self.gamma2})"
                )
        if self.kind == "entropic" and not self.theta > 0.0:
            raise ValueError(f"entropic risk aversion must be positive, got {self.theta}")

    @property
    def coherent(self) -> bool:
        return self.kind != "entropic"

    def label(self) -> str:
        if self.kind == "avar":
            return f"avar:{self.alpha:g}"
        if self.kind == "oce":
            return f"oce:{self.gamma1:g}:{self.gamma2:g}"
        if self.kind == "entropic":
            return f"entropic:{self.theta:g}"
        return "expectation"


def expectation() -> RiskMeasureSpec:
    return RiskMeasureSpec(kind="expectation")


def avar(alpha) -> RiskMeasureSpec:
    return RiskMeasureSpec(kind="avar", alpha=float(alpha))


def oce(gamma1, gamma2) -> RiskMeasureSpec:
    return RiskMeasureSpec(kind="oce", gamma1=float(gamma1), gamma2=float(gamma2))


def entropic(theta) -> RiskMeasureSpec:
    return RiskMeasureSpec(kind="entropic", theta=float(theta))


def parse_risk_spec(text: str) -> RiskMeasureSpec:
    """Parse the CLI syntax: expectation | avar:A | oce:G1:G2 | entropic:T."""
    parts = text.strip().split(":")
    try:
        if parts[0] == "expectation" and len(parts) == 1:
            return expectation()
        if parts[0] == "avar" and len(parts) == 2:
            return avar(float(parts[1]))
        if parts[0] == "oce" and len(parts) == 3:
            return oce(float(parts[1]), float(parts[2]))
        if parts[0] == "entropic" and len(parts) == 2:
            return entropic(float(parts[1]))
    except ValueError as exc:
        raise ParseError(f"bad risk spec {text!r}: {exc}") from exc
    raise ParseError(f"bad risk spec {text!r}")


def _avar_rho(y, probs, alpha):
    losses = -y
    order = np.argsort(losses, axis=-1)[..., ::-1]
    sorted_losses = np.take_along_axis(losses, order, axis=-1)
    weights = np.broadcast_to(probs, losses.shape)
    sorted_weights = np.take_along_axis(weights, order, axis=-1)
    cum = np.cumsum(sorted_weights, axis=-1)
    # mass of each sorted atom inside the worst-alpha tail
    tail_mass = np.minimum(cum, alpha) - np.minimum(cum - sorted_weights, alpha)
    return np.sum(tail_mass * sorted_losses, axis=-1) / alpha


def _oce_rho(y, probs, gamma1, gamma2):
    order = np.argsort(y, axis=-1)
    ys = np.take_along_axis(y, order, axis=-1)
    ws = np.take_along_axis(np.broadcast_to(probs, y.shape), order, axis=-1)
    cum_w = np.cumsum(ws, axis=-1)
    cum_yw = np.cumsum(ws * ys, axis=-1)
    total_yw = cum_yw[..., -1:]
    shifts = -ys
    # scenarios up to index k sit at or below the kink when the shift is -ys[k]
    below = cum_yw + shifts * cum_w
    above = (total_yw - cum_yw) + shifts * (1.0 - cum_w)
    objective = shifts - (gamma2 * below + gamma1 * above)
    return objective.min(axis=-1)


def _entropic_rho(y, probs, theta):
    z = -theta * y
    top = z.max(axis=-1, keepdims=True)
    return (top[..., 0] + np.log(np.sum(probs * np.exp(z - top), axis=-1))) / theta


def rho(spec: RiskMeasureSpec, y, probs):
    """Risk of outcome vector(s) y under the given measure.

    y may be a single length-S vector or an array (..., S) evaluated along
    the last axis; probs is the shared probability vector. Returns a float
    for 1-d input and an array otherwise.
    """
    y = np.asarray(y, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if spec.kind == "expectation":
        out = -(y @ probs)
    elif spec.kind == "avar":
        out = _avar_rho(y, probs, spec.alpha)
    elif spec.kind == "oce":
        out = _oce_rho(y, probs, spec.gamma1, spec.gamma2)
    else:
        out = _entropic_rho(y, probs, spec.theta)
    if y.ndim == 1:
        return float(out)
    return out


def is_acceptable(spec: RiskMeasureSpec, y, probs, tol=ACCEPTABILITY_TOL):
    """Whether the outcome needs no extra capital, i.e. rho(y) <= tol."""
    out = rho(spec, y, probs)
    if isinstance(out, float):
        return out <= tol
    return out <= tol


def dual_weights(spec: RiskMeasureSpec, y, probs) -> np.ndarray:
    """A maximizing scenario reweighting q with rho(y) = -q . y.

    Every coherent kind here is a worst-case expectation over a polytope of
    reweightings; this returns one maximizer, which supplies exact
    linearizations of rho along concave outcome families. Not defined for
    the entropic measure.
    """
    if not spec.coherent:
        raise ValueError("dual weights are only available for coherent kinds")
    y = np.asarray(y, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if spec.kind == "expectation":
        return probs.copy()
    if spec.kind == "avar":
        losses = -y
        order = np.argsort(losses)[::-1]
        sorted_w = probs[order]
        cum = np.cumsum(sorted_w)
        tail = np.minimum(cum, spec.alpha) - np.minimum(cum - sorted_w, spec.alpha)
        q = np.empty_like(probs)
        q[order] = tail / spec.alpha
        return q
    # oce: slopes gamma2 below the optimal shift's kink, gamma1 above,
    # with the boundary atoms absorbing the remaining mass
    order = np.argsort(y)
    ys = y[order]
    ws = probs[order]
    cum_w = np.cumsum(ws)
    cum_yw = np.cumsum(ws * ys)
    total_yw = cum_yw[-1]
    shifts = -ys
    below = cum_yw + shifts * cum_w
    above = (total_yw - cum_yw) + shifts * (1.0 - cum_w)
    objective = shifts - (spec.gamma2 * below + spec.gamma1 * above)
    k = int(np.argmin(objective))
    pivot_y = ys[k]
    q_sorted = np.where(ys < pivot_y, spec.gamma2 * ws, spec.gamma1 * ws)
    ties = ys == pivot_y
    remaining = 1.0 - q_sorted[~ties].sum()
    tie_mass = ws[ties].sum()
    q_sorted[ties] = ws[ties] * (remaining / tie_mass)
    q = np.empty_like(probs)
    q[order] = q_sorted
    return q
