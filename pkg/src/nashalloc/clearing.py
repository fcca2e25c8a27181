"""Clearing payment vectors for obligation networks.

The clearing vector p(x) is the unique fixed point of

    p_i = min( total_i , x_i + sum_j pi_bank[j, i] * p_j )

for external assets x >= 0. Uniqueness holds because every bank owes a
strictly positive amount to society, so interbank shares sum to less than
one in every column. The solver iterates on the default set (fictitious
default): banks that cannot pay in full under the current optimistic
payments are marked defaulting and the linear subsystem on that set is
solved exactly; the set only grows, so at most N+1 rounds are needed.
A Picard fallback covers the (never observed) case of a failed round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeAssets, NonConvergence, SingularSystem
from .network import FinancialNetwork

FIXED_POINT_TOL = 1e-10
# Slack used to resolve boundary banks: a bank whose candidate payment is
# within this of its total is treated as paying in full (one-sided choice
# at kinks of p).
KINK_TOL = 1e-12
PICARD_CAP = 10**6


@dataclass(frozen=True)
class ClearingResult:
    """Clearing payments with the realized default set."""

    payments: np.ndarray
    defaults: np.ndarray
    iterations: int


def _min_form_residual(totals, M, assets, p):
    """Componentwise residual of the clearing fixed-point equation."""
    return np.abs(p - np.minimum(totals, assets + p @ M))


def _fictitious_default_batch(totals, M, assets, max_rounds):
    """Solve the min-form clearing equation for a batch of asset vectors.

    totals : (N,) payment caps.
    M : (N, N) share matrix; M[j, i] is the fraction of j's payment sent to i.
    assets : (S, N) external assets, one scenario per row.

    Returns (payments (S, N), defaults (S, N) bool, rounds). Rows are grouped
    by default pattern so each round costs a handful of dense solves.
    """
    n = totals.shape[0]
    s = assets.shape[0]
    p = np.tile(totals, (s, 1))
    defaulting = np.zeros((s, n), dtype=bool)
    slack = KINK_TOL * np.maximum(1.0, totals)
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        candidate = assets + p @ M
        new_defaulting = defaulting | (candidate < totals - slack)
        if np.array_equal(new_defaulting, defaulting) and rounds > 1:
            return p, defaulting, rounds
        if rounds == 1 and not new_defaulting.any():
            return p, new_defaulting, rounds
        defaulting = new_defaulting
        patterns, inverse = np.unique(defaulting, axis=0, return_inverse=True)
        for k, mask in enumerate(patterns):
            rows = np.flatnonzero(inverse == k)
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                p[rows] = totals
                continue
            off = np.flatnonzero(~mask)
            lhs = np.eye(idx.size) - M[np.ix_(idx, idx)].T
            rhs = assets[np.ix_(rows, idx)]
            if off.size:
                rhs = rhs + totals[off] @ M[np.ix_(off, idx)]
            try:
                sol = np.linalg.solve(lhs, rhs.T).T
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(str(exc)) from exc
            p[rows] = totals
            p[np.ix_(rows, idx)] = np.maximum(sol, 0.0)
    return p, defaulting, rounds


def _picard_batch(totals, M, assets, tol, cap=PICARD_CAP):
    """Plain monotone iteration of the min-form map from the payment caps."""
    p = np.tile(totals, (assets.shape[0], 1))
    scale = max(1.0, float(totals.max()))
    for it in range(1, cap + 1):
        nxt = np.minimum(totals, assets + p @ M)
        change = np.abs(nxt - p).max()
        p = nxt
        if change <= 0.01 * tol * scale:
            return p, it
    raise NonConvergence(f"Picard clearing did not converge within {cap} iterations")


def clearing_payments_batch(net: FinancialNetwork, assets, tol=FIXED_POINT_TOL):
    """Clearing payments for many asset vectors at once; returns an (S, N) array."""
    assets = np.asarray(assets, dtype=float)
    totals = net.total_obligations
    M = net.pi_bank
    neg = np.argwhere(assets < 0.0)
    if neg.size:
        raise NegativeAssets(int(neg[0][-1]))
    p, _, _ = _fictitious_default_batch(totals, M, assets, 10 * net.n_banks + 2)
    scale = max(1.0, float(totals.max()))
    if _min_form_residual(totals, M, assets, p).max() > tol * scale:
        p, _ = _picard_batch(totals, M, assets, tol)
        if _min_form_residual(totals, M, assets, p).max() > tol * scale:
            raise NonConvergence("clearing residual above tolerance after fallback")
    return p


def clearing_vector(net: FinancialNetwork, assets, tol=FIXED_POINT_TOL) -> ClearingResult:
    """Unique clearing payment vector for one asset vector.

    Raises NegativeAssets for out-of-domain input and NonConvergence if the
    residual tolerance cannot be met (not expected for valid networks).
    """
    assets = np.asarray(assets, dtype=float).reshape(-1)
    if assets.shape[0] != net.n_banks:
        raise ValueError(f"assets must have length {net.n_banks}, got {assets.shape[0]}")
    neg = np.flatnonzero(assets < 0.0)
    if neg.size:
        raise NegativeAssets(int(neg[0]))
    totals = net.total_obligations
    M = net.pi_bank
    p, defaulting, rounds = _fictitious_default_batch(
        totals, M, assets[None, :], 10 * net.n_banks + 2
    )
    scale = max(1.0, float(totals.max()))
    if _min_form_residual(totals, M, assets[None, :], p).max() > tol * scale:
        p, picard_its = _picard_batch(totals, M, assets[None, :], tol)
        rounds += picard_its
        if _min_form_residual(totals, M, assets[None, :], p).max() > tol * scale:
            raise NonConvergence("clearing residual above tolerance after fallback")
        defaulting = p[0] < totals - KINK_TOL * np.maximum(1.0, totals)
        defaulting = defaulting[None, :]
    return ClearingResult(
        payments=p[0], defaults=np.asarray(defaulting[0], dtype=bool), iterations=rounds
    )


def clearing_jacobian(net: FinancialNetwork, assets, tol=FIXED_POINT_TOL):
    """Derivative matrix dp/dx of the clearing payments.

    Entry (i, j) equals [(I - diag(lam) pi_bank^T)^{-1}]_{ij} for defaulting j
    and 0 otherwise, with lam the default indicator of the computed clearing
    vector. At a kink (a bank exactly on its payment cap) this is the
    one-sided derivative implied by treating that bank as non-defaulting.
    """
    res = clearing_vector(net, assets, tol=tol)
    lam = res.defaults.astype(float)
    n = net.n_banks
    if not res.defaults.any():
        return np.zeros((n, n))
    lhs = np.eye(n) - lam[:, None] * net.pi_bank.T
    try:
        inv = np.linalg.solve(lhs, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return inv * lam[None, :]


def clearing_jacobian_batch(net: FinancialNetwork, assets, tol=FIXED_POINT_TOL):
    """Payments and dp/dx for many asset vectors; returns ((S, N), (S, N, N)).

    Scenarios sharing a default pattern share the Leontief inverse, so each
    distinct pattern costs one dense solve.
    """
    assets = np.asarray(assets, dtype=float)
    neg = np.argwhere(assets < 0.0)
    if neg.size:
        raise NegativeAssets(int(neg[0][-1]))
    totals = net.total_obligations
    M = net.pi_bank
    n = net.n_banks
    p = clearing_payments_batch(net, assets, tol=tol)
    slack = KINK_TOL * np.maximum(1.0, totals)
    defaulting = p < totals - slack
    jac = np.zeros((assets.shape[0], n, n))
    patterns, inverse = np.unique(defaulting, axis=0, return_inverse=True)
    eye = np.eye(n)
    for k, mask in enumerate(patterns):
        if not mask.any():
            continue
        lam = mask.astype(float)
        lhs = eye - lam[:, None] * M.T
        try:
            block = np.linalg.solve(lhs, eye) * lam[None, :]
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        jac[inverse == k] = block
    return p, jac


def society_payment_components(net: FinancialNetwork, assets, gamma, tol=FIXED_POINT_TOL):
    """Per-bank society payment surplus pi_i0 * p_i(x) - gamma * pbar_i0.

    gamma is the required repaid fraction of society obligations; the vector
    sums to the aggregate society surplus.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    res = clearing_vector(net, assets, tol=tol)
    return net.pi_society * res.payments - gamma * net.society_obligations


def society_components_batch(net: FinancialNetwork, assets, gamma, tol=FIXED_POINT_TOL):
    """Batched society payment surpluses; assets is (S, N), result is (S, N)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    p = clearing_payments_batch(net, assets, tol=tol)
    return net.pi_society * p - gamma * net.society_obligations
