"""Interbank obligation networks and relative-liability weights.

A network is an N x (N+1) matrix of nonnegative obligations. Column 0 holds
each bank's obligation to society (the real economy outside the system),
columns 1..N hold the interbank obligations. Society obligations must be
strictly positive, which makes the network regular: clearing payments are
then unique and every derived quantity downstream is well defined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeObligation, NonzeroDiagonal, ParseError, ZeroSocietyObligation

ROW_STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class FinancialNetwork:
    """Validated obligations matrix with derived relative liabilities.

    Attributes
    ----------
    obligations : (N, N+1) array, column 0 = society.
    total_obligations : (N,) row sums.
    pi : (N, N+1) row-stochastic relative liabilities.
    names : bank labels, used only for reporting.
    """

    obligations: np.ndarray
    total_obligations: np.ndarray
    pi: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        for arr in (self.obligations, self.total_obligations, self.pi):
            arr.setflags(write=False)

    @property
    def n_banks(self) -> int:
        return self.obligations.shape[0]

    @property
    def pi_society(self) -> np.ndarray:
        """Share of each bank's obligations owed to society."""
        return self.pi[:, 0]

    @property
    def pi_bank(self) -> np.ndarray:
        """N x N interbank share matrix; entry (i, j) is bank i's share owed to bank j."""
        return self.pi[:, 1:]

    @property
    def society_obligations(self) -> np.ndarray:
        return self.obligations[:, 0]


def validate_network(raw_obligations, names=()) -> FinancialNetwork:
    """Check the obligation invariants and derive the relative liabilities.

    Raises NegativeObligation, ZeroSocietyObligation, or NonzeroDiagonal on
    the first violated invariant. The diagonal must be exactly zero.
    """
    obligations = np.array(raw_obligations, dtype=float)
    if obligations.ndim != 2:
        raise ParseError("obligations must be a 2-d matrix")
    n = obligations.shape[0]
    if n < 1 or obligations.shape[1] != n + 1:
        raise ParseError(
            f"obligations must be N x (N+1) with a society column, got {obligations.shape}"
        )
    if not np.all(np.isfinite(obligations)):
        raise ParseError("obligations must be finite")
    neg = np.argwhere(obligations < 0.0)
    if neg.size:
        i, j = neg[0]
        raise NegativeObligation(int(i), int(j))
    zero_soc = np.flatnonzero(obligations[:, 0] <= 0.0)
    if zero_soc.size:
        raise ZeroSocietyObligation(int(zero_soc[0]))
    diag = np.flatnonzero(np.diagonal(obligations[:, 1:]) != 0.0)
    if diag.size:
        raise NonzeroDiagonal(int(diag[0]))

    total = obligations.sum(axis=1)
    pi = obligations / total[:, None]
    assert np.all(np.abs(pi.sum(axis=1) - 1.0) <= ROW_STOCHASTIC_TOL)
    if not names:
        names = tuple(f"bank_{i + 1}" for i in range(n))
    return FinancialNetwork(
        obligations=obligations,
        total_obligations=total,
        pi=pi,
        names=tuple(names),
    )


def load_network(path) -> FinancialNetwork:
    """Load a network from JSON: {"banks": [...], "society": [...], "interbank": [[...]]}."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read network file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("network file must contain a JSON object")
    for key in ("society", "interbank"):
        if key not in doc:
            raise ParseError(f"network file is missing the '{key}' field")
    try:
        society = np.array(doc["society"], dtype=float)
        interbank = np.array(doc["interbank"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"network entries must be numbers: {exc}") from exc
    if society.ndim != 1 or interbank.ndim != 2:
        raise ParseError("'society' must be a vector and 'interbank' a square matrix")
    n = society.shape[0]
    if interbank.shape != (n, n):
        raise ParseError(
            f"'interbank' must be {n} x {n} to match 'society', got {interbank.shape}"
        )
    names = doc.get("banks", ())
    if names and len(names) != n:
        raise ParseError("'banks' length does not match 'society'")
    raw = np.hstack([society[:, None], interbank])
    return validate_network(raw, names=tuple(names))


def save_network(net: FinancialNetwork, path) -> None:
    """Write a network back out in the JSON schema accepted by load_network."""
    doc = {
        "banks": list(net.names),
        "society": net.obligations[:, 0].tolist(),
        "interbank": net.obligations[:, 1:].tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def self_preferential_bound(net: FinancialNetwork) -> float:
    """Upper bound on the self-preferential constant of the clearing decomposition.

    Equals the largest interbank share max_i (1 - pi_i0), always < 1 because
    society obligations are strictly positive.
    """
    return float(np.max(1.0 - net.pi_society))
