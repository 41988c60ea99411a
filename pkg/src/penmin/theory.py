"""Exact theoretical quantities: penalties, expectations, phase-transition
constants, deviation bounds, and the oracle.

These are the ground-truth formulas the Monte-Carlo harness verifies
against.  All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._validate import as_float_vector, as_square_matrix
from .models import ModelCollection, ProjectionModel, SignalSpec, bias, bias_profile


def _signal(f, n: int) -> np.ndarray:
    if isinstance(f, SignalSpec):
        f = f.values
    return as_float_vector(f, n, "F")


def trace_sigma_pi(model: ProjectionModel, sigma: np.ndarray) -> float:
    """tr(Sigma @ Pi) without materializing the projector."""
    if model.dim == 0:
        return 0.0
    return float(np.sum(model.basis * (sigma @ model.basis)))


def penalties(model: ProjectionModel, sigma) -> tuple[float, float]:
    """(pen_min, pen_opt) = (tr(Sigma Pi)/n, 2 tr(Sigma Pi)/n).

    The factor 2 between the optimal and the minimal penalty holds for any
    noise covariance.
    """
    sigma = as_square_matrix(sigma, model.n, "Sigma")
    pen_min = trace_sigma_pi(model, sigma) / model.n
    return pen_min, 2.0 * pen_min


def expected_risks(model: ProjectionModel, f, sigma) -> tuple[float, float]:
    """Exact expectations of the risk and the empirical risk.

    E[||F_hat - F||^2 / n] = bias + tr(Sigma Pi)/n and
    E[||F_hat - Y||^2 / n] = bias + tr(Sigma)/n - tr(Sigma Pi)/n.
    """
    sigma = as_square_matrix(sigma, model.n, "Sigma")
    b = bias(model, _signal(f, model.n))
    t = trace_sigma_pi(model, sigma) / model.n
    t_full = float(np.trace(sigma)) / model.n
    return b + t, b + t_full - t


@dataclass(frozen=True)
class TheoremConstants:
    """Constants of the phase-transition bands for one configuration.

    ``prob_bound`` is the failure-probability bound 4 * card(M) * n^-gamma;
    the bands are C <= (1 - eta_minus) * sigma2 (huge selected dimension)
    and C >= (1 + eta_plus) * sigma2 (small selected dimension).
    """

    b: float
    b_prime: float
    m1: str
    d_m1: int
    eta_minus: float
    eta_plus: float
    gamma: float
    n: int
    n_models: int
    prob_bound: float

    def __post_init__(self):
        if self.b > self.b_prime:
            raise ValueError("B must be <= B'")
        if self.eta_minus < 0 or self.eta_plus < 0:
            raise ValueError("eta bounds must be >= 0")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        if math.isinf(d["b_prime"]):
            d["b_prime"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TheoremConstants":
        d = dict(d)
        if d["b_prime"] == "inf":
            d["b_prime"] = math.inf
        return cls(**d)


def constants_from_profile(
    dims: Mapping[str, int],
    biases: Mapping[str, float],
    n: int,
    sigma2: float,
    gamma: float,
) -> TheoremConstants:
    """Theorem constants from a per-model bias profile.

    Requires a model m2 with dim <= dim(m1)/20 (otherwise the hypothesis of
    the phase-transition theorem is unsatisfiable and a ValueError is
    raised) and dim(m1) > 0.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    b, m1, b_prime = bias_profile(dims, biases)
    d1 = dims[m1]
    if math.isinf(b_prime):
        raise ValueError("theorem hypothesis D_{m2} <= D_{m1}/20 unsatisfiable")
    if d1 == 0:
        raise ValueError("degenerate profile: the bias-minimizing model has dimension 0")
    sigma = math.sqrt(sigma2)
    root = math.sqrt(gamma * math.log(n) / n)
    eta_minus = (n / d1) * (57.0 * sigma * math.sqrt(b) + 41.0 * sigma2) * root / sigma2
    eta_plus = (
        (n / d1)
        * (20.0 * (b_prime - b) + (114.0 * sigma * math.sqrt(b_prime) + 82.0 * sigma2) * root)
        / sigma2
    )
    card = len(dims)
    return TheoremConstants(
        b=b,
        b_prime=b_prime,
        m1=m1,
        d_m1=d1,
        eta_minus=eta_minus,
        eta_plus=eta_plus,
        gamma=gamma,
        n=n,
        n_models=card,
        prob_bound=4.0 * card * n ** (-gamma),
    )


def theorem_constants(
    collection: ModelCollection, f, sigma2: float, gamma: float
) -> TheoremConstants:
    """Theorem constants for a collection and signal (iid noise sigma2*I)."""
    fv = _signal(f, collection.n)
    biases = {m.id: bias(m, fv) for m in collection}
    return constants_from_profile(collection.dims(), biases, collection.n, sigma2, gamma)


def proof_thresholds(
    constants: TheoremConstants, sigma2: float, x: float
) -> tuple[float, float]:
    """The two proof-level penalty thresholds at deviation level x >= 0.

    ``c_tilde_1(x) <= sigma2 <= c_tilde_2(x)``: below the first the selected
    dimension is >= 9 D_m1 / 10, above the second it is <= D_m1 / 10, each
    with probability >= 1 - prob_bound once x = gamma * log(n).
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")
    if math.isinf(constants.b_prime):
        raise ValueError("theorem hypothesis D_{m2} <= D_{m1}/20 unsatisfiable")
    n, d1 = constants.n, constants.d_m1
    b, bp = constants.b, constants.b_prime
    sigma = math.sqrt(sigma2)
    rt = math.sqrt(x / n)
    rt2 = math.sqrt(2.0 * x / n)
    c1 = sigma2 - (20.0 * n / d1) * (
        2.0 * sigma2 * rt + 3.0 * sigma2 * x / n + 2.0 * sigma * rt2 * math.sqrt(b)
    )
    c2 = sigma2 + (20.0 * n / d1) * (
        (bp - b)
        + 2.0 * sigma * rt2 * (math.sqrt(b) + math.sqrt(bp))
        + 2.0 * sigma2 * (2.0 * rt + 3.0 * x / n)
    )
    return c1, c2


def crit_c(model: ProjectionModel, f, sigma2: float, c: float) -> float:
    """Deterministic criterion ``bias + (C - sigma2) * D / n``."""
    if c < 0:
        raise ValueError("C must be >= 0")
    return bias(model, _signal(f, model.n)) + (c - sigma2) * model.dim / model.n


def deviation_bound(model: ProjectionModel, f, sigma2: float, x: float) -> float:
    """High-probability bound on |G_C(m) - crit_C(m)| at deviation level x.

    Equals ``2 sigma2 (sqrt(x/n) + x/n) + (2 sigma sqrt(2x) / n) * ||(I - Pi) F||``;
    independent of C.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    fv = _signal(f, model.n)
    n = model.n
    sigma = math.sqrt(sigma2)
    resid_norm = math.sqrt(bias(model, fv) * n)
    return 2.0 * sigma2 * (math.sqrt(x / n) + x / n) + 2.0 * sigma * math.sqrt(2.0 * x) / n * resid_norm


def true_risk(model: ProjectionModel, f, y) -> float:
    """Realized risk ``||Pi y - F||^2 / n`` of the fitted model."""
    fv = _signal(f, model.n)
    y = as_float_vector(y, model.n, "y")
    diff = model.basis @ (model.basis.T @ y) - fv
    return float(diff @ diff) / model.n


def oracle_model(collection: ModelCollection, f, y) -> str:
    """The model minimizing the realized risk (ties: smaller dim, then id).

    Risks within 1e-10 of the minimum (relative to the largest risk) count
    as tied, so exact-arithmetic ties survive floating-point dust.
    """
    fv = _signal(f, collection.n)
    y = as_float_vector(y, collection.n, "y")
    risks = {m.id: true_risk(m, fv, y) for m in collection}
    r_min = min(risks.values())
    tol = 1e-10 * max(max(risks.values()), 1e-300)
    dims = collection.dims()
    tied = [mid for mid, r in risks.items() if r <= r_min + tol]
    return min(tied, key=lambda mid: (dims[mid], mid))


def g_c_recentered(emp_risk: float, c: float, weight: float, noise_sq_norm: float, n: int) -> float:
    """Recentered penalized criterion used in the deviation check.

    ``G_C(m) = emp_risk(m) + C * w_m - ||Y - F||^2 / n``; the subtracted
    model-independent part makes E[G_C(m)] = crit_C(m) for the dimension
    shape under iid noise.
    """
    return emp_risk + c * weight - noise_sq_norm / n
