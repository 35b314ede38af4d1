"""Two-coordinate dual QP solver with max-violating-pair selection.

Solves the box- and equality-constrained quadratic program shared by the
soft-margin SVM dual and the epsilon-insensitive SVR dual:

    minimize    0.5 * p' (diag(z) Kt diag(z)) p  +  lin' p
    subject to  z' p = 0,   0 <= p[t] <= c  for all t

where z[t] is +1 or -1 and Kt is a positive semidefinite kernel matrix
supplied row by row.  Each iteration picks the pair of coordinates that
most violates the KKT conditions and solves the two-variable subproblem
analytically, which keeps z' p = 0 exact and never decreases the dual
objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# floor for the curvature of a two-variable subproblem (duplicate points
# give eta == 0 for PSD kernels)
_ETA_FLOOR = 1e-12


class SmoNonConvergence(RuntimeError):
    """Raised when the pair-update budget runs out before the gap closes."""

    def __init__(self, gap: float, tol: float, iterations: int):
        super().__init__(
            f"SMO did not converge: KKT gap {gap:.3e} > tol {tol:.3e} "
            f"after {iterations} pair updates"
        )
        self.gap = gap
        self.tol = tol
        self.iterations = iterations


@dataclass
class SmoResult:
    p: np.ndarray               # optimal box variables
    bias: float                 # offset recovered from the final gap midpoint
    gap: float                  # final max KKT violation
    iterations: int
    objective: float            # dual objective (maximization form)
    objective_history: np.ndarray = field(repr=False, default=None)


def solve(
    row: Callable[[int], np.ndarray],
    diag: np.ndarray,
    z: np.ndarray,
    lin: np.ndarray,
    c: float,
    tol: float,
    max_iter: int,
    record_history: bool = False,
    validate: bool = False,
) -> SmoResult:
    """Run SMO to a KKT gap of at most ``tol``.

    ``row(t)`` must return the t-th row of the kernel matrix Kt as a dense
    vector.  ``diag`` is its diagonal.  ``record_history`` keeps the dual
    objective after every pair update (for monotonicity checks);
    ``validate`` re-checks the constraints after every update and is meant
    for tests only.
    """
    n = len(z)
    z = np.asarray(z, dtype=float)
    lin = np.asarray(lin, dtype=float)
    diag = np.asarray(diag, dtype=float)
    if not np.all(np.abs(z) == 1.0):
        raise ValueError("z entries must be +1 or -1")
    if c <= 0:
        raise ValueError("box constraint c must be positive")

    p = np.zeros(n)
    grad = lin.copy()               # gradient of the minimization objective
    crit = -z * grad                # KKT criterion, large on violators
    objective = 0.0                 # minimization objective value
    history: list[float] = []
    bound_eps = 1e-12 * max(1.0, c)

    neg_inf = -np.inf
    pos_inf = np.inf
    it = 0
    while True:
        at_upper = p >= c - bound_eps
        at_lower = p <= bound_eps
        up_mask = ((z > 0) & ~at_upper) | ((z < 0) & ~at_lower)
        low_mask = ((z > 0) & ~at_lower) | ((z < 0) & ~at_upper)
        if not up_mask.any() or not low_mask.any():
            gap = 0.0
            bias = 0.0
            break
        up_crit = np.where(up_mask, crit, neg_inf)
        low_crit = np.where(low_mask, crit, pos_inf)
        i = int(np.argmax(up_crit))
        j = int(np.argmin(low_crit))
        m_val = up_crit[i]
        M_val = low_crit[j]
        gap = m_val - M_val
        if gap <= tol:
            bias = 0.5 * (m_val + M_val)
            break
        if it >= max_iter:
            raise SmoNonConvergence(gap, tol, it)

        row_i = row(i)
        row_j = row(j)
        eta = diag[i] + diag[j] - 2.0 * row_i[j]
        delta = gap / max(eta, _ETA_FLOOR)
        room_i = (c - p[i]) if z[i] > 0 else p[i]
        room_j = p[j] if z[j] > 0 else (c - p[j])
        delta = min(delta, room_i, room_j)

        p[i] += z[i] * delta
        p[j] -= z[j] * delta
        # snap to the box; drift is ulp-level and keeps |z'p| <= 1e-8
        if p[i] > c - bound_eps:
            p[i] = c
        elif p[i] < bound_eps:
            p[i] = 0.0
        if p[j] > c - bound_eps:
            p[j] = c
        elif p[j] < bound_eps:
            p[j] = 0.0

        objective += -delta * gap + 0.5 * delta * delta * eta
        grad += (z * delta) * (row_i - row_j)
        crit = -z * grad
        it += 1
        if record_history:
            history.append(-objective)
        if validate:
            assert abs(float(z @ p)) <= 1e-8, "equality constraint drifted"
            assert p.min() >= -1e-9 and p.max() <= c + 1e-9, "box violated"

    return SmoResult(
        p=p,
        bias=float(bias),
        gap=float(gap),
        iterations=it,
        objective=float(-objective),
        objective_history=np.array(history) if record_history else None,
    )


def dual_objective(K: np.ndarray, z: np.ndarray, lin: np.ndarray, p: np.ndarray) -> float:
    """Dual objective (maximization form) at p, from the dense kernel matrix."""
    zp = z * p
    return float(-(0.5 * zp @ K @ zp + lin @ p))
