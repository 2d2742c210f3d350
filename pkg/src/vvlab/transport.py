"""Wasserstein distances between discrete measures on the torus.

Three routes are provided and cross-checked against each other:

* an exact linear-programming solver (HiGHS) for small supports,
* a brute-force assignment enumeration used as the test oracle,
* a log-domain Sinkhorn iteration with epsilon-scaling and debiasing for
  larger supports.

Signed fields enter through :func:`split_signed`; measures are unnormalized
(arbitrary equal total mass), matching the mass-factor in the W1 <= sqrt(m) W2
ordering that the tests exercise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.special import logsumexp

from vvlab.fields import ScalarField2D, hm1_norm, norms, torus_delta

MASS_RTOL = 1e-8
MASS_FLOOR_RTOL = 1e-12


class TransportError(ValueError):
    """Invalid transport problem (mass mismatch, negative weights, ...)."""


@dataclass
class DiscreteMeasure:
    """Weighted point cloud on the periodic square of side ``length``."""

    points: np.ndarray  # (m, 2)
    weights: np.ndarray  # (m,)
    length: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.points.shape[0] != self.weights.shape[0]:
            raise TransportError("points and weights must have equal length")
        if np.any(self.weights < 0):
            raise TransportError("weights must be nonnegative")
        self.points = np.mod(self.points, self.length)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.weights)

    def translated(self, shift) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points + np.asarray(shift), self.weights.copy(), self.length)

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points.copy(), c * self.weights, self.length)


@dataclass
class TransportPlan:
    pairs: list  # (source index, target index, mass)
    cost: float
    order: int

    def marginals(self, m: int, k: int):
        row = np.zeros(m)
        col = np.zeros(k)
        for i, j, mass in self.pairs:
            row[i] += mass
            col[j] += mass
        return row, col


@dataclass
class SignedSplit:
    plus: ScalarField2D
    minus: ScalarField2D


def split_signed(omega: ScalarField2D) -> SignedSplit:
    """Pointwise positive/negative parts; plus - minus reproduces the field."""
    v = omega.values
    return SignedSplit(
        plus=ScalarField2D(omega.grid, np.maximum(v, 0.0)),
        minus=ScalarField2D(omega.grid, np.maximum(-v, 0.0)),
    )


def field_to_measure(f: ScalarField2D, max_support: int = 4096) -> DiscreteMeasure:
    """One atom per grid cell with weight h^2 f; prune tiny cells, cap the support.

    Cells below the mass floor (1e-12 of the total) are dropped; if more atoms
    remain than ``max_support``, only the heaviest are kept and the pruned mass
    is redistributed proportionally so the total mass is preserved.
    """
    if np.any(f.values < 0):
        raise TransportError(
            "field_to_measure requires a nonnegative field; use split_signed first"
        )
    h = f.grid.spacing
    w = (h * h) * f.values.ravel()
    total = float(w.sum())
    if total == 0:
        return DiscreteMeasure(np.zeros((0, 2)), np.zeros(0), f.grid.length)
    x1, x2 = f.grid.coords()
    pts = np.stack([x1.ravel(), x2.ravel()], axis=-1)
    keep = w > MASS_FLOOR_RTOL * total
    w, pts = w[keep], pts[keep]
    if len(w) > max_support:
        order = np.argsort(w)[::-1][:max_support]
        w, pts = w[order], pts[order]
    w *= total / w.sum()
    return DiscreteMeasure(pts, w, f.grid.length)


def _check_mass_equality(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    m = max(mu.total_mass, nu.total_mass)
    if abs(mu.total_mass - nu.total_mass) > MASS_RTOL * max(m, 1e-300):
        raise TransportError(
            f"measures must have the same total mass "
            f"({mu.total_mass:.12g} vs {nu.total_mass:.12g})"
        )
    if mu.length != nu.length:
        raise TransportError("measures live on tori of different side lengths")


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int) -> np.ndarray:
    """Pairwise torus distances to the power p."""
    dx = torus_delta(mu.points[:, None, 0], nu.points[None, :, 0], mu.length)
    dy = torus_delta(mu.points[:, None, 1], nu.points[None, :, 1], mu.length)
    d = np.sqrt(dx * dx + dy * dy)
    return d if p == 1 else d ** p


def _check_order(p: int) -> None:
    if p not in (1, 2):
        raise TransportError(f"only p in {{1, 2}} is supported, got p={p}")


def wasserstein_exact(
    mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2
) -> tuple[float, TransportPlan]:
    """Exact optimal transport by linear programming on the full bipartite graph."""
    _check_order(p)
    _check_mass_equality(mu, nu)
    m, k = len(mu), len(nu)
    if m + k > 4096:
        raise TransportError(
            f"combined support {m + k} exceeds the exact-solver limit 4096; "
            "use wasserstein_sinkhorn"
        )
    if m == 0 or k == 0:
        return 0.0, TransportPlan(pairs=[], cost=0.0, order=p)
    C = cost_matrix(mu, nu, p)
    # row marginals (m) plus column marginals (k, last dropped as redundant)
    rows_i = np.repeat(np.arange(m), k)
    cols_j = np.tile(np.arange(k), m)
    var = np.arange(m * k)
    a_row = sp.coo_matrix((np.ones(m * k), (rows_i, var)), shape=(m, m * k))
    sel = cols_j < k - 1
    a_col = sp.coo_matrix(
        (np.ones(sel.sum()), (cols_j[sel], var[sel])), shape=(k - 1, m * k)
    )
    a_eq = sp.vstack([a_row, a_col]).tocsr()
    # normalize to unit mass: tiny atom weights otherwise trip HiGHS presolve
    mass = mu.total_mass
    b_eq = np.concatenate([mu.weights, nu.weights[:-1]]) / mass
    res = linprog(C.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        res = linprog(
            C.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs",
            options={"presolve": False},
        )
    if not res.success:
        raise TransportError(f"exact transport LP failed: {res.message}")
    x = mass * res.x.reshape(m, k)
    cost = float(np.sum(x * C))
    nz = np.argwhere(x > 1e-14 * max(mu.total_mass, 1e-300))
    pairs = [(int(i), int(j), float(x[i, j])) for i, j in nz]
    dist = cost ** (1.0 / p)
    return dist, TransportPlan(pairs=pairs, cost=cost, order=p)


def wasserstein_brute_force(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> float:
    """Exhaustive assignment enumeration; equal-weight equal-size instances only.

    Independent oracle for :func:`wasserstein_exact` on <= 8 atoms.
    """
    _check_order(p)
    _check_mass_equality(mu, nu)
    m = len(mu)
    if m != len(nu) or m > 8:
        raise TransportError("brute force handles equal-size instances with <= 8 atoms")
    if m == 0:
        return 0.0
    w0 = mu.weights[0]
    if not (np.allclose(mu.weights, w0) and np.allclose(nu.weights, w0)):
        raise TransportError("brute force requires equal weights")
    C = cost_matrix(mu, nu, p)
    idx = np.arange(m)
    best = min(float(C[idx, perm].sum()) for perm in itertools.permutations(range(m)))
    return (w0 * best) ** (1.0 / p)


def _sinkhorn_potentials(log_a, log_b, C, eps, f, g, max_iter, tol, mass):
    """Balanced log-domain Sinkhorn at fixed eps; returns (f, g, violation)."""
    viol = math.inf
    for _ in range(max_iter):
        f = eps * log_a - eps * logsumexp((g[None, :] - C) / eps, axis=1)
        g = eps * log_b - eps * logsumexp((f[:, None] - C) / eps, axis=0)
        # row-marginal violation of the implied plan (columns are exact)
        log_pi = (f[:, None] + g[None, :] - C) / eps
        row = np.exp(logsumexp(log_pi, axis=1))
        viol = float(np.abs(row - np.exp(log_a)).sum()) / mass
        if viol < tol:
            break
    return f, g, viol


def _sinkhorn_cost(mu, nu, C, eps_target, max_iter, tol):
    """Primal transport cost <pi, C> with an epsilon-scaling schedule."""
    mass = mu.total_mass
    with np.errstate(divide="ignore"):
        log_a = np.log(mu.weights)
        log_b = np.log(nu.weights)
    f = np.zeros(len(mu))
    g = np.zeros(len(nu))
    eps = max(float(C.max()), eps_target)
    while True:
        f, g, viol = _sinkhorn_potentials(log_a, log_b, C, eps, f, g, max_iter, tol, mass)
        if eps <= eps_target:
            break
        eps = max(eps * 0.5, eps_target)
    if viol >= tol:
        raise TransportError(
            f"Sinkhorn did not converge: marginal violation {viol:.3e} >= tol {tol:.1e} "
            f"after {max_iter} iterations at eps={eps:.3e}"
        )
    log_pi = (f[:, None] + g[None, :] - C) / eps
    pi = np.exp(log_pi)
    return float(np.sum(pi * C))


def wasserstein_sinkhorn(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: int = 2,
    epsilon: float = 1e-3,
    max_iter: int = 20000,
    tol: float = 1e-4,
) -> float:
    """Debiased entropic transport distance (Sinkhorn divergence form).

    The debiasing OT(mu,nu) - (OT(mu,mu) + OT(nu,nu))/2 makes the distance of a
    measure to itself vanish identically. epsilon is relative to the squared
    domain diameter scale via the cost maximum handled by the scaling schedule.
    """
    _check_order(p)
    if epsilon <= 0:
        raise TransportError("epsilon must be > 0")
    _check_mass_equality(mu, nu)
    if len(mu) == 0 or len(nu) == 0:
        return 0.0
    C = cost_matrix(mu, nu, p)
    cost_ab = _sinkhorn_cost(mu, nu, C, epsilon, max_iter, tol)
    cost_aa = _sinkhorn_cost(mu, mu, cost_matrix(mu, mu, p), epsilon, max_iter, tol)
    cost_bb = _sinkhorn_cost(nu, nu, cost_matrix(nu, nu, p), epsilon, max_iter, tol)
    div = max(cost_ab - 0.5 * (cost_aa + cost_bb), 0.0)
    return div ** (1.0 / p)


def w1_dual(mu: DiscreteMeasure, nu: DiscreteMeasure) -> tuple[float, np.ndarray]:
    """Kantorovich dual: maximize sum (mu - nu) zeta over 1-Lipschitz zeta.

    The potential lives on the merged support; the Lipschitz constraint is
    imposed on every support pair, which certifies the returned value as a
    lower bound on W1. Returns (bound, potential on merged support).
    """
    _check_mass_equality(mu, nu)
    pts = np.vstack([mu.points, nu.points])
    coef = np.concatenate([mu.weights, -nu.weights])
    m = len(pts)
    if m == 0:
        return 0.0, np.zeros(0)
    merged = DiscreteMeasure(pts, np.abs(coef), mu.length)
    D = cost_matrix(merged, merged, 1)
    ii, jj = np.nonzero(~np.eye(m, dtype=bool))
    n_con = len(ii)
    data = np.concatenate([np.ones(n_con), -np.ones(n_con)])
    rows = np.concatenate([np.arange(n_con), np.arange(n_con)])
    cols = np.concatenate([ii, jj])
    a_ub = sp.coo_matrix((data, (rows, cols)), shape=(n_con, m)).tocsr()
    b_ub = D[ii, jj]
    # gauge fix: zeta is defined up to a constant
    a_eq = sp.coo_matrix((np.ones(1), (np.zeros(1, int), np.zeros(1, int))), shape=(1, m))
    res = linprog(
        -coef, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[0.0],
        bounds=(None, None), method="highs",
    )
    if not res.success:
        raise TransportError(f"dual LP failed: {res.message}")
    zeta = res.x
    lip = np.max(np.abs(zeta[:, None] - zeta[None, :]) - D) if m > 1 else 0.0
    if lip > 1e-7:
        raise TransportError(f"dual potential violates the Lipschitz bound by {lip:.2e}")
    return float(coef @ zeta), zeta


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    slack: float  # rhs - lhs; negative means violation
    ok: bool


def check_order_w1_w2(mu: DiscreteMeasure, nu: DiscreteMeasure, slack_tol: float = 1e-8):
    """W1 <= mass^(1/2) W2 on exact solver outputs (Jensen ordering)."""
    w1, _ = wasserstein_exact(mu, nu, p=1)
    w2, _ = wasserstein_exact(mu, nu, p=2)
    rhs = math.sqrt(mu.total_mass) * w2
    return InequalityReport(lhs=w1, rhs=rhs, slack=rhs - w1, ok=(rhs - w1) >= -slack_tol)


def check_hm1_domination(
    f: ScalarField2D,
    g: ScalarField2D,
    rel_tol: float = 0.05,
    max_support: int = 2000,
    epsilon: float = 1e-4,
):
    """||f - g||_{H^-1} <= max(||f||_inf, ||g||_inf)^(1/2) W2(f, g) through the
    full discrete pipeline (field -> measure -> transport)."""
    if np.any(f.values < 0) or np.any(g.values < 0):
        raise TransportError("domination check requires nonnegative fields")
    diff = ScalarField2D(f.grid, f.values - g.values)
    lhs = hm1_norm(diff)
    mu = field_to_measure(f, max_support=max_support)
    nu = field_to_measure(g, max_support=max_support)
    if len(mu) + len(nu) <= 600:
        w2, _ = wasserstein_exact(mu, nu, p=2)
    else:
        w2 = wasserstein_sinkhorn(mu, nu, p=2, epsilon=epsilon)
    rhs = math.sqrt(max(norms(f).linf, norms(g).linf)) * w2
    ok = lhs <= rhs * (1.0 + rel_tol) + 1e-12
    return InequalityReport(lhs=lhs, rhs=rhs, slack=rhs - lhs, ok=ok)
