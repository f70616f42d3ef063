"""Augmented-Lagrangian solvers for the data-driven QP.

The outer loop maintains a multiplier estimate and an additively growing
penalty; each inner subproblem is an unconstrained convex quadratic,
minimized either by limited-memory BFGS with exact line search (the main
method) or by steepest descent (baseline).  A MINRES run on the symmetric
KKT system and a dense pseudo-inverse oracle complete the lineup.
"""

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .problem import (
    AlState,
    DeepcProblem,
    al_gradient_parts,
    al_hessian_parts,
    kkt_residual,
    weighted_blocks,
)
from .spectral import dense_hankel, forward_blocks, reverse_blocks

_CURVATURE_EPS = 1e-14
_REFRESH_INTERVAL = 128  # recompute the gradient exactly every this many steps

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERATIONS = "max-iterations"
STATUS_DEGENERATE = "degenerate-curvature"

DENSE_COL_GUARD = 2000


class DegenerateCurvatureError(RuntimeError):
    """Search direction left the positive-curvature subspace."""


@dataclass(frozen=True)
class AlConfig:
    """Outer-loop parameters.

    outer_tol of None resolves to 1e-6 * (1 + ||x0||) at solve time.
    """

    mu0: float = 1.0
    mu_delta: float = 10.0
    inner_tol: float = 1e-7
    outer_tol: float | None = None
    max_outer: int = 30
    lambda0: np.ndarray | None = None
    z0: np.ndarray | None = None

    def __post_init__(self):
        if self.mu0 <= 0 or self.mu_delta <= 0 or self.inner_tol <= 0:
            raise ValueError("mu0, mu_delta, and inner_tol must be positive")
        if self.outer_tol is not None and self.outer_tol <= 0:
            raise ValueError("outer_tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


@dataclass(frozen=True)
class LbfgsConfig:
    """Inner-loop parameters: memory window, gradient tolerance, iteration cap."""

    window: int = 30
    grad_tol: float = 1e-7
    max_inner: int = 1000

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_inner < 1:
            raise ValueError("max_inner must be at least 1")


class LbfgsMemory:
    """Ring buffer of curvature pairs (s, y, 1/(s'y)); rejects s'y <= 0."""

    def __init__(self, window: int):
        self.pairs = deque(maxlen=window)

    def __len__(self) -> int:
        return len(self.pairs)

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Stores the pair unless its curvature is nonpositive within round-off."""
        sy = float(s @ y)
        if sy <= _CURVATURE_EPS * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        self.pairs.append((s, y, 1.0 / sy))
        return True


def two_loop_apply(mem: LbfgsMemory, g: np.ndarray) -> np.ndarray:
    """Search direction -H g from the stored pairs, never materializing H.

    The initial inverse-Hessian seed is gamma * I with
    gamma = s'y / ||y||^2 of the most recent pair (1 with empty memory).
    """
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(mem.pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if mem.pairs:
        _, y_last, rho_last = mem.pairs[-1]
        q *= 1.0 / (rho_last * float(y_last @ y_last))
    for (s, y, rho), a in zip(mem.pairs, reversed(alphas)):
        q += (a - rho * float(y @ q)) * s
    return -q


def exact_line_search(g: np.ndarray, p: np.ndarray, hess_matvec, hess_p=None) -> float:
    """Minimizing step length for a quadratic along p: -g'p / p'(Hess p).

    One Hessian product per call; callers that already hold Hess p pass it
    to avoid recomputing.

    Raises:
        DegenerateCurvatureError: if the curvature p'(Hess p) vanishes within
            round-off while the direction still has slope.
    """
    if hess_p is None:
        hess_p = hess_matvec(p)
    den = float(p @ hess_p)
    p_norm = np.linalg.norm(p)
    tol_curv = _CURVATURE_EPS * p_norm * max(p_norm, np.linalg.norm(hess_p))
    if den <= tol_curv:
        raise DegenerateCurvatureError(
            f"curvature {den:.3e} below tolerance {tol_curv:.3e} "
            f"with slope {float(g @ p):.3e}"
        )
    return -float(g @ p) / den


@dataclass
class InnerReport:
    iterations: int
    grad_norm: float
    status: str


@dataclass
class IterationRecord:
    outer: int
    inner: int
    residual_norm: float
    grad_norm: float
    alpha: float
    elapsed_s: float


@dataclass
class SolveReport:
    """Outcome of one solver run.

    records hold one row per recorded iterate; totals cover the whole run.
    """

    records: list = field(default_factory=list)
    total_inner: int = 0
    total_outer: int = 0
    total_matvecs: int = 0
    elapsed_s: float = 0.0
    z: np.ndarray | None = None
    multiplier: np.ndarray | None = None
    residual_norm: float = float("inf")
    status: str = STATUS_MAX_ITERATIONS
    config: dict = field(default_factory=dict)


def _minimize_quadratic(
    grad_parts,
    hess_parts,
    z,
    grad_tol: float,
    max_inner: int,
    window: int,
    use_memory: bool,
    on_iterate=None,
):
    """Shared inner engine for lBFGS and steepest descent on a quadratic.

    grad_parts(z) -> (gradient, aux); hess_parts(p) -> (Hessian product, aux).
    The gradient is updated incrementally (it is affine) and refreshed
    periodically against round-off drift; aux vectors (here: P z) ride along
    with the same linear updates.  on_iterate(j, z, g, aux, alpha) is called
    at the start point and after every step.
    """
    g, aux = grad_parts(z)
    mem = LbfgsMemory(window) if use_memory else None
    status = STATUS_MAX_ITERATIONS
    j = 0
    if on_iterate is not None:
        on_iterate(j, z, g, aux, 0.0)
    while True:
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= grad_tol:
            status = STATUS_CONVERGED
            break
        if j >= max_inner:
            break
        p = two_loop_apply(mem, g) if use_memory else -g
        hess_p, aux_p = hess_parts(p)
        try:
            alpha = exact_line_search(g, p, None, hess_p=hess_p)
        except DegenerateCurvatureError:
            status = STATUS_DEGENERATE
            break
        z = z + alpha * p
        if use_memory:
            mem.push(alpha * p, alpha * hess_p)
        j += 1
        if j % _REFRESH_INTERVAL == 0:
            g, aux = grad_parts(z)
        else:
            g = g + alpha * hess_p
            if aux is not None:
                aux = aux + alpha * aux_p
        if on_iterate is not None:
            on_iterate(j, z, g, aux, alpha)
    return z, g, aux, InnerReport(iterations=j, grad_norm=float(np.linalg.norm(g)), status=status)


def lbfgs_minimize(grad_oracle, hess_matvec_oracle, z0, lb: LbfgsConfig):
    """Limited-memory BFGS with exact line search for a convex quadratic.

    Args:
        grad_oracle: z -> gradient (affine in z).
        hess_matvec_oracle: v -> Hessian product (constant Hessian).
        z0: start vector.
        lb: window / tolerance / iteration cap.

    Returns:
        (minimizer, InnerReport).
    """
    z, _, _, report = _minimize_quadratic(
        lambda z_: (grad_oracle(z_), None),
        lambda p_: (hess_matvec_oracle(p_), None),
        np.asarray(z0, dtype=float),
        lb.grad_tol,
        lb.max_inner,
        lb.window,
        use_memory=True,
    )
    return z, report


def _outer_loop(p: DeepcProblem, al: AlConfig, inner_runner, record: bool, config_echo: dict):
    """Augmented Lagrangian outer iteration shared by the lBFGS and GD solvers.

    inner_runner(z, lam, mu, on_iterate) -> (z, g, pz, InnerReport).
    """
    counter = {"matvecs": 0}
    t_start = time.perf_counter()
    z = np.zeros(p.col_dim) if al.z0 is None else np.asarray(al.z0, dtype=float).copy()
    lam = np.zeros(p.n) if al.lambda0 is None else np.asarray(al.lambda0, dtype=float).copy()
    outer_tol = al.outer_tol
    if outer_tol is None:
        outer_tol = 1e-6 * (1.0 + float(np.linalg.norm(p.initial_state)))
    report = SolveReport(config=config_echo | {"outer_tol": outer_tol})
    mu = al.mu0
    rnorm = float("inf")
    for k in range(al.max_outer):
        if record:

            def on_iterate(j, z_j, g_j, pz_j, alpha, _k=k):
                # KKT residual at the iterate's first-order multiplier
                # estimate lam - mu (P z - x0): with that estimate the
                # stationarity block equals the inner gradient, so the row
                # costs no extra operator products.
                feas = float(np.linalg.norm(pz_j - p.initial_state))
                grad_norm = float(np.linalg.norm(g_j))
                report.records.append(
                    IterationRecord(
                        outer=_k,
                        inner=j,
                        residual_norm=float(np.hypot(grad_norm, feas)),
                        grad_norm=grad_norm,
                        alpha=alpha,
                        elapsed_s=time.perf_counter() - t_start,
                    )
                )

        else:
            on_iterate = None
        z, g, pz, inner = inner_runner(z, lam, mu, on_iterate)
        report.total_inner += inner.iterations
        report.total_outer = k + 1
        lam = lam - mu * (pz - p.initial_state)
        _, rnorm = kkt_residual(p, z, lam)
        counter["matvecs"] += 2
        if not record:
            report.records.append(
                IterationRecord(
                    outer=k,
                    inner=inner.iterations,
                    residual_norm=rnorm,
                    grad_norm=inner.grad_norm,
                    alpha=float("nan"),
                    elapsed_s=time.perf_counter() - t_start,
                )
            )
        if rnorm <= outer_tol:
            report.status = STATUS_CONVERGED
            break
        if inner.status == STATUS_DEGENERATE:
            report.status = STATUS_DEGENERATE
            break
        mu += al.mu_delta
    report.z = z
    report.multiplier = lam
    report.residual_norm = rnorm
    report.elapsed_s = time.perf_counter() - t_start
    report.total_matvecs += counter["matvecs"]
    return report


def _counted_oracles(p: DeepcProblem, counter: dict):
    def grad_parts_factory(lam, mu):
        state = AlState(multiplier=lam, penalty=mu)

        def grad_parts(z):
            counter["matvecs"] += 2
            return al_gradient_parts(p, z, state)

        return grad_parts

    def hess_parts_factory(mu):
        def hess_parts(v):
            counter["matvecs"] += 2
            return al_hessian_parts(p, v, mu)

        return hess_parts

    return grad_parts_factory, hess_parts_factory


def solve_al_lbfgs(
    p: DeepcProblem, al: AlConfig, lb: LbfgsConfig, record: bool = True
) -> SolveReport:
    """Augmented Lagrangian with lBFGS inner solves; the main method.

    Each outer iteration minimizes the current augmented Lagrangian to the
    inner gradient tolerance (warm-started at the previous iterate), updates
    the multiplier by lam <- lam - mu (P z - x0), and grows the penalty
    additively.  Terminates when the KKT residual norm reaches the outer
    tolerance, the outer budget runs out, or curvature degenerates.
    """
    counter = {"matvecs": 0}
    grad_factory, hess_factory = _counted_oracles(p, counter)

    def inner_runner(z, lam, mu, on_iterate):
        z, g, pz, inner = _minimize_quadratic(
            grad_factory(lam, mu),
            hess_factory(mu),
            z,
            al.inner_tol,
            lb.max_inner,
            lb.window,
            use_memory=True,
            on_iterate=on_iterate,
        )
        return z, g, pz, inner

    echo = {
        "solver": "al-lbfgs",
        "mu0": al.mu0,
        "mu_delta": al.mu_delta,
        "inner_tol": al.inner_tol,
        "max_outer": al.max_outer,
        "window": lb.window,
        "max_inner": lb.max_inner,
    }
    report = _outer_loop(p, al, inner_runner, record, echo)
    report.total_matvecs += counter["matvecs"]
    return report


def solve_al_gd(p: DeepcProblem, al: AlConfig, max_inner: int, record: bool = True) -> SolveReport:
    """Same outer loop with steepest-descent inner solves; comparison baseline."""
    counter = {"matvecs": 0}
    grad_factory, hess_factory = _counted_oracles(p, counter)

    def inner_runner(z, lam, mu, on_iterate):
        return _minimize_quadratic(
            grad_factory(lam, mu),
            hess_factory(mu),
            z,
            al.inner_tol,
            max_inner,
            window=1,
            use_memory=False,
            on_iterate=on_iterate,
        )

    echo = {
        "solver": "al-gd",
        "mu0": al.mu0,
        "mu_delta": al.mu_delta,
        "inner_tol": al.inner_tol,
        "max_outer": al.max_outer,
        "max_inner": max_inner,
    }
    report = _outer_loop(p, al, inner_runner, record, echo)
    report.total_matvecs += counter["matvecs"]
    return report


def solve_minres_kkt(
    p: DeepcProblem, tol: float, max_iter: int, record: bool = True
) -> SolveReport:
    """MINRES on the symmetric indefinite KKT system; comparison baseline.

    The system [[S, P'], [P, 0]] (z; w) = (-q; x0) is solved matrix-free;
    the multiplier is lam = -w.  tol is an absolute target on the KKT
    residual norm.
    """
    counter = {"matvecs": 0}
    t_start = time.perf_counter()
    cols, n = p.col_dim, p.n
    rhs = np.concatenate([-p.linear_term, p.initial_state])
    report = SolveReport(
        config={"solver": "minres", "tol": tol, "max_iter": max_iter},
    )

    if np.linalg.norm(rhs) == 0.0:
        report.z = np.zeros(cols)
        report.multiplier = np.zeros(n)
        report.residual_norm = 0.0
        report.status = STATUS_CONVERGED
        report.elapsed_s = time.perf_counter() - t_start
        return report

    def kkt_apply(v):
        counter["matvecs"] += 2
        hz = forward_blocks(p.combined_op, v[:cols])
        blocks = weighted_blocks(p, hz)
        blocks[0, :n] += v[cols:]
        top = reverse_blocks(p.combined_op, blocks)
        return np.concatenate([top, hz[0, :n]])

    operator = scipy.sparse.linalg.LinearOperator(
        (cols + n, cols + n), matvec=kkt_apply, dtype=float
    )

    iters = {"count": 0}

    def callback(xk):
        iters["count"] += 1
        if record:
            res = float(np.linalg.norm(rhs - kkt_apply(xk)))
            report.records.append(
                IterationRecord(
                    outer=0,
                    inner=iters["count"],
                    residual_norm=res,
                    grad_norm=float("nan"),
                    alpha=float("nan"),
                    elapsed_s=time.perf_counter() - t_start,
                )
            )

    # The KKT residual of the mapped iterate equals the system residual, so
    # the relative tolerance is the absolute target scaled by ||rhs||.
    rtol = min(0.5, tol / float(np.linalg.norm(rhs)))
    try:
        solution, info = scipy.sparse.linalg.minres(
            operator, rhs, rtol=rtol, maxiter=max_iter, callback=callback
        )
    except TypeError:  # older scipy spells the tolerance "tol"
        solution, info = scipy.sparse.linalg.minres(
            operator, rhs, tol=rtol, maxiter=max_iter, callback=callback
        )
    z = solution[:cols]
    lam = -solution[cols:]
    _, rnorm = kkt_residual(p, z, lam)
    counter["matvecs"] += 2
    report.z = z
    report.multiplier = lam
    report.residual_norm = rnorm
    report.total_inner = iters["count"]
    report.total_matvecs = counter["matvecs"]
    report.elapsed_s = time.perf_counter() - t_start
    if rnorm <= tol:
        report.status = STATUS_CONVERGED
    elif info < 0:
        report.status = STATUS_DEGENERATE
    else:
        report.status = STATUS_MAX_ITERATIONS
    return report


def dense_problem_matrices(p: DeepcProblem):
    """Dense S and P; desk-scale verification helper."""
    if p.col_dim > DENSE_COL_GUARD:
        raise ValueError(f"dense assembly refused beyond col_dim {DENSE_COL_GUARD}")
    h = dense_hankel(p.combined_op.signal, p.horizon)
    weights = np.kron(np.eye(p.horizon), scipy.linalg.block_diag(p.q_weight, p.r_weight))
    s = h.T @ weights @ h
    pmat = h[: p.n, :]
    return s, pmat


def solve_dense_kkt(p: DeepcProblem):
    """Dense pseudo-inverse KKT solve; the verification oracle.

    Returns the minimum-norm primal among the (non-unique) minimizers and the
    unique multiplier.  Refuses instances beyond the dense guard.
    """
    s, pmat = dense_problem_matrices(p)
    cols = p.col_dim
    kkt = np.zeros((cols + p.n, cols + p.n))
    kkt[:cols, :cols] = s
    kkt[:cols, cols:] = -pmat.T
    kkt[cols:, :cols] = pmat
    rhs = np.concatenate([-p.linear_term, p.initial_state])
    solution = np.linalg.pinv(kkt) @ rhs
    return solution[:cols], solution[cols:]
