"""Data-driven quadratic optimal control problems, matrix-free.

A recorded trajectory of a linear system defines, through its block Hankel
matrix, a quadratic program over the coefficient vector z:

    minimize   (1/2) z' S z + q' z    subject to   P z = x0,

where S weights the predicted trajectory H z by the stage costs and P pins
its initial state.  Everything here is expressed through the spectral
operator: S, P, P', the augmented Lagrangian value/gradient/Hessian, and the
KKT residual all cost O(N d log N) per application.
"""

from dataclasses import dataclass, replace

import numpy as np

from .lti import Setpoint, Trajectory
from .spectral import SpectralHankelOperator, build_operator, forward_blocks, reverse_blocks


def min_data_length(n: int, m: int, horizon: int) -> int:
    """Shortest data trajectory usable for horizon-L problems: (m+1)(L+n) - 1."""
    if n < 1 or m < 1 or horizon < 1:
        raise ValueError("dimensions and horizon must be positive")
    return (m + 1) * (horizon + n) - 1


@dataclass(frozen=True)
class DeepcProblem:
    """Assembled data-driven QP.

    Attributes:
        combined_op: spectral Hankel operator over w_k = (x_k, u_k).
        q_weight: state stage cost, symmetric positive definite (n, n).
        r_weight: input stage cost, symmetric positive definite (m, m).
        horizon: prediction horizon L.
        initial_state: constraint right-hand side x0.
        linear_term: q in the objective; zero without setpoint tracking.
        n: state dimension.
        m: input dimension.
    """

    combined_op: SpectralHankelOperator
    q_weight: np.ndarray
    r_weight: np.ndarray
    horizon: int
    initial_state: np.ndarray
    linear_term: np.ndarray
    n: int
    m: int

    @property
    def col_dim(self) -> int:
        return self.combined_op.col_dim

    @property
    def data_length(self) -> int:
        return self.combined_op.length


@dataclass(frozen=True)
class AlState:
    """Multiplier/penalty pair of the augmented Lagrangian."""

    multiplier: np.ndarray
    penalty: float

    def __post_init__(self):
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")


def assemble_problem(
    traj: Trajectory,
    horizon: int,
    x0,
    q_weight=None,
    r_weight=None,
    setpoint: Setpoint | None = None,
) -> DeepcProblem:
    """Builds the QP from a data trajectory.

    The caller is responsible for persistency of excitation of the recorded
    inputs (order L + n); at desk scale `is_persistently_exciting` checks it,
    for generic random data it holds with probability one.

    Args:
        traj: recorded data trajectory, length N.
        horizon: prediction horizon L.
        x0: initial state to track from, length n.
        q_weight: state cost matrix; identity when omitted.
        r_weight: input cost matrix; identity when omitted.
        setpoint: optional tracking target; fills the linear term.

    Raises:
        ValueError: if N < (m+1)(L+n) - 1 or dimensions disagree.
    """
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    needed = min_data_length(n, m, horizon)
    if traj.length < needed:
        raise ValueError(
            f"data trajectory has length {traj.length}, "
            f"but horizon {horizon} needs at least {needed}"
        )
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have length {n}")
    q_weight = np.eye(n) if q_weight is None else np.asarray(q_weight, dtype=float)
    r_weight = np.eye(m) if r_weight is None else np.asarray(r_weight, dtype=float)
    if q_weight.shape != (n, n) or r_weight.shape != (m, m):
        raise ValueError("weight matrices must be (n, n) and (m, m)")
    op = build_operator(traj.combined, horizon)
    problem = DeepcProblem(
        combined_op=op,
        q_weight=q_weight,
        r_weight=r_weight,
        horizon=horizon,
        initial_state=x0,
        linear_term=np.zeros(op.col_dim),
        n=n,
        m=m,
    )
    if setpoint is not None:
        problem = replace(problem, linear_term=tracking_linear_term(problem, setpoint))
    return problem


def weighted_blocks(p: DeepcProblem, blocks: np.ndarray) -> np.ndarray:
    """Applies the stage-cost weighting to (L, n+m) trajectory blocks."""
    out = np.empty_like(blocks)
    np.matmul(blocks[:, : p.n], p.q_weight, out=out[:, : p.n])
    np.matmul(blocks[:, p.n :], p.r_weight, out=out[:, p.n :])
    return out


def embed_state(p: DeepcProblem, v: np.ndarray) -> np.ndarray:
    """Places an n-vector into the x-slot of the first block row, zero elsewhere."""
    blocks = np.zeros((p.horizon, p.n + p.m))
    blocks[0, : p.n] = v
    return blocks


def s_matvec(p: DeepcProblem, z) -> np.ndarray:
    """S z = H' W H z via two spectral products and a block weighting."""
    z = np.asarray(z, dtype=float)
    return reverse_blocks(p.combined_op, weighted_blocks(p, forward_blocks(p.combined_op, z)))


def p_matvec(p: DeepcProblem, z) -> np.ndarray:
    """P z: the initial state of the trajectory encoded by z."""
    z = np.asarray(z, dtype=float)
    return forward_blocks(p.combined_op, z)[0, : p.n].copy()


def pt_matvec(p: DeepcProblem, lam) -> np.ndarray:
    """P' lam via zero-embedding and one transpose product."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (p.n,):
        raise ValueError(f"multiplier must have length {p.n}")
    return reverse_blocks(p.combined_op, embed_state(p, lam))


def tracking_linear_term(p: DeepcProblem, sp: Setpoint) -> np.ndarray:
    """Linear objective term for setpoint tracking: q = -H' W (w_s, ..., w_s).

    With this q, minimizing (1/2) z'Sz + q'z subject to Pz = x0 solves the
    tracking problem whose stage cost penalizes deviation from (x_s, u_s)
    (the constant term is dropped).
    """
    target = np.tile(sp.combined, (p.horizon, 1))
    return -reverse_blocks(p.combined_op, weighted_blocks(p, target))


def al_value(p: DeepcProblem, z, state: AlState) -> float:
    """Augmented Lagrangian value at z.

    One forward product suffices: z'Sz = (Hz)' W (Hz) and Pz is the leading
    state block of the same Hz.
    """
    z = np.asarray(z, dtype=float)
    hz = forward_blocks(p.combined_op, z)
    violation = hz[0, : p.n] - p.initial_state
    quad = 0.5 * float(np.vdot(weighted_blocks(p, hz), hz))
    return (
        quad
        + float(p.linear_term @ z)
        + 0.5 * state.penalty * float(violation @ violation)
        - float(state.multiplier @ violation)
    )


def al_gradient(p: DeepcProblem, z, state: AlState) -> np.ndarray:
    """Gradient of the augmented Lagrangian: (S + mu P'P) z + q - P'(mu x0 + lam)."""
    g, _ = al_gradient_parts(p, np.asarray(z, dtype=float), state)
    return g


def al_gradient_parts(p: DeepcProblem, z: np.ndarray, state: AlState):
    """(gradient, P z) with one forward and one transpose product.

    The S-term and both P'-terms share the transpose: the weighted trajectory
    and the embedded multiplier residual are summed in block space first.
    """
    hz = forward_blocks(p.combined_op, z)
    pz = hz[0, : p.n].copy()
    blocks = weighted_blocks(p, hz)
    blocks[0, : p.n] += state.penalty * (pz - p.initial_state) - state.multiplier
    return reverse_blocks(p.combined_op, blocks) + p.linear_term, pz


def al_hessian_matvec(p: DeepcProblem, v, mu: float) -> np.ndarray:
    """(S + mu P'P) v; the constant Hessian of the inner objective."""
    hv, _ = al_hessian_parts(p, np.asarray(v, dtype=float), mu)
    return hv


def al_hessian_parts(p: DeepcProblem, v: np.ndarray, mu: float):
    """((S + mu P'P) v, P v) with one forward and one transpose product."""
    hv = forward_blocks(p.combined_op, v)
    pv = hv[0, : p.n].copy()
    blocks = weighted_blocks(p, hv)
    blocks[0, : p.n] += mu * pv
    return reverse_blocks(p.combined_op, blocks), pv


def kkt_residual(p: DeepcProblem, z, lam):
    """Stacked first-order residual (S z + q - P' lam, P z - x0) and its norm."""
    z = np.asarray(z, dtype=float)
    lam = np.asarray(lam, dtype=float)
    hz = forward_blocks(p.combined_op, z)
    feasibility = hz[0, : p.n] - p.initial_state
    blocks = weighted_blocks(p, hz)
    blocks[0, : p.n] -= lam
    stationarity = reverse_blocks(p.combined_op, blocks) + p.linear_term
    stacked = np.concatenate([stationarity, feasibility])
    return stacked, float(np.linalg.norm(stacked))


def recovered_trajectory(p: DeepcProblem, z) -> np.ndarray:
    """The length-L trajectory H z encoded by a coefficient vector, as (L, n+m) blocks."""
    return forward_blocks(p.combined_op, np.asarray(z, dtype=float))
