"""Random linear systems, trajectory simulation, and excitation checks.

Everything an experiment needs on the data side: draw a sparse random
system with a prescribed spectral radius, roll out trajectories, generate
exciting inputs, and compute setpoint equilibria.
"""

from dataclasses import dataclass

import numpy as np

_GENERATION_RETRIES = 8


@dataclass(frozen=True)
class LtiSystem:
    """Discrete-time system x_{k+1} = A x_k + B u_k."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.b_matrix.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Synchronous state/input record of equal length N."""

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        if self.states.shape[0] != self.inputs.shape[0]:
            raise ValueError("states and inputs must have equal length")

    @property
    def length(self) -> int:
        return self.states.shape[0]

    @property
    def combined(self) -> np.ndarray:
        """(N, n+m) array whose row k is w_k = (x_k, u_k)."""
        return np.hstack([self.states, self.inputs])


@dataclass(frozen=True)
class Setpoint:
    """Equilibrium pair: x_s = A x_s + B u_s."""

    x_s: np.ndarray
    u_s: np.ndarray

    @property
    def combined(self) -> np.ndarray:
        return np.concatenate([self.x_s, self.u_s])


def generate_system(
    n: int, m: int, spectral_radius: float, density: float, seed: int
) -> LtiSystem:
    """Draws a random sparse system and rescales A to the requested radius.

    Entries are standard normal, independently kept with probability
    ``density`` (else zeroed), and A is scaled so its spectral radius matches
    ``spectral_radius`` to near machine precision.

    Args:
        n: state dimension, >= 1.
        m: input dimension, >= 1.
        spectral_radius: target spectral radius of A, > 0.
        density: probability in (0, 1] that an entry is kept nonzero.
        seed: RNG seed; identical seeds give bit-identical systems.

    Raises:
        ValueError: on bad dimensions or parameters, or if every resampling
            attempt produced a zero-spectral-radius A (unscalable).
    """
    if n < 1 or m < 1:
        raise ValueError("dimensions must be positive")
    if spectral_radius <= 0:
        raise ValueError("spectral_radius must be positive")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(_GENERATION_RETRIES):
        a = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
        b = rng.standard_normal((n, m)) * (rng.random((n, m)) < density)
        raw_radius = np.max(np.abs(np.linalg.eigvals(a)))
        if raw_radius > 0:
            return LtiSystem(a_matrix=a * (spectral_radius / raw_radius), b_matrix=b)
        # A nilpotent draw cannot be rescaled; resample.
    raise ValueError("could not draw a system with positive spectral radius")


def simulate(system: LtiSystem, x0, inputs) -> Trajectory:
    """Rolls out the dynamics from x0 under the given input sequence.

    Args:
        system: the plant.
        x0: initial state, length n.
        inputs: (N, m) array of inputs; states[k+1] = A states[k] + B inputs[k]
            for k < N - 1 (the final input does not influence the record).

    Returns:
        Trajectory of length N with states[0] = x0.
    """
    x0 = np.asarray(x0, dtype=float)
    u = np.atleast_2d(np.asarray(inputs, dtype=float))
    if u.shape[1] != system.m:
        raise ValueError(f"inputs must have width {system.m}, got {u.shape[1]}")
    if x0.shape != (system.n,):
        raise ValueError(f"x0 must have length {system.n}")
    n_steps = u.shape[0]
    x = np.empty((n_steps, system.n))
    x[0] = x0
    for k in range(n_steps - 1):
        x[k + 1] = system.a_matrix @ x[k] + system.b_matrix @ u[k]
    return Trajectory(states=x, inputs=u.copy())


def generate_excitation(m: int, length: int, seed: int) -> np.ndarray:
    """I.i.d. standard-normal input sequence of the given length."""
    if length < 1:
        raise ValueError("length must be positive")
    return np.random.default_rng(seed).standard_normal((length, m))


def is_persistently_exciting(inputs, order: int) -> bool:
    """Whether the depth-``order`` Hankel matrix of the inputs has full row rank.

    Uses the numerical rank with tolerance max(dims) * eps * sigma_max.
    Desk-scale utility; the Hankel matrix is materialized densely.
    """
    u = np.atleast_2d(np.asarray(inputs, dtype=float))
    if u.shape[0] < order:
        return False
    from .spectral import dense_hankel

    h = dense_hankel(u, order)
    svals = np.linalg.svd(h, compute_uv=False)
    tol = max(h.shape) * np.finfo(float).eps * svals[0]
    return int(np.sum(svals > tol)) == u.shape[1] * order


def equilibrium_setpoint(system: LtiSystem, u_s) -> Setpoint:
    """Solves (I - A) x_s = B u_s for the equilibrium state.

    Raises:
        np.linalg.LinAlgError: if I - A is singular (spectral radius >= 1).
    """
    u_s = np.asarray(u_s, dtype=float)
    eye = np.eye(system.n)
    x_s = np.linalg.solve(eye - system.a_matrix, system.b_matrix @ u_s)
    return Setpoint(x_s=x_s, u_s=u_s)
