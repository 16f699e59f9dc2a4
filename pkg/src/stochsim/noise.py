"""Ornstein-Uhlenbeck load noise and reproducible noise paths.

Each stochastic variable follows d(eps) = -a*eps dt + b dW and shifts a load
around its mean: P_L(t) = P_L0 + eps_P(t), Q_L(t) = Q_L0 + eps_Q(t).  Values
are resampled on a fixed interval and held constant in between, for every
solver, so trajectories from different solvers are comparable path by path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OUParams:
    """Mean-reversion rate ``a`` (1/s) and diffusion magnitude ``b`` (p.u./sqrt(s))."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError("OU drift parameter a must be positive")
        if self.b < 0.0:
            raise ValueError("OU diffusion parameter b must be nonnegative")


def stationary_variance(p: OUParams) -> float:
    """Variance of the stationary OU distribution, b^2 / (2a)."""
    return p.b * p.b / (2.0 * p.a)


def ou_exact_step(eps: float, p: OUParams, dt: float, xi: float) -> float:
    """Advance an OU variable by ``dt`` using the exact transition law.

    eps' = eps * exp(-a dt) + b * sqrt((1 - exp(-2 a dt)) / (2a)) * xi
    with ``xi`` a standard-normal draw.  Distributionally exact for any step.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    decay = math.exp(-p.a * dt)
    std = p.b * math.sqrt(-math.expm1(-2.0 * p.a * dt) / (2.0 * p.a))
    return eps * decay + std * xi


def ou_closed_form(eps0: float, p: OUParams, t: float, db: np.ndarray) -> float:
    """Evaluate the closed-form OU solution on a discretized Brownian path.

    ``db`` holds Brownian increments over a uniform partition of [0, t]; the
    stochastic integral uses left endpoints:
    eps(t) = exp(-a t) * (eps0 + b * sum_i exp(a s_i) dB_i).
    """
    db = np.asarray(db, dtype=float)
    m = db.shape[0]
    if m == 0:
        return eps0 * math.exp(-p.a * t)
    s = np.arange(m) * (t / m)
    integral = float(np.sum(np.exp(p.a * s) * db))
    return math.exp(-p.a * t) * (eps0 + p.b * integral)


@dataclass(frozen=True)
class StochasticLoadSpec:
    """One stochastic load: mean values plus OU parameters for P and Q.

    ``sigma_rel`` is the relative standard deviation of the load about its
    mean; the diffusion magnitudes are fixed at construction as
    b = sigma_rel * |mean| * sqrt(2a) so the stationary deviation equals
    sigma_rel * |mean|.
    """

    bus: int
    p_mean: float
    q_mean: float
    ou_p: OUParams
    ou_q: OUParams
    sigma_rel: float

    @classmethod
    def from_sigma(
        cls, bus: int, p_mean: float, q_mean: float, sigma_rel: float, a: float = 0.5
    ) -> "StochasticLoadSpec":
        if sigma_rel < 0.0:
            raise ValueError("sigma_rel must be nonnegative")
        b_p = sigma_rel * abs(p_mean) * math.sqrt(2.0 * a)
        b_q = sigma_rel * abs(q_mean) * math.sqrt(2.0 * a)
        return cls(bus, p_mean, q_mean, OUParams(a, b_p), OUParams(a, b_q), sigma_rel)


@dataclass(frozen=True)
class NoisePath:
    """Seeded grid of standard-normal draws, indexed by (variable, step).

    The grid is fully determined by (seed, n_vars, horizon, dt) and is drawn
    in one shot, so it does not depend on consumption order.  Ensemble run i
    derives its seed from the master seed as SeedSequence([master, i]).
    """

    seed: tuple
    dt: float
    xi: np.ndarray  # shape (n_vars, n_steps)

    def __post_init__(self):
        self.xi.setflags(write=False)

    @property
    def n_vars(self) -> int:
        return self.xi.shape[0]

    @property
    def n_steps(self) -> int:
        return self.xi.shape[1]


def build_noise_path(seed, n_vars: int, horizon: float, dt: float = 0.1) -> NoisePath:
    """Draw the ceil(horizon/dt) x n_vars grid of N(0,1) deviates for one run."""
    if horizon <= 0.0 or dt <= 0.0:
        raise ValueError("horizon and dt must be positive")
    n_steps = int(math.ceil(horizon / dt - 1e-12))
    entropy = (seed,) if np.isscalar(seed) else tuple(seed)
    rng = np.random.default_rng(np.random.SeedSequence(list(entropy)))
    xi = rng.standard_normal((n_vars, n_steps))
    return NoisePath(seed=entropy, dt=dt, xi=xi)


def sample_load_path(
    spec: StochasticLoadSpec, path: NoisePath, var_index: int, component: str = "p"
) -> np.ndarray:
    """Piecewise-constant load values over the path's resample intervals.

    The OU variable starts at zero (load at its mean over the first
    interval) and advances by the exact transition at each resample
    boundary; entry k is the value held on [k*dt, (k+1)*dt).
    """
    ou = spec.ou_p if component == "p" else spec.ou_q
    mean = spec.p_mean if component == "p" else spec.q_mean
    eps = ou_eps_path(ou, path, var_index)
    return mean + eps


def ou_eps_path(ou: OUParams, path: NoisePath, var_index: int) -> np.ndarray:
    """Deviation series for one stochastic variable: eps(0)=0, exact steps."""
    n = path.n_steps
    eps = np.empty(n)
    eps[0] = 0.0
    decay = math.exp(-ou.a * path.dt)
    std = ou.b * math.sqrt(-math.expm1(-2.0 * ou.a * path.dt) / (2.0 * ou.a))
    draws = path.xi[var_index]
    for k in range(1, n):
        eps[k] = eps[k - 1] * decay + std * draws[k - 1]
    return eps


def load_schedule(specs: list[StochasticLoadSpec], path: NoisePath) -> np.ndarray:
    """Stacked (n_steps, 2*len(specs)) array of piecewise-constant load values.

    Column 2*i is the P series of spec i, column 2*i+1 its Q series; the
    variable index into the noise grid follows the same ordering.
    """
    cols = []
    for i, spec in enumerate(specs):
        cols.append(sample_load_path(spec, path, 2 * i, "p"))
        cols.append(sample_load_path(spec, path, 2 * i + 1, "q"))
    if not cols:
        return np.zeros((path.n_steps, 0))
    return np.column_stack(cols)


def path_to_csv(path: NoisePath) -> str:
    """Render a noise path as ``variable,step,xi`` rows for external audit."""
    lines = ["variable,step,xi"]
    for v in range(path.n_vars):
        for s in range(path.n_steps):
            lines.append(f"{v},{s},{path.xi[v, s]:.17g}")
    return "\n".join(lines) + "\n"
