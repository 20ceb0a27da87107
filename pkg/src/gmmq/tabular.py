"""Finite-MDP machinery used as a ground-truth oracle.

Exact Bellman operators over an explicit transition tensor, fixed points by
iterating them to convergence (a contraction for discount < 1), and a grid
discretizer that turns the deterministic benchmark simulators into tiny MDPs
so learned Q-functions can be compared against an exact optimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import envs
from .envs import EnvSpec


@dataclass(frozen=True)
class FiniteMdp:
    """Explicit MDP: transitions (S, A, S) with stochastic rows, losses (S, A).

    ``centers`` carries the continuous grid states when the MDP came from
    :func:`discretize`; hand-built MDPs leave it None.
    """

    transitions: np.ndarray
    losses: np.ndarray
    discount: float
    centers: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        p = np.asarray(self.transitions, dtype=float)
        g = np.asarray(self.losses, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or g.shape != p.shape[:2]:
            raise ValueError(f"inconsistent shapes: transitions {p.shape}, losses {g.shape}")
        if np.any(p < 0.0) or np.any(np.abs(p.sum(axis=2) - 1.0) > 1e-12):
            raise ValueError("transition rows must be probability vectors")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(g))):
            raise ValueError("MDP tables must be finite")
        p.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "transitions", p)
        object.__setattr__(self, "losses", g)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def bellman_apply(mdp: FiniteMdp, q: np.ndarray, policy: np.ndarray | None = None) -> np.ndarray:
    """One exact Bellman application.

    ``policy`` (array of action indices per state) selects the stationary-
    policy operator; None selects the greedy operator, which bootstraps with
    the minimum over next actions.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"Q table must be {(mdp.n_states, mdp.n_actions)}, got {q.shape}")
    if policy is None:
        next_values = q.min(axis=1)
    else:
        policy = np.asarray(policy, dtype=int)
        next_values = q[np.arange(mdp.n_states), policy]
    return mdp.losses + mdp.discount * (mdp.transitions @ next_values)


def fixed_point(
    mdp: FiniteMdp, policy: np.ndarray | None = None, tol: float = 1e-12, max_iter: int = 100_000
) -> np.ndarray:
    """Iterate the Bellman operator until the sup-norm update drops below tol."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        q_next = bellman_apply(mdp, q, policy)
        if np.max(np.abs(q_next - q)) < tol:
            return q_next
        q = q_next
    raise RuntimeError("Bellman iteration failed to converge (discount too close to 1?)")


def contraction_check(
    mdp: FiniteMdp, q1: np.ndarray, q2: np.ndarray, policy: np.ndarray | None = None
) -> float:
    """Sup-norm contraction ratio ||T q1 - T q2|| / ||q1 - q2|| (0 when q1 = q2)."""
    gap = np.max(np.abs(np.asarray(q1, dtype=float) - np.asarray(q2, dtype=float)))
    if gap == 0.0:
        return 0.0
    mapped_gap = np.max(np.abs(bellman_apply(mdp, q1, policy) - bellman_apply(mdp, q2, policy)))
    return float(mapped_gap / gap)


def discretize(
    spec: EnvSpec,
    grid_resolution: int,
    discount: float,
    mc_samples: int = 1,
    rng: np.random.Generator | None = None,
    absorbing_goals: bool = True,
) -> FiniteMdp:
    """Grid the state box into cell centers and tabulate the simulator.

    The benchmark dynamics are deterministic, so each (cell, action) row is
    one-hot on the cell nearest the stepped state; ``mc_samples`` exists for
    stochastic variants and averages repeated draws.  Goal cells become
    absorbing zero-loss states when ``absorbing_goals`` is set.
    """
    if grid_resolution < 2:
        raise ValueError("need at least two cells per dimension")
    axes = [
        np.linspace(lo, hi, grid_resolution) for lo, hi in spec.state_bounds
    ]
    centers = np.array(list(itertools.product(*axes)))
    n_states = centers.shape[0]
    n_actions = spec.n_actions
    widths = np.array([(hi - lo) / (grid_resolution - 1) for lo, hi in spec.state_bounds])
    lows = spec.state_bounds[:, 0]

    def nearest_cell(state: np.ndarray) -> int:
        idx = np.rint((state - lows) / widths).astype(int)
        idx = np.clip(idx, 0, grid_resolution - 1)
        flat = 0
        for d in range(spec.state_dim):
            flat = flat * grid_resolution + idx[d]
        return flat

    transitions = np.zeros((n_states, n_actions, n_states))
    losses = np.zeros((n_states, n_actions))
    for s_idx in range(n_states):
        center = centers[s_idx]
        if absorbing_goals and envs.is_goal(spec, center):
            transitions[s_idx, :, s_idx] = 1.0
            continue
        for a_idx in range(n_actions):
            losses[s_idx, a_idx] = envs.one_step_loss(spec, center, a_idx)
            for _ in range(mc_samples):
                landed = envs.step(spec, center, a_idx)
                transitions[s_idx, a_idx, nearest_cell(landed)] += 1.0 / mc_samples
    return FiniteMdp(transitions, losses, discount, centers=centers)


def ensemble_br_loss(
    mdp: FiniteMdp, q: np.ndarray, policy: np.ndarray, state_dist: np.ndarray
) -> float:
    """Exact expected squared Bellman residual under the sampling scheme below.

    States are drawn from ``state_dist``, the action is the policy's, and the
    successor follows the transition row; the bootstrap uses the policy's
    next action.
    """
    q = np.asarray(q, dtype=float)
    policy = np.asarray(policy, dtype=int)
    state_dist = np.asarray(state_dist, dtype=float)
    states = np.arange(mdp.n_states)
    q_next_under_policy = q[states, policy]
    total = 0.0
    for s in states:
        a = policy[s]
        residuals = mdp.losses[s, a] + mdp.discount * q_next_under_policy - q[s, a]
        total += state_dist[s] * float(mdp.transitions[s, a] @ (residuals**2))
    return total


def empirical_br_loss(
    mdp: FiniteMdp,
    q: np.ndarray,
    policy: np.ndarray,
    state_dist: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo estimate of :func:`ensemble_br_loss` from sampled transitions."""
    q = np.asarray(q, dtype=float)
    policy = np.asarray(policy, dtype=int)
    states = rng.choice(mdp.n_states, size=n_samples, p=np.asarray(state_dist, dtype=float))
    actions = policy[states]
    uniform = rng.random(n_samples)
    row_cdfs = np.cumsum(mdp.transitions, axis=2)[states, actions]
    next_states = np.minimum((uniform[:, None] >= row_cdfs).sum(axis=1), mdp.n_states - 1)
    residuals = (
        mdp.losses[states, actions]
        + mdp.discount * q[next_states, policy[next_states]]
        - q[states, actions]
    )
    return float(np.mean(residuals**2))


def greedy_policy_of(q: np.ndarray) -> np.ndarray:
    """Greedy (loss-minimizing) action per state, lowest index on ties."""
    return np.argmin(np.asarray(q, dtype=float), axis=1)


def compare_policies(mdp: FiniteMdp, tabular_qstar: np.ndarray, q_fn) -> tuple[float, float]:
    """Fraction of grid states where greedy actions agree, plus the value gap.

    ``q_fn(state, action_index)`` evaluates the learned Q-function at a grid
    center.  The returned gap is sup |q_fn - Q*| over the grid (diagnostic).
    """
    if mdp.centers is None:
        raise ValueError("this MDP has no grid centers to evaluate q_fn on")
    qstar = np.asarray(tabular_qstar, dtype=float)
    greedy_star = greedy_policy_of(qstar)
    agree = 0
    gap = 0.0
    for s_idx in range(mdp.n_states):
        values = np.array([q_fn(mdp.centers[s_idx], a) for a in range(mdp.n_actions)])
        if int(np.argmin(values)) == int(greedy_star[s_idx]):
            agree += 1
        gap = max(gap, float(np.max(np.abs(values - qstar[s_idx]))))
    return agree / mdp.n_states, gap
