"""Deterministic simulators for the three classic-control benchmarks.

Dynamics and physical constants follow the standard task definitions:

* pendulum — d(theta)/dt = omega, m l^2 d(omega)/dt = -mu_f omega
  + m g l sin(theta) + torque; theta = 0 is upright, torques {-5,-3,0,3,5},
  dt = 0.05 s.  Integrated with semi-implicit Euler (velocity first).
* mountain_car — the discrete update v' = v + a*F - g_s cos(3x), x' = x + v',
  with F = 0.005, g_s = 0.0025, actions {-1, 0, 1}; hitting the left wall at
  x = -1.2 zeroes the velocity.
* acrobot — two-link underactuated pendulum at dt = 0.2 s with actions
  {-1, 0, 1}.  The default second-joint acceleration is
  dd2 = a + d2*phi2/d1 - phi2 (no inertia denominator); the conventional
  formulation is available behind ``acrobot_standard_dynamics``.

States are plain float arrays.  After every step angles are wrapped to
[-pi, pi] and velocities clamped to their bounds, so step() is closed on the
state box and bitwise deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PENDULUM = "pendulum"
MOUNTAIN_CAR = "mountain_car"
ACROBOT = "acrobot"


@dataclass(frozen=True)
class EnvSpec:
    """Static description of one benchmark task.

    ``state_bounds`` is a (state_dim, 2) array of [lo, hi] rows;
    ``angle_dims`` lists the coordinates that wrap; ``constants`` holds the
    physical parameters so the spec serializes cleanly to JSON.
    """

    name: str
    state_dim: int
    action_set: tuple
    state_bounds: np.ndarray
    dt: float
    angle_dims: tuple = ()
    constants: dict = field(default_factory=dict)
    goal_angle_tol: float = 0.1
    goal_velocity_tol: float | None = None
    acrobot_standard_dynamics: bool = False

    def __post_init__(self):
        if len(self.action_set) == 0:
            raise ValueError("action set must be nonempty")
        if list(self.action_set) != sorted(self.action_set):
            raise ValueError("action set must be sorted")
        bounds = np.asarray(self.state_bounds, dtype=float)
        if bounds.shape != (self.state_dim, 2) or not np.all(np.isfinite(bounds)):
            raise ValueError("state bounds must be finite (state_dim, 2)")
        bounds.setflags(write=False)
        object.__setattr__(self, "state_bounds", bounds)
        object.__setattr__(self, "action_set", tuple(float(a) for a in self.action_set))

    @property
    def n_actions(self) -> int:
        return len(self.action_set)

    @property
    def max_abs_action(self) -> float:
        return max(abs(a) for a in self.action_set)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "state_dim": self.state_dim,
            "action_set": list(self.action_set),
            "state_bounds": self.state_bounds.tolist(),
            "dt": self.dt,
            "angle_dims": list(self.angle_dims),
            "constants": dict(self.constants),
            "goal_angle_tol": self.goal_angle_tol,
            "goal_velocity_tol": self.goal_velocity_tol,
            "acrobot_standard_dynamics": self.acrobot_standard_dynamics,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnvSpec":
        vel_tol = data.get("goal_velocity_tol")
        return cls(
            name=data["name"],
            state_dim=int(data["state_dim"]),
            action_set=tuple(data["action_set"]),
            state_bounds=np.asarray(data["state_bounds"], dtype=float),
            dt=float(data["dt"]),
            angle_dims=tuple(data.get("angle_dims", ())),
            constants=dict(data.get("constants", {})),
            goal_angle_tol=float(data.get("goal_angle_tol", 0.1)),
            goal_velocity_tol=None if vel_tol is None else float(vel_tol),
            acrobot_standard_dynamics=bool(data.get("acrobot_standard_dynamics", False)),
        )


def pendulum_spec(**overrides) -> EnvSpec:
    defaults = dict(
        name=PENDULUM,
        state_dim=2,
        action_set=(-5.0, -3.0, 0.0, 3.0, 5.0),
        state_bounds=np.array([[-math.pi, math.pi], [-4.0, 4.0]]),
        dt=0.05,
        angle_dims=(0,),
        constants=dict(
            {"mass": 1.0, "length": 1.0, "gravity": 9.8, "friction": 0.01}
        ),
    )
    defaults.update(overrides)
    return EnvSpec(**defaults)


def mountain_car_spec(**overrides) -> EnvSpec:
    defaults = dict(
        name=MOUNTAIN_CAR,
        state_dim=2,
        action_set=(-1.0, 0.0, 1.0),
        state_bounds=np.array([[-1.2, 0.6], [-0.07, 0.07]]),
        dt=1.0,
        constants=dict(
            {"force": 0.005, "slope_gravity": 0.0025, "goal_position": 0.5, "goal_velocity": 0.0}
        ),
    )
    defaults.update(overrides)
    return EnvSpec(**defaults)


def acrobot_spec(**overrides) -> EnvSpec:
    defaults = dict(
        name=ACROBOT,
        state_dim=4,
        action_set=(-1.0, 0.0, 1.0),
        state_bounds=np.array(
            [
                [-math.pi, math.pi],
                [-math.pi, math.pi],
                [-4.0 * math.pi, 4.0 * math.pi],
                [-9.0 * math.pi, 9.0 * math.pi],
            ]
        ),
        dt=0.2,
        angle_dims=(0, 1),
        constants=dict(
            {
                "m1": 1.0,
                "m2": 1.0,
                "l1": 1.0,
                "l2": 1.0,
                "lc1": 0.5,
                "lc2": 0.5,
                "i1": 1.0,
                "i2": 1.0,
                "gravity": 9.8,
            }
        ),
    )
    defaults.update(overrides)
    return EnvSpec(**defaults)


def make_spec(name: str, **overrides) -> EnvSpec:
    factories = {PENDULUM: pendulum_spec, MOUNTAIN_CAR: mountain_car_spec, ACROBOT: acrobot_spec}
    if name not in factories:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(factories)}")
    return factories[name](**overrides)


def wrap_angle(x: float) -> float:
    """Wrap to [-pi, pi]; values already inside pass through unchanged."""
    if -math.pi <= x <= math.pi:
        return x
    return ((x + math.pi) % (2.0 * math.pi)) - math.pi


def _action_value(spec: EnvSpec, action: int) -> float:
    if not 0 <= int(action) < spec.n_actions:
        raise ValueError(f"invalid action index {action!r}")
    return spec.action_set[int(action)]


def step(spec: EnvSpec, state: np.ndarray, action: int) -> np.ndarray:
    """One integration step; output obeys all state-box invariants."""
    a = _action_value(spec, action)
    s = np.asarray(state, dtype=float)
    if spec.name == PENDULUM:
        return _step_pendulum(spec, s, a)
    if spec.name == MOUNTAIN_CAR:
        return _step_mountain_car(spec, s, a)
    if spec.name == ACROBOT:
        return _step_acrobot(spec, s, a)
    raise ValueError(f"unknown environment {spec.name!r}")


def _step_pendulum(spec: EnvSpec, s: np.ndarray, torque: float) -> np.ndarray:
    c = spec.constants
    theta, omega = s
    inertia = c["mass"] * c["length"] ** 2
    omega_dot = (
        -c["friction"] * omega + c["mass"] * c["gravity"] * c["length"] * math.sin(theta) + torque
    ) / inertia
    lo, hi = spec.state_bounds[1]
    omega_new = min(max(omega + spec.dt * omega_dot, lo), hi)
    theta_new = wrap_angle(theta + spec.dt * omega_new)
    return np.array([theta_new, omega_new])


def _step_mountain_car(spec: EnvSpec, s: np.ndarray, accel: float) -> np.ndarray:
    c = spec.constants
    x, v = s
    v_new = v + accel * c["force"] - c["slope_gravity"] * math.cos(3.0 * x)
    v_lo, v_hi = spec.state_bounds[1]
    v_new = min(max(v_new, v_lo), v_hi)
    x_lo, x_hi = spec.state_bounds[0]
    x_new = min(max(x + v_new, x_lo), x_hi)
    if x_new <= x_lo:
        v_new = 0.0  # inelastic left wall
    return np.array([x_new, v_new])


def _step_acrobot(spec: EnvSpec, s: np.ndarray, torque: float) -> np.ndarray:
    c = spec.constants
    th1, th2, om1, om2 = s
    m1, m2 = c["m1"], c["m2"]
    l1, lc1, lc2 = c["l1"], c["lc1"], c["lc2"]
    i1, i2, grav = c["i1"], c["i2"], c["gravity"]
    cos2 = math.cos(th2)
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2.0 * l1 * lc2 * cos2) + i1 + i2
    d2 = m2 * (lc2**2 + l1 * lc2 * cos2) + i2
    phi2 = m2 * lc2 * grav * math.cos(th1 + th2 - math.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * om2**2 * math.sin(th2)
        - 2.0 * m2 * l1 * lc2 * om1 * om2 * math.sin(th2)
        + (m1 * lc1 + m2 * lc1) * grav * math.cos(th1 - math.pi / 2.0)
        + phi2
    )
    if spec.acrobot_standard_dynamics:
        dd2 = (
            torque + (d2 / d1) * phi1 - m2 * l1 * lc2 * om1**2 * math.sin(th2) - phi2
        ) / (m2 * lc2**2 + i2 - d2**2 / d1)
    else:
        dd2 = torque + d2 * phi2 / d1 - phi2
    dd1 = -(d2 * dd2 + phi1) / d1
    b1_lo, b1_hi = spec.state_bounds[2]
    b2_lo, b2_hi = spec.state_bounds[3]
    om1_new = min(max(om1 + spec.dt * dd1, b1_lo), b1_hi)
    om2_new = min(max(om2 + spec.dt * dd2, b2_lo), b2_hi)
    th1_new = wrap_angle(th1 + spec.dt * om1_new)
    th2_new = wrap_angle(th2 + spec.dt * om2_new)
    return np.array([th1_new, th2_new, om1_new, om2_new])


def is_goal(spec: EnvSpec, state: np.ndarray) -> bool:
    s = np.asarray(state, dtype=float)
    if spec.name == PENDULUM:
        # "theta == 0" is measure-zero; a small angle band stands in.  The
        # optional velocity gate additionally demands a slow (near-balanced)
        # pass; it is off by default because one step at the velocity bound
        # moves theta by dt*4 = 0.2, so fast crossings would go undetected.
        if spec.goal_velocity_tol is not None and abs(s[1]) > spec.goal_velocity_tol:
            return False
        return abs(wrap_angle(s[0])) <= spec.goal_angle_tol
    if spec.name == MOUNTAIN_CAR:
        c = spec.constants
        return s[0] >= c["goal_position"] and s[1] >= c["goal_velocity"]
    if spec.name == ACROBOT:
        return -math.cos(s[0]) - math.cos(s[0] + s[1]) > 1.0
    raise ValueError(f"unknown environment {spec.name!r}")


def one_step_loss(spec: EnvSpec, state: np.ndarray, action: int) -> float:
    """Binary one-step loss: 0 inside the goal set, 1 elsewhere."""
    _action_value(spec, action)
    return 0.0 if is_goal(spec, state) else 1.0


def zeta(spec: EnvSpec, state: np.ndarray, action: int) -> np.ndarray:
    """State-action embedding: the state with the normalized action appended."""
    a = _action_value(spec, action)
    return np.append(np.asarray(state, dtype=float), a / spec.max_abs_action)


def action_embeddings(spec: EnvSpec) -> np.ndarray:
    """Normalized action values, in action-index order."""
    return np.asarray(spec.action_set) / spec.max_abs_action


def sample_initial_state(spec: EnvSpec, rng: np.random.Generator, resting: bool = True) -> np.ndarray:
    """Draw a start state.

    ``resting`` starts from the task's rest configuration (pendulum hanging,
    mountain car near the valley bottom, acrobot fully at rest) — the start
    used by evaluation episodes and, by default, by exploration episodes too.
    ``resting=False`` instead spreads starts over the state box (velocities
    zero for the angle tasks).
    """
    if spec.name == PENDULUM:
        if resting:
            return np.array([math.pi, 0.0])
        return np.array([rng.uniform(-math.pi, math.pi), 0.0])
    if spec.name == MOUNTAIN_CAR:
        if resting:
            return np.array([rng.uniform(-0.6, -0.4), 0.0])
        return np.array([rng.uniform(-1.2, 0.6), rng.uniform(-0.07, 0.07)])
    if spec.name == ACROBOT:
        if resting:
            return np.zeros(4)
        return np.array([rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi, math.pi), 0.0, 0.0])
    raise ValueError(f"unknown environment {spec.name!r}")
