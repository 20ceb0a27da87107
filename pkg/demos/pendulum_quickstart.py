"""Short pendulum training run: watch steps-to-goal fall across trials.

Thirty policy-iteration trials with five Gaussians take a minute or two; the
full experiment (150 trials, several seeds) runs through the CLI instead:

    gmmq run demos/pendulum_config.json

Run:  python demos/pendulum_quickstart.py
"""

import numpy as np

from gmmq import PiConfig, pendulum_spec, run
from gmmq.policy_iter import moving_average

cfg = PiConfig(env=pendulum_spec(), k=5, trials=30, seed=0)
print(f"training: K={cfg.k}, discount={cfg.discount}, {cfg.rollout.total} transitions/trial")
logs = run(cfg)

steps = np.array([log.steps_to_goal for log in logs])
smoothed = moving_average(steps, 10)
print("\ntrial  steps-to-goal  (smoothed)  final-loss")
for log, ma in zip(logs, smoothed):
    print(f"{log.trial:5d}  {log.steps_to_goal:13.0f}  {ma:10.1f}  {log.final_loss:.4f}")
print(f"\nbest episode: {steps.min():.0f} steps from the hanging start")
