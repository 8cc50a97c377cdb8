"""
Training the search heuristics on small mazes
=============================================

A short end-to-end training run: episodes alternate between planning with
the current value/prior model, executing the plan, relabeling the attempt
into (task, sub-goal) training pairs in hindsight, and taking gradient
steps on the replay buffer.  Everything is seeded, so re-running this
script reproduces the numbers exactly.
"""

from pathlib import Path
from tempfile import mkdtemp

from subplan import (
    ExperimentConfig,
    UntrainedHeuristics,
    evaluate,
    load_checkpoint,
    run_training,
)

# Desk-scale settings: 9x9 mazes, a slim budget, 120 episodes.  A paper-scale
# run would raise width/height, budget, and episodes; nothing else changes.
config = ExperimentConfig(width=9, height=9, density=0.6, budget=30,
                          episodes=120, eval_every=40, batch_size=32,
                          capacity=512, hidden=32, seed=1)
out_dir = Path(mkdtemp()) / "run"
run = run_training(config, out_dir)

# metrics.jsonl holds one record per episode; average the solved flag over
# windows to see the learning curve.
window = 30
records = run.records
for lo in range(0, len(records), window):
    bucket = records[lo:lo + window]
    frac = sum(r.solved for r in bucket) / len(bucket)
    print(f"episodes {lo:3d}-{lo + len(bucket) - 1:3d}: "
          f"solve fraction {frac:.2f}")
print()

# Fresh tasks from a stream disjoint from training, scored before and after.
env = config.env_config()
planner = config.planner_config()
model, _ = load_checkpoint((out_dir / "checkpoint.txt").read_text())
before = evaluate(UntrainedHeuristics(), env, planner, tasks=50, seed=0)
after = evaluate(model, env, planner, tasks=50, seed=0, label="trained")
print(f"untrained: {before.solved}/{before.tasks} solved "
      f"(CI [{before.ci_low:.2f}, {before.ci_high:.2f}])")
print(f"trained:   {after.solved}/{after.tasks} solved "
      f"(CI [{after.ci_low:.2f}, {after.ci_high:.2f}])")
