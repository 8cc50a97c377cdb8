"""
Planning a single maze task with divide-and-conquer search
==========================================================

Generate a procedural maze, pick a start/goal pair, run the planner in its
default divide-and-conquer mode, and look at what comes back: the flat plan,
the solution tree of sub-goals, and a rendered grid.
"""

import numpy as np

from subplan import (
    PlannerConfig,
    UntrainedHeuristics,
    execute_plan,
    generate_maze,
    plan_report,
    render_plan,
    run_search,
    sample_task,
    serialize_maze,
)

# A 15x15 maze carved at wall density 0.75.  The same (size, density, seed)
# triple always produces the same maze.
maze = generate_maze(15, 15, 0.75, seed=3)
task = sample_task(maze, seed=1)
print(serialize_maze(maze, task.start, task.goal))

# Plan with untrained heuristics: a constant value estimate and a uniform
# prior over sub-goal proposals.  The budget counts OR-node expansions.
config = PlannerConfig(budget=150, seed=0)
result = run_search(task, UntrainedHeuristics(), config)
print(plan_report(result, config, maze, task))

# The solution tree records how the task was split.  Every inner node chose a
# sub-goal; the leaves are single tasks the low-level policy handles directly.
for node in result.solution_tree.nodes():
    kind = "leaf" if node.terminal else f"split at {node.chosen}"
    print(f"  {node.key.s} -> {node.key.s2}: G = {node.G:.3f} ({kind})")
print()

# Render the plan on the grid: sub-goals are numbered in plan order, S and G
# mark the endpoints.  Untrained heuristics break ties arbitrarily, so the
# plan may wander or revisit a cell; a revisited cell keeps the number from
# its shallowest occurrence in the tree, which is why the printed sequence
# can skip values.  Training (see train_small.py) removes most of this slack.
print(render_plan(maze, task, result))

# Finally, hand the plan to the low-level agent and walk it step by step.
rng = np.random.default_rng(0)
traj = execute_plan(rng, task, result.plan.sigma, step_limit=200)
print(f"executed {traj.steps} steps, reached goal: {traj.reached_goal}")
