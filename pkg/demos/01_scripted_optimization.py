"""Scripted two-stage optimization against synthetic objectives.

A scripted oracle stands in for the human judge: it scores each candidate
fan, returns rankings, and the optimizer never sees a number — only orders.
The demo runs the full loop on a sphere and on Rosenbrock and prints the
per-round best objective so you can watch the descent.
"""

import numpy as np

from rankopt import (
    OptimizerConfig,
    RosenbrockObjective,
    ScriptedOracle,
    SphereObjective,
    StopRule,
    run_scripted,
)


def show_run(name, objective, d, seed=1, rounds=(20, 5)):
    config = OptimizerConfig(d=d, seed=seed)
    oracle = ScriptedOracle(objective, seed=seed + 100)
    result = run_scripted(config, oracle, StopRule(*rounds))
    print(f"\n=== {name} (d={d}, {rounds[0]}+{rounds[1]} rounds) ===")
    for rec in result.log:
        marker = "rank" if rec.feedback.kind.value == "full_ranking" else rec.feedback.kind.value
        if rec.round_index % 4 == 0 or rec.round_index >= rounds[0]:
            print(f"  round {rec.round_index:>2} [{rec.stage.value}:{marker:>15}] best f = {rec.best_objective:.4f}")
    final_f = objective(result.final)
    round0 = result.log[0].best_objective
    print(f"  final f = {final_f:.6f}  ({round0 / max(final_f, 1e-12):.0f}x better than round 0)")
    return result


def main():
    show_run("sphere centered at 2*ones", SphereObjective(center=2.0 * np.ones(8)), d=8)
    show_run("rosenbrock", RosenbrockObjective(d=4), d=4, rounds=(30, 10))

    # Rankings are orders, not scores: any strictly increasing transform of
    # the objective produces the identical run.
    f = SphereObjective(center=np.zeros(6))
    phi_f = lambda z: float(np.exp(f(z)))
    cfg = OptimizerConfig(d=6, seed=3)
    a = run_scripted(cfg, ScriptedOracle(f, seed=4), StopRule(10, 3))
    b = run_scripted(cfg, ScriptedOracle(phi_f, seed=4), StopRule(10, 3))
    print(f"\nsame run under f and exp(f): identical = {np.array_equal(a.final, b.final)}")


if __name__ == "__main__":
    main()
