"""
Ranking models and checking that the numbers replicate
======================================================

Two questions every campaign report has to answer: which model wins, and
would a rerun with fresh raters say the same thing? This script fills
the four ranking cells from simulated votes, prints the fixed-width
leaderboard, repeats the far-end campaign with new seeds to measure
run-to-run agreement, and correlates the subjective means against a
synthetic objective metric.
"""

from echoeval.analysis import (
    challenge_table,
    condition_means,
    cross_run_reproducibility,
    format_ranking_text,
    subjective_objective_correlation,
)
from echoeval.metrics import aggregate_condition
from echoeval.ratersim import GroundTruth, make_population, simulate_run
from echoeval.scales import Scale, Scenario
from echoeval.screening import ScreeningConfig, screen_campaign
from echoeval.taskbuilder import TaskConfig, TrappingDef, build_tasks

MODELS = ("model_a", "model_b", "model_c", "model_d")

# Per-model truth for each scenario/scale the leaderboard aggregates:
# near-end overall quality, far-end echo, double-talk echo and
# double-talk other degradations. model_d is best across the board.
TRUTH = {
    Scenario.NEAR_END_SINGLE_TALK: {
        Scale.OVERALL_MOS: {"model_a": 2.0, "model_b": 2.8, "model_c": 3.6, "model_d": 4.4},
    },
    Scenario.FAR_END_SINGLE_TALK: {
        Scale.ECHO_DMOS: {"model_a": 1.6, "model_b": 2.6, "model_c": 3.4, "model_d": 4.5},
        # Far-end tasks also ask about non-echo degradations; that cell
        # is not part of the leaderboard but real campaigns collect it.
        Scale.OTHER_DMOS: {"model_a": 3.1, "model_b": 3.3, "model_c": 3.8, "model_d": 4.0},
    },
    Scenario.DOUBLE_TALK: {
        Scale.ECHO_DMOS: {"model_a": 1.8, "model_b": 2.4, "model_c": 3.7, "model_d": 4.3},
        Scale.OTHER_DMOS: {"model_a": 2.2, "model_b": 3.0, "model_c": 3.3, "model_d": 4.1},
    },
}


def run_campaign(scenario, scale_truth, seed, votes_target=12, n_clips=30):
    """Build, simulate and screen one scenario's campaign; return its scores."""
    condition_of = {f"{m}_{scenario.value}_{i:02d}": m for m in MODELS for i in range(n_clips)}
    traps = [TrappingDef("trap_1", 1, Scale.ECHO_DMOS), TrappingDef("trap_5", 5, Scale.ECHO_DMOS)]
    if scenario == Scenario.NEAR_END_SINGLE_TALK:
        traps = [TrappingDef("trap_1", 1, Scale.OVERALL_MOS), TrappingDef("trap_5", 5, Scale.OVERALL_MOS)]
    config = TaskConfig(scenario=scenario, votes_target=votes_target, task_size=10, gold_per_task=0)
    tasks = build_tasks(sorted(condition_of), traps, [], config, seed=seed)
    population = make_population(n_reliable=12, n_spammers=3, noise_sd=0.7, attention_p=0.2)
    truth = GroundTruth.from_conditions(
        condition_of, {m: {s: v[m] for s, v in scale_truth.items()} for m in MODELS}
    )
    submissions = simulate_run(tasks, population, truth, seed=seed + 1)
    report = screen_campaign(submissions, tasks, ScreeningConfig(), condition_of)
    return aggregate_condition(report.votes).condition_scores


# One campaign per scenario fills all four leaderboard columns.
all_scores = []
for seed, (scenario, scale_truth) in enumerate(TRUTH.items(), start=11):
    all_scores.extend(run_campaign(scenario, scale_truth, seed=seed))

table = challenge_table(all_scores)
print("leaderboard (overall = mean of the four columns):\n")
print(format_ranking_text(table))

# Reproducibility: rerun the far-end campaign three times with fresh
# build and rater seeds and correlate the condition-mean vectors.
fe_truth = TRUTH[Scenario.FAR_END_SINGLE_TALK]
runs = [run_campaign(Scenario.FAR_END_SINGLE_TALK, fe_truth, seed=100 + 10 * k) for k in range(3)]
print("run-to-run agreement on far-end condition means:")
for rep in cross_run_reproducibility(runs):
    print(f"  {rep.pair_name}: PCC {rep.pcc:.3f}, SRCC {rep.srcc:.3f} over {rep.n} cells")

# Objective-metric validation: a fake instrumental score that tracks the
# truth imperfectly. The condition-level join shows how well it predicts
# the subjective outcome.
subjective = condition_means(
    [s for s in runs[0] if s.scale == Scale.ECHO_DMOS], scale=Scale.ECHO_DMOS
)
objective = {"model_a": 12.0, "model_b": 30.0, "model_c": 41.0, "model_d": 55.0}
rep = subjective_objective_correlation(subjective, objective, pair_name="echo~erle")
print(f"\nsubjective vs objective ({rep.pair_name}):"
      f" PCC {rep.pcc:.3f}, SRCC {rep.srcc:.3f} over {rep.n} conditions")
