"""
A rating campaign from build to condition scores
================================================

Builds a task set over a synthetic corpus, lets a mixed population of
simulated raters complete it, screens the submissions, and pools the
surviving votes into per-condition means with confidence intervals.
No audio is needed: raters vote on configured ground truth.
"""

from echoeval.metrics import aggregate_condition
from echoeval.ratersim import GroundTruth, make_population, simulate_run
from echoeval.scales import Scale, Scenario
from echoeval.screening import ScreeningConfig, screen_campaign
from echoeval.taskbuilder import TaskConfig, TrappingDef, build_tasks

# Four competing models, 40 clips each. The configured truth is what a
# careful listener would converge to; the gap between models is one
# full scale point.
TRUTH = {"model_a": 1.5, "model_b": 2.5, "model_c": 3.5, "model_d": 4.5}
condition_of = {}
for model in TRUTH:
    for i in range(40):
        condition_of[f"{model}_clip_{i:02d}"] = model
corpus = sorted(condition_of)

# Trapping clips carry an inserted voice prompt naming the answer, so an
# attentive listener cannot miss them. Every task gets exactly one, never
# in first position.
traps = [TrappingDef("trap_low", 1, Scale.ECHO_DMOS), TrappingDef("trap_high", 5, Scale.ECHO_DMOS)]

config = TaskConfig(
    scenario=Scenario.FAR_END_SINGLE_TALK,
    votes_target=20,          # every clip rated at least 20 times
    task_size=10,
    gold_per_task=0,
    single_question=True,     # ask only about echo to keep the demo small
)
tasks = build_tasks(corpus, traps, [], config, seed=2024)
print(f"built {len(tasks)} tasks of {config.task_size} clips"
      f" (+1 trapping each) over {len(corpus)} clips")

# 16 trustworthy raters and 4 spammers who answer uniformly at random and
# only hit the trapping answer 20% of the time.
population = make_population(n_reliable=16, n_spammers=4, noise_sd=0.7, attention_p=0.2)
truth = GroundTruth.from_conditions(
    condition_of, {m: {Scale.ECHO_DMOS: v} for m, v in TRUTH.items()}
)
submissions = simulate_run(tasks, population, truth, seed=7)

report = screen_campaign(submissions, tasks, ScreeningConfig(), condition_of)
print(f"screened {len(submissions)} submissions:"
      f" {report.n_accepted} accepted, {report.n_rejected} rejected")
for reason, count in report.totals.items():
    if count:
        print(f"  {reason.value}: {count}")
if report.banned_workers:
    print(f"  banned for repeated trapping failures: {sorted(report.banned_workers)}")

# Pool the accepted votes. Spammers who slipped through add noise but the
# per-point gaps in the truth stay clearly resolved.
result = aggregate_condition(report.votes)
print("\ncondition scores (echo degradation, 5 = inaudible):")
for score in result.condition_scores:
    print(f"  {score.condition_id}: {score.mean:.2f} +/- {score.ci95:.3f}"
          f"  ({score.n_votes} votes, truth {TRUTH[score.condition_id]})")
