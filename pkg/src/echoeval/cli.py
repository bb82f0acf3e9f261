"""Command-line entry points for the evaluation pipeline.

Subcommands mirror the pipeline stages: ``prepare`` synthesizes
stimuli, ``build`` turns a stimulus manifest into task files,
``simulate`` generates synthetic submissions, ``screen`` validates
submissions into votes, ``report`` produces rankings/correlations/
reproducibility tables, and ``serve`` runs the campaign HTTP server.

The serve port resolves as: ECHOEVAL_PORT env var if set, else
``--port``, else 8000.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import analysis, metrics, ratersim, screening, stimulus, taskbuilder
from .scales import Scale, Scenario

PORT_ENV_VAR = "ECHOEVAL_PORT"


def _read_trapping_csv(path: str) -> list[taskbuilder.TrappingDef]:
    with open(path, newline="") as fh:
        return [
            taskbuilder.TrappingDef(
                clip_id=row["clip_id"],
                expected_answer=int(row["expected"]),
                scale=Scale(row["scale"]),
            )
            for row in csv.DictReader(fh)
        ]


def _read_gold_csv(path: str) -> list[taskbuilder.GoldDef]:
    with open(path, newline="") as fh:
        return [
            taskbuilder.GoldDef(
                clip_id=row["clip_id"],
                expected_score=int(row["expected"]),
                scale=Scale(row["scale"]),
                tolerance=int(row.get("tolerance") or 1),
            )
            for row in csv.DictReader(fh)
        ]


def _load_campaign(campaign_dir: str):
    """tasks, stimulus records, screening config for a campaign directory."""
    cdir = Path(campaign_dir)
    manifests = taskbuilder.read_tasks_jsonl(cdir / "tasks.jsonl")
    records = stimulus.read_manifest(cdir / "manifest.csv")
    knobs = {}
    if (cdir / "campaign.json").exists():
        with open(cdir / "campaign.json") as fh:
            knobs = json.load(fh)
    config = screening.ScreeningConfig(
        qualification_truth=tuple(knobs.get("qualification_truth", ())),
        environment_truth=tuple(knobs.get("environment_truth", ())),
        max_trapping_failures=int(knobs.get("max_trapping_failures", 2)),
    )
    return manifests, records, config


def cmd_prepare(args: argparse.Namespace) -> int:
    records = stimulus.prepare_directory(
        scenario=Scenario(args.scenario),
        r_in_dir=args.r_in,
        s_out_dir=args.s_out,
        out_dir=args.out,
        delay_s=args.delay_ms / 1000.0,
        loopback_ear=args.loopback_ear,
        condition=args.condition,
        bit_depth=args.bit_depth,
    )
    print(f"prepared {len(records)} stimuli in {args.out}")
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    records = stimulus.read_manifest(args.corpus)
    trapping_pool = _read_trapping_csv(args.trapping)
    gold_pool = _read_gold_csv(args.gold) if args.gold else []

    special = {t.clip_id for t in trapping_pool} | {g.clip_id for g in gold_pool}
    rating = [r for r in records if r.id not in special]
    if not rating:
        raise taskbuilder.EmptyCorpus("corpus has no rating clips")
    scenarios = {r.scenario for r in rating}
    if len(scenarios) != 1:
        raise ValueError(f"corpus mixes scenarios: {sorted(s.value for s in scenarios)}")

    config = taskbuilder.TaskConfig(
        scenario=next(iter(scenarios)),
        votes_target=args.votes,
        task_size=args.task_size,
        gold_per_task=args.gold_per_task if gold_pool else 0,
        single_question=args.single_question,
        campaign_id=args.campaign_id,
    )
    manifests = taskbuilder.build_tasks(
        [r.id for r in rating], trapping_pool, gold_pool, config, args.seed
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taskbuilder.write_tasks_jsonl(manifests, out / "tasks.jsonl")

    # Self-contained campaign dir: absolute clip paths survive the copy.
    corpus_dir = Path(args.corpus).resolve().parent
    rebased = []
    for r in records:
        p = Path(r.path)
        rebased.append(stimulus.StimulusRecord(
            id=r.id, scenario=r.scenario, condition=r.condition, gain=r.gain,
            delay_ms=r.delay_ms, path=str(p if p.is_absolute() else corpus_dir / p),
            gain_left=r.gain_left, gain_right=r.gain_right,
        ))
    stimulus.write_manifest(out / "manifest.csv", rebased)
    print(f"built {len(manifests)} tasks in {out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    manifests, records, _ = _load_campaign(args.campaign)
    sim = ratersim.load_sim_config(args.config)

    if sim.clip_truth is not None:
        truth = sim.clip_truth
    else:
        special = set().union(*(m.special_ids for m in manifests))
        condition_of = {r.id: r.condition for r in records if r.id not in special}
        truth = ratersim.GroundTruth.from_conditions(condition_of, sim.condition_truth)
    # Gold clips are rated like any other; anchor their truth to the key.
    by_clip = dict(truth.by_clip)
    for m in manifests:
        for g in m.gold:
            by_clip.setdefault(g.clip_id, {s: float(g.expected_score) for s in m.scales})
    truth = ratersim.GroundTruth(by_clip)

    submissions = ratersim.simulate_run(manifests, sim.population, truth, args.seed)
    screening.write_submissions_jsonl(submissions, args.out)
    print(f"simulated {len(submissions)} submissions -> {args.out}")
    return 0


def cmd_screen(args: argparse.Namespace) -> int:
    manifests, records, config = _load_campaign(args.campaign)
    condition_of = {r.id: r.condition for r in records}
    submissions = screening.read_submissions_jsonl(args.submissions)
    report = screening.screen_campaign(submissions, manifests, config, condition_of)
    screening.write_votes_csv(report.votes, args.votes_out)
    if args.report_out:
        screening.write_screening_report(report, args.report_out)
    print(
        f"screened {report.n_accepted + report.n_rejected} submissions: "
        f"{report.n_accepted} accepted, {report.n_rejected} rejected, "
        f"{len(report.votes)} votes -> {args.votes_out}"
    )
    return 0


def _condition_scores_from_votes(path: str) -> list[metrics.ConditionScore]:
    votes = screening.read_votes_csv(path)
    return metrics.aggregate_condition(votes).condition_scores


def cmd_report_rank(args: argparse.Namespace) -> int:
    table = analysis.challenge_table(_condition_scores_from_votes(args.votes))
    if args.csv_out:
        analysis.write_ranking_csv(table, args.csv_out)
        print(f"wrote {args.csv_out}")
    text = analysis.format_ranking_text(table)
    if args.text_out:
        Path(args.text_out).write_text(text)
        print(f"wrote {args.text_out}")
    if not args.csv_out and not args.text_out:
        print(text, end="")
    return 0


def cmd_report_correlate(args: argparse.Namespace) -> int:
    votes = screening.read_votes_csv(args.votes)
    scale = Scale(args.scale)
    objective_all = metrics.load_objective_scores_csv(args.objective)
    if args.metric not in objective_all:
        raise ValueError(f"metric {args.metric!r} not in {args.objective}")
    objective = objective_all[args.metric]

    agg = metrics.aggregate_condition(votes)
    if args.level == "clip":
        subjective = {
            c.clip_id: c.mean for c in agg.clip_scores if c.scale == scale
        }
        pair = f"{scale.value}~{args.metric} (clip)"
    else:
        subjective = analysis.condition_means(agg.condition_scores, scale)
        clip_condition = {v.clip_id: v.condition_id for v in votes}
        grouped: dict[str, list[float]] = defaultdict(list)
        for clip_id, value in objective.items():
            if clip_id in clip_condition:
                grouped[clip_condition[clip_id]].append(value)
        objective = {cond: float(np.mean(vals)) for cond, vals in grouped.items()}
        pair = f"{scale.value}~{args.metric} (condition)"

    report = analysis.subjective_objective_correlation(subjective, objective, pair)
    if args.csv_out:
        analysis.write_correlations_csv([report], args.csv_out)
        print(f"wrote {args.csv_out}")
    print(f"{report.pair_name}: n={report.n} pcc={report.pcc:.4f} srcc={report.srcc:.4f}")
    return 0


def cmd_report_repro(args: argparse.Namespace) -> int:
    runs = [_condition_scores_from_votes(path) for path in args.votes]
    reports = analysis.cross_run_reproducibility(runs)
    if args.csv_out:
        analysis.write_correlations_csv(reports, args.csv_out)
        print(f"wrote {args.csv_out}")
    for r in reports:
        print(f"{r.pair_name}: n={r.n} pcc={r.pcc:.4f} srcc={r.srcc:.4f}")
    return 0


def resolve_port(cli_port: int) -> int:
    """Environment variable wins over the command-line flag."""
    env_port = os.environ.get(PORT_ENV_VAR)
    return int(env_port) if env_port is not None else cli_port


def cmd_serve(args: argparse.Namespace) -> int:
    from . import server

    port = resolve_port(args.port)
    print(f"serving campaign {args.campaign} on {args.host}:{port}")
    server.serve(args.campaign, port=port, host=args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="echoeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="synthesize stimuli from R_in/S_out WAV pairs")
    p.add_argument("--scenario", required=True, choices=[s.value for s in Scenario])
    p.add_argument("--r-in", required=True, help="directory of far-end loopback WAVs")
    p.add_argument("--s-out", required=True, help="directory of AEC output WAVs")
    p.add_argument("--out", required=True)
    p.add_argument("--delay-ms", type=float, default=600.0)
    p.add_argument("--loopback-ear", choices=["left", "right"], default="left")
    p.add_argument("--condition", default=None, help="condition label (default: out dir name)")
    p.add_argument("--bit-depth", type=int, choices=[16, 32], default=16)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("build", help="generate task manifests from a stimulus manifest")
    p.add_argument("--corpus", required=True, help="stimulus manifest.csv (all servable clips)")
    p.add_argument("--votes", type=int, default=10, help="votes targeted per clip")
    p.add_argument("--task-size", type=int, default=None, help="rating clips per task")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="campaign directory to create")
    p.add_argument("--trapping", required=True, help="CSV: clip_id,expected,scale")
    p.add_argument("--gold", default=None, help="CSV: clip_id,expected,scale,tolerance")
    p.add_argument("--gold-per-task", type=int, default=1)
    p.add_argument("--single-question", action="store_true")
    p.add_argument("--campaign-id", default="camp")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("simulate", help="synthetic raters complete every task once")
    p.add_argument("--campaign", required=True)
    p.add_argument("--config", required=True, help="population + truth JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="submissions JSONL to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("screen", help="validate submissions and extract votes")
    p.add_argument("--campaign", required=True)
    p.add_argument("--submissions", required=True, help="submissions JSONL")
    p.add_argument("--votes-out", required=True, help="accepted-votes CSV to write")
    p.add_argument("--report-out", default=None, help="screening report JSON to write")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("report", help="rankings, correlations, reproducibility")
    rsub = p.add_subparsers(dest="report_command", required=True)

    r = rsub.add_parser("rank", help="challenge-style ranking table")
    r.add_argument("--votes", required=True, help="accepted-votes CSV")
    r.add_argument("--csv-out", default=None)
    r.add_argument("--text-out", default=None)
    r.set_defaults(func=cmd_report_rank)

    r = rsub.add_parser("correlate", help="subjective vs objective metric")
    r.add_argument("--votes", required=True, help="accepted-votes CSV")
    r.add_argument("--objective", required=True, help="CSV: clip_id,metric_name,value")
    r.add_argument("--metric", required=True)
    r.add_argument("--scale", default=Scale.ECHO_DMOS.value, choices=[s.value for s in Scale])
    r.add_argument("--level", choices=["clip", "condition"], default="clip")
    r.add_argument("--csv-out", default=None)
    r.set_defaults(func=cmd_report_correlate)

    r = rsub.add_parser("repro", help="pairwise PCC/SRCC across repeated runs")
    r.add_argument("--votes", nargs="+", required=True, help="one accepted-votes CSV per run")
    r.add_argument("--csv-out", default=None)
    r.set_defaults(func=cmd_report_repro)

    p = sub.add_parser("serve", help="run the campaign HTTP server")
    p.add_argument("--campaign", required=True)
    p.add_argument("--port", type=int, default=8000,
                   help=f"TCP port (overridden by ${PORT_ENV_VAR} when set)")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        taskbuilder.EmptyCorpus,
        taskbuilder.InsufficientTrappingPool,
        screening.ManifestMismatch,
        screening.SchemaInvalid,
        screening.CountMismatch,
        screening.NoTrials,
        ratersim.MissingTruth,
        analysis.TooFewPairs,
        analysis.ConditionMismatch,
        metrics.EmptyGroup,
        metrics.LengthMismatch,
        metrics.DegenerateInput,
    ) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
