"""Report builders: challenge ranking, metric correlation, reproducibility.

The ranking table mirrors the challenge format: one row per model with
near-end MOS, far-end echo DMOS, double-talk echo DMOS, double-talk
other DMOS, and Overall = unweighted mean of the four, sorted best
first. Correlation reports pair subjective scores with objective metric
values per clip, or condition means across runs, via metrics.correlate.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .metrics import ConditionScore, correlate
from .scales import Scale, Scenario

RANKING_FIELDS = ["model_id", "st_ne_mos", "st_fe_echo_dmos", "dt_echo_dmos", "dt_other_dmos", "overall"]
CORRELATION_FIELDS = ["pair", "n", "pcc", "srcc", "excluded_left", "excluded_right"]

# (scenario, scale) -> ranking column
_COLUMNS = {
    (Scenario.NEAR_END_SINGLE_TALK, Scale.OVERALL_MOS): "st_ne_mos",
    (Scenario.FAR_END_SINGLE_TALK, Scale.ECHO_DMOS): "st_fe_echo_dmos",
    (Scenario.DOUBLE_TALK, Scale.ECHO_DMOS): "dt_echo_dmos",
    (Scenario.DOUBLE_TALK, Scale.OTHER_DMOS): "dt_other_dmos",
}


class TooFewPairs(Exception):
    pass


class ConditionMismatch(Exception):
    pass


@dataclass(frozen=True)
class RankingRow:
    model_id: str
    st_ne_mos: float
    st_fe_echo_dmos: float
    dt_echo_dmos: float
    dt_other_dmos: float
    overall: float


@dataclass(frozen=True)
class IncompleteModel:
    """A model missing ranking columns; reported, never silently dropped."""

    model_id: str
    missing: tuple[str, ...]


@dataclass(frozen=True)
class RankingTable:
    rows: tuple[RankingRow, ...]  # sorted by overall descending, stable ties
    incomplete: tuple[IncompleteModel, ...] = ()


@dataclass(frozen=True)
class CorrelationReport:
    pair_name: str
    n: int
    pcc: float
    srcc: float
    excluded_left: int = 0
    excluded_right: int = 0


def challenge_table(scores: Iterable[ConditionScore]) -> RankingTable:
    """Rank models by the mean of the four subjective metrics.

    ``condition_id`` is the model label. Scores outside the four ranking
    (scenario, scale) cells are ignored; models missing any cell go to
    ``incomplete``. Tie order follows first appearance in the input.
    """
    cells: dict[str, dict[str, float]] = {}
    order: list[str] = []
    for s in scores:
        column = _COLUMNS.get((s.scenario, s.scale))
        if column is None:
            continue
        if s.condition_id not in cells:
            cells[s.condition_id] = {}
            order.append(s.condition_id)
        if column in cells[s.condition_id]:
            raise ValueError(f"duplicate {column} score for model {s.condition_id!r}")
        cells[s.condition_id][column] = s.mean

    rows = []
    incomplete = []
    metric_columns = RANKING_FIELDS[1:-1]
    for model_id in order:
        have = cells[model_id]
        missing = tuple(c for c in metric_columns if c not in have)
        if missing:
            incomplete.append(IncompleteModel(model_id, missing))
            continue
        values = [have[c] for c in metric_columns]
        rows.append(RankingRow(model_id, *values, overall=sum(values) / 4.0))

    rows.sort(key=lambda r: -r.overall)  # stable: ties keep input order
    return RankingTable(rows=tuple(rows), incomplete=tuple(incomplete))


def subjective_objective_correlation(
    subjective: Mapping[str, float],
    objective: Mapping[str, float],
    pair_name: str = "subjective~objective",
) -> CorrelationReport:
    """PCC and SRCC over the inner join of two per-key score mappings.

    Keys are clip ids for clip-level reports or condition ids for
    condition-level ones; entries present on only one side are excluded
    and counted. Needs at least 3 joined pairs.
    """
    keys = sorted(set(subjective) & set(objective))
    if len(keys) < 3:
        raise TooFewPairs(f"{pair_name}: only {len(keys)} joined pairs")
    left = [subjective[k] for k in keys]
    right = [objective[k] for k in keys]
    return CorrelationReport(
        pair_name=pair_name,
        n=len(keys),
        pcc=correlate(left, right, "pearson"),
        srcc=correlate(left, right, "spearman"),
        excluded_left=len(subjective) - len(keys),
        excluded_right=len(objective) - len(keys),
    )


def condition_means(scores: Iterable[ConditionScore], scale: Scale | None = None) -> dict[str, float]:
    """Condition-level mean vector, optionally restricted to one scale.

    Keys are "condition_id/scale" (or bare condition_id when a single
    scale is selected), ready for correlation joins.
    """
    out: dict[str, float] = {}
    for s in scores:
        if scale is not None and s.scale != scale:
            continue
        key = s.condition_id if scale is not None else f"{s.condition_id}/{s.scale.value}"
        if key in out:
            raise ValueError(f"duplicate condition score for {key!r}")
        out[key] = s.mean
    return out


def cross_run_reproducibility(runs: Sequence[Iterable[ConditionScore]]) -> list[CorrelationReport]:
    """Pairwise PCC/SRCC between condition-mean vectors of repeated runs.

    Runs must cover identical (condition, scenario, scale) cells; one
    report per unordered run pair, named "run{i}~run{j}".
    """
    if len(runs) < 2:
        raise ValueError(f"need at least 2 runs, got {len(runs)}")
    vectors = []
    for run in runs:
        vec: dict[tuple[str, str, str], float] = {}
        for s in run:
            key = (s.condition_id, s.scenario.value, s.scale.value)
            if key in vec:
                raise ValueError(f"duplicate condition score for {key}")
            vec[key] = s.mean
        vectors.append(vec)

    keys = sorted(vectors[0])
    for i, vec in enumerate(vectors[1:], start=1):
        if sorted(vec) != keys:
            raise ConditionMismatch(f"run 0 and run {i} cover different conditions")
    if len(keys) < 3:
        raise TooFewPairs(f"only {len(keys)} shared conditions")

    reports = []
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            a = [vectors[i][k] for k in keys]
            b = [vectors[j][k] for k in keys]
            reports.append(CorrelationReport(
                pair_name=f"run{i}~run{j}",
                n=len(keys),
                pcc=correlate(a, b, "pearson"),
                srcc=correlate(a, b, "spearman"),
            ))
    return reports


# --- output ------------------------------------------------------------------

def write_ranking_csv(table: RankingTable, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RANKING_FIELDS)
        for r in table.rows:
            writer.writerow([
                r.model_id,
                f"{r.st_ne_mos:.6f}",
                f"{r.st_fe_echo_dmos:.6f}",
                f"{r.dt_echo_dmos:.6f}",
                f"{r.dt_other_dmos:.6f}",
                f"{r.overall:.6f}",
            ])


def format_ranking_text(table: RankingTable) -> str:
    """Fixed-width table for terminals and plain-text reports."""
    header = ["rank"] + RANKING_FIELDS
    lines = [
        [str(i + 1), r.model_id] + [
            f"{v:.3f}"
            for v in (r.st_ne_mos, r.st_fe_echo_dmos, r.dt_echo_dmos, r.dt_other_dmos, r.overall)
        ]
        for i, r in enumerate(table.rows)
    ]
    widths = [max(len(h), *(len(row[c]) for row in lines)) if lines else len(h)
              for c, h in enumerate(header)]
    def fmt(row: list[str]) -> str:
        return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
    out = [fmt(header), fmt(["-" * w for w in widths])]
    out.extend(fmt(row) for row in lines)
    for inc in table.incomplete:
        out.append(f"excluded {inc.model_id}: missing {', '.join(inc.missing)}")
    return "\n".join(out) + "\n"


def write_correlations_csv(reports: Iterable[CorrelationReport], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CORRELATION_FIELDS)
        for r in reports:
            writer.writerow([
                r.pair_name, r.n, f"{r.pcc:.6f}", f"{r.srcc:.6f}", r.excluded_left, r.excluded_right,
            ])
