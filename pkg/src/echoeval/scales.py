"""Scenarios, rating scales, and survey wording.

Near-end single talk is rated on a single overall-quality ACR question.
Far-end single talk and double talk use two degradation questions (echo
annoyance, other impairments), each on the degradation category scale
running from 1 "Very annoying" to 5 "Imperceptible"; means over those
scales are DMOS.
"""

from __future__ import annotations

from enum import Enum

SCORE_MIN = 1
SCORE_MAX = 5
SCORE_POINTS = SCORE_MAX - SCORE_MIN + 1


class Scenario(str, Enum):
    NEAR_END_SINGLE_TALK = "ne_st"
    FAR_END_SINGLE_TALK = "fe_st"
    DOUBLE_TALK = "dt"


class Scale(str, Enum):
    OVERALL_MOS = "overall_mos"
    ECHO_DMOS = "echo_dmos"
    OTHER_DMOS = "other_dmos"


ACR_LABELS = {1: "Bad", 2: "Poor", 3: "Fair", 4: "Good", 5: "Excellent"}

DEGRADATION_LABELS = {
    1: "Very annoying",
    2: "Annoying",
    3: "Slightly annoying",
    4: "Perceptible but not annoying",
    5: "Imperceptible",
}

QUESTIONS: dict[tuple[Scenario, Scale], str] = {
    (Scenario.NEAR_END_SINGLE_TALK, Scale.OVERALL_MOS):
        "How do you rate the overall quality of this speech sample?",
    (Scenario.FAR_END_SINGLE_TALK, Scale.ECHO_DMOS):
        "How would you rate the degradation from acoustic echo in this speech sample?",
    (Scenario.FAR_END_SINGLE_TALK, Scale.OTHER_DMOS):
        "How would you judge other degradations (noise, distortions, etc.) of this speech sample?",
    (Scenario.DOUBLE_TALK, Scale.ECHO_DMOS):
        "How would you judge the degradation from the echo of Person 1's voice?",
    (Scenario.DOUBLE_TALK, Scale.OTHER_DMOS):
        "How would you judge degradations (missing audio, distortions, cut-outs) of Person 2's voice?",
}


def scales_for_scenario(scenario: Scenario, single_question: bool = False) -> list[Scale]:
    """Canonical (pre-randomization) scale list for a scenario.

    ``single_question`` collapses the echo-bearing scenarios to the echo
    question alone, for comparing one- vs two-question surveys.
    """
    if scenario == Scenario.NEAR_END_SINGLE_TALK:
        return [Scale.OVERALL_MOS]
    if single_question:
        return [Scale.ECHO_DMOS]
    return [Scale.ECHO_DMOS, Scale.OTHER_DMOS]


def labels_for_scale(scale: Scale) -> dict[int, str]:
    return ACR_LABELS if scale == Scale.OVERALL_MOS else DEGRADATION_LABELS


def question_text(scenario: Scenario, scale: Scale) -> str:
    try:
        return QUESTIONS[(scenario, scale)]
    except KeyError:
        raise ValueError(f"scale {scale.value} is not asked in scenario {scenario.value}") from None


def validate_score(score: int) -> int:
    if not isinstance(score, (int,)) or isinstance(score, bool):
        raise ValueError(f"score must be an integer, got {score!r}")
    if not SCORE_MIN <= score <= SCORE_MAX:
        raise ValueError(f"score {score} outside [{SCORE_MIN}, {SCORE_MAX}]")
    return score
