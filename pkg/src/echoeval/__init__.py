"""Subjective evaluation pipeline for acoustic-echo impairment.

Synthesizes single-talk and double-talk listening stimuli from AEC
inputs/outputs, builds and serves crowdsourcing-style rating campaigns
with trapping/gold quality control, screens submissions into accepted
votes, and reports DMOS/MOS rankings, objective-metric correlations,
and cross-run reproducibility.
"""

from .analysis import (
    ConditionMismatch,
    CorrelationReport,
    IncompleteModel,
    RankingRow,
    RankingTable,
    TooFewPairs,
    challenge_table,
    condition_means,
    cross_run_reproducibility,
    subjective_objective_correlation,
)
from .audio import (
    AudioBuffer,
    AudioError,
    MalformedWav,
    NotMono,
    SampleRateMismatch,
    UnsupportedFormat,
    delay,
    extract_channel,
    interleave_stereo,
    mix,
    read_wav,
    write_wav,
)
from .metrics import (
    AggregationResult,
    ClipScore,
    ConditionScore,
    DegenerateInput,
    EmptyGroup,
    EmptySignal,
    FramewiseErle,
    LengthMismatch,
    aggregate_condition,
    ci95_of,
    correlate,
    erle,
    erle_framewise,
    load_objective_scores_csv,
)
from .ratersim import (
    GroundTruth,
    MissingTruth,
    Rater,
    RaterKind,
    RaterProfile,
    make_population,
    simulate_run,
    simulate_task,
)
from .scales import (
    ACR_LABELS,
    DEGRADATION_LABELS,
    Scale,
    Scenario,
    labels_for_scale,
    question_text,
    scales_for_scenario,
)
from .screening import (
    ClipAnswer,
    ManifestMismatch,
    RejectReason,
    SchemaInvalid,
    ScreeningConfig,
    ScreeningReport,
    Submission,
    Verdict,
    VoteRecord,
    read_submissions_jsonl,
    read_votes_csv,
    score_digit_triplet,
    score_environment_check,
    screen_campaign,
    screen_submission,
    write_submissions_jsonl,
    write_votes_csv,
)
from .stimulus import (
    ScenarioInputs,
    Stimulus,
    StimulusRecord,
    TrappingStimulus,
    WrongScenario,
    loopback_channel,
    make_trapping_stimulus,
    prepare_directory,
    prepare_double_talk,
    prepare_far_end_single_talk,
    prepare_near_end_single_talk,
    read_manifest,
    write_manifest,
)
from .taskbuilder import (
    EmptyCorpus,
    GoldDef,
    InsufficientTrappingPool,
    SectionFlags,
    SessionState,
    TaskConfig,
    TaskManifest,
    TrappingDef,
    build_tasks,
    client_document,
    randomize_scale_order,
    read_tasks_jsonl,
    schedule_sections,
    write_tasks_jsonl,
)

__version__ = "0.1.0"
