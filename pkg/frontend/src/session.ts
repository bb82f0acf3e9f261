// One rater working one task: section progress, per-clip playback state
// and collected scores. The rules that protect data quality live here,
// not in the UI:
//
// - a clip can be scored only after it played to completion (multi-scale
//   tasks require one full replay per additional scale), except that a
//   playback failure unlocks scoring and is reported in the submission;
// - the rating section is unreachable until every server-flagged check
//   section is finished;
// - the submission document always validates against the wire schema,
//   with answers in manifest clip order and manifest scale order.

import {
  ClientConfig,
  ScaleId,
  SubmissionDocument,
  SubmissionSchema,
  TaskDocument,
  TRIPLET_PATTERN,
  SCORE_MAX,
  SCORE_MIN,
} from "./schema.js";

export type Section = "qualification" | "setup" | "training" | "rating" | "done";

interface ClipState {
  completedPlays: number;
  failed: boolean;
  listenS: number;
}

export class SessionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SessionError";
  }
}

export class ClientSession {
  private readonly startedAt: number;
  private readonly clipState = new Map<string, ClipState>();
  private readonly scores = new Map<string, number>(); // "clip scale"
  private readonly tripletAnswers: (string | null)[];
  private readonly environmentPicks: (number | null)[];
  private readonly trainingPlayed = new Set<string>();

  constructor(
    readonly workerId: string,
    readonly task: TaskDocument,
    readonly config: ClientConfig,
    private readonly now: () => number = () => Date.now() / 1000,
  ) {
    this.startedAt = this.now();
    this.tripletAnswers = config.qualification_clips.map(() => null);
    this.environmentPicks = config.environment_trials.map(() => null);
    for (const clip of task.clips) {
      this.clipState.set(clip, { completedPlays: 0, failed: false, listenS: 0 });
    }
  }

  /** Sections this task walks through, in fixed order. */
  sections(): Section[] {
    const flags = this.task.section_flags;
    const out: Section[] = [];
    if (flags.qualification) out.push("qualification");
    if (flags.setup) out.push("setup");
    if (flags.training) out.push("training");
    out.push("rating");
    return out;
  }

  /** First unfinished section; "done" when everything is answered. */
  currentSection(): Section {
    for (const section of this.sections()) {
      if (!this.sectionComplete(section)) return section;
    }
    return "done";
  }

  sectionComplete(section: Section): boolean {
    switch (section) {
      case "qualification":
        return this.tripletAnswers.every((a) => a !== null);
      case "setup":
        return this.environmentPicks.every((p) => p !== null);
      case "training":
        return this.config.training_clips.every((c) => this.trainingPlayed.has(c));
      case "rating":
        return this.task.clips.every((clip) =>
          this.task.scales.every((scale) => this.scores.has(key(clip, scale))),
        );
      case "done":
        return true;
    }
  }

  // --- qualification ---------------------------------------------------------

  /** The server grades the entries; the client only checks the format. */
  recordTripletAnswer(index: number, entry: string): void {
    if (index < 0 || index >= this.tripletAnswers.length) {
      throw new SessionError(`no qualification trial ${index}`);
    }
    const cleaned = entry.trim();
    if (!TRIPLET_PATTERN.test(cleaned)) {
      throw new SessionError("enter exactly the three digits you heard");
    }
    this.tripletAnswers[index] = cleaned;
  }

  /** Recorded entry for one trial, for re-rendering; null when unanswered. */
  tripletAnswer(index: number): string | null {
    return this.tripletAnswers[index] ?? null;
  }

  // --- setup -----------------------------------------------------------------

  recordEnvironmentPick(index: number, option: number): void {
    const trial = this.config.environment_trials[index];
    if (trial === undefined) throw new SessionError(`no hardware-check trial ${index}`);
    if (!Number.isInteger(option) || option < 0 || option >= trial.options.length) {
      throw new SessionError(`trial ${index} has no option ${option}`);
    }
    this.environmentPicks[index] = option;
  }

  environmentPick(index: number): number | null {
    return this.environmentPicks[index] ?? null;
  }

  // --- training --------------------------------------------------------------

  recordTrainingPlayback(clipId: string): void {
    if (!this.config.training_clips.includes(clipId)) {
      throw new SessionError(`${clipId} is not a training clip`);
    }
    this.trainingPlayed.add(clipId);
  }

  hasTrainingPlayed(clipId: string): boolean {
    return this.trainingPlayed.has(clipId);
  }

  // --- playback bookkeeping ---------------------------------------------------

  playbackFinished(clipId: string, durationS: number): void {
    const state = this.mustClipState(clipId);
    state.completedPlays += 1;
    state.listenS += Math.max(0, durationS);
  }

  playbackFailed(clipId: string): void {
    this.mustClipState(clipId).failed = true;
  }

  completedPlays(clipId: string): number {
    return this.mustClipState(clipId).completedPlays;
  }

  // --- rating ----------------------------------------------------------------

  /**
   * Whether the scale at this position is open for scoring: each scale
   * costs one full listen, so scale i unlocks after i+1 completed plays.
   * A failed playback unlocks all scales (and is reported as such).
   */
  canRate(clipId: string, scaleIndex: number): boolean {
    if (this.currentSection() !== "rating") return false;
    if (scaleIndex < 0 || scaleIndex >= this.task.scales.length) return false;
    const state = this.mustClipState(clipId);
    return state.failed || state.completedPlays >= scaleIndex + 1;
  }

  setScore(clipId: string, scale: ScaleId, score: number): void {
    const scaleIndex = this.task.scales.indexOf(scale);
    if (scaleIndex < 0) throw new SessionError(`this task does not ask about ${scale}`);
    if (!this.canRate(clipId, scaleIndex)) {
      throw new SessionError(`listen to ${clipId} before rating it`);
    }
    if (!Number.isInteger(score) || score < SCORE_MIN || score > SCORE_MAX) {
      throw new SessionError(`score must be an integer in [${SCORE_MIN}, ${SCORE_MAX}]`);
    }
    this.scores.set(key(clipId, scale), score);
  }

  scoreFor(clipId: string, scale: ScaleId): number | undefined {
    return this.scores.get(key(clipId, scale));
  }

  // --- submission ------------------------------------------------------------

  buildSubmission(): SubmissionDocument {
    if (this.currentSection() !== "done") {
      throw new SessionError(`section ${this.currentSection()} is not finished`);
    }
    const answers = this.task.clips.flatMap((clip) => {
      const state = this.mustClipState(clip);
      return this.task.scales.map((scale) => ({
        clip_id: clip,
        scale,
        score: this.scores.get(key(clip, scale))!,
        playback_complete: !state.failed,
        listen_duration_s: state.listenS,
      }));
    });
    const doc: SubmissionDocument = {
      worker_id: this.workerId,
      task_id: this.task.task_id,
      answers,
      started_at: this.startedAt,
      submitted_at: this.now(),
    };
    if (this.task.section_flags.qualification) {
      doc.qualification_results = this.tripletAnswers.map((a) => a!);
    }
    if (this.task.section_flags.setup) {
      doc.setup_results = this.environmentPicks.map((p) => p!);
    }
    return SubmissionSchema.parse(doc);
  }

  private mustClipState(clipId: string): ClipState {
    const state = this.clipState.get(clipId);
    if (state === undefined) throw new SessionError(`${clipId} is not in this task`);
    return state;
  }
}

function key(clipId: string, scale: ScaleId): string {
  return `${clipId} ${scale}`;
}
