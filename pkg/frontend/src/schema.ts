// Wire contract with the task server. Parsing every inbound document and
// validating every outbound one here keeps the rest of the client free of
// defensive checks.

import { z } from "zod";

export const SCALES = ["overall_mos", "echo_dmos", "other_dmos"] as const;
export type ScaleId = (typeof SCALES)[number];

export const SCENARIOS = ["ne_st", "fe_st", "dt"] as const;
export type ScenarioId = (typeof SCENARIOS)[number];

export const SCORE_MIN = 1;
export const SCORE_MAX = 5;

export const SectionFlagsSchema = z.object({
  qualification: z.boolean(),
  setup: z.boolean(),
  training: z.boolean(),
});
export type SectionFlags = z.infer<typeof SectionFlagsSchema>;

// What GET /api/task/next returns. The server never includes expected
// answers or trapping/gold markers; unknown extra keys are dropped.
export const TaskDocumentSchema = z.object({
  task_id: z.string().min(1),
  clips: z.array(z.string().min(1)).min(1),
  scales: z.array(z.enum(SCALES)).min(1),
  scenario: z.enum(SCENARIOS),
  pay_usd: z.number().nonnegative(),
  section_flags: SectionFlagsSchema,
  lease_expires_at: z.number(),
});
export type TaskDocument = z.infer<typeof TaskDocumentSchema>;

export const ClipAnswerSchema = z.object({
  clip_id: z.string().min(1),
  scale: z.enum(SCALES),
  score: z.number().int().min(SCORE_MIN).max(SCORE_MAX),
  playback_complete: z.boolean(),
  listen_duration_s: z.number().nonnegative(),
});
export type ClipAnswer = z.infer<typeof ClipAnswerSchema>;

// The server accepts any strings for qualification entries; the client
// promises clean three-digit answers, so the outbound schema is stricter.
export const TRIPLET_PATTERN = /^\d{3}$/;

export const SubmissionSchema = z.object({
  worker_id: z.string().min(1),
  task_id: z.string().min(1),
  answers: z.array(ClipAnswerSchema),
  qualification_results: z.array(z.string().regex(TRIPLET_PATTERN)).optional(),
  setup_results: z.array(z.number().int().nonnegative()).optional(),
  started_at: z.number(),
  submitted_at: z.number(),
});
export type SubmissionDocument = z.infer<typeof SubmissionSchema>;

export const SubmissionAckSchema = z.object({
  accepted_for_processing: z.boolean(),
  submission_id: z.string(),
  duplicate: z.boolean(),
});
export type SubmissionAck = z.infer<typeof SubmissionAckSchema>;

// Deploy-time configuration served next to the page (not by the API):
// which clips drive the qualification and training sections and what the
// hardware-check trials ask. Counts must match the campaign's server-side
// answer keys.
export const EnvironmentTrialSchema = z.object({
  prompt: z.string().min(1),
  options: z.array(z.string().min(1)).min(2),
  clip_id: z.string().min(1).optional(),
});
export type EnvironmentTrial = z.infer<typeof EnvironmentTrialSchema>;

export const ClientConfigSchema = z.object({
  qualification_clips: z.array(z.string().min(1)),
  environment_trials: z.array(EnvironmentTrialSchema),
  training_clips: z.array(z.string().min(1)),
  instructions: z.record(z.string(), z.string()).optional(),
});
export type ClientConfig = z.infer<typeof ClientConfigSchema>;
