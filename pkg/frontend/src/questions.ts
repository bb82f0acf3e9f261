// Survey wording: one question per (scenario, scale) pair and the label
// set for each scale. Must stay word-for-word in sync with the server
// package so reports and the UI describe the same thing.

import { ScaleId, ScenarioId } from "./schema.js";

export const ACR_LABELS: Record<number, string> = {
  1: "Bad",
  2: "Poor",
  3: "Fair",
  4: "Good",
  5: "Excellent",
};

export const DEGRADATION_LABELS: Record<number, string> = {
  1: "Very annoying",
  2: "Annoying",
  3: "Slightly annoying",
  4: "Perceptible but not annoying",
  5: "Imperceptible",
};

const QUESTIONS: Record<string, string> = {
  "ne_st/overall_mos": "How do you rate the overall quality of this speech sample?",
  "fe_st/echo_dmos":
    "How would you rate the degradation from acoustic echo in this speech sample?",
  "fe_st/other_dmos":
    "How would you judge other degradations (noise, distortions, etc.) of this speech sample?",
  "dt/echo_dmos": "How would you judge the degradation from the echo of Person 1's voice?",
  "dt/other_dmos":
    "How would you judge degradations (missing audio, distortions, cut-outs) of Person 2's voice?",
};

export function questionText(scenario: ScenarioId, scale: ScaleId): string {
  const text = QUESTIONS[`${scenario}/${scale}`];
  if (text === undefined) {
    throw new Error(`scale ${scale} is not asked in scenario ${scenario}`);
  }
  return text;
}

export function labelsForScale(scale: ScaleId): Record<number, string> {
  return scale === "overall_mos" ? ACR_LABELS : DEGRADATION_LABELS;
}
