// DOM rendering for the four sections. The UI is a dumb view over
// ClientSession: every user event mutates the session and then calls
// refresh(), which re-renders the current section. Raters only ever see
// clip play order and question wording; condition labels and check
// markers never reach this layer (the server already strips them).

import { ClipPlayer } from "./audio.js";
import { labelsForScale, questionText } from "./questions.js";
import { ScaleId, SCORE_MAX, SCORE_MIN } from "./schema.js";
import { ClientSession, Section } from "./session.js";

export interface UiDeps {
  player: ClipPlayer;
  refresh: () => void;
  /** Called once the rating section is complete. */
  onComplete: () => void;
}

export function renderSession(root: HTMLElement, session: ClientSession, deps: UiDeps): void {
  const section = session.currentSection();
  root.textContent = "";
  switch (section) {
    case "qualification":
      renderQualification(root, session, deps);
      break;
    case "setup":
      renderSetup(root, session, deps);
      break;
    case "training":
      renderTraining(root, session, deps);
      break;
    case "rating":
      renderRating(root, session, deps);
      break;
    case "done":
      deps.onComplete();
      break;
  }
}

function heading(root: HTMLElement, session: ClientSession, section: Section, title: string): void {
  const h = root.ownerDocument.createElement("h2");
  h.textContent = title;
  root.appendChild(h);
  const text = session.config.instructions?.[section];
  if (text) {
    const p = root.ownerDocument.createElement("p");
    p.className = "instructions";
    p.textContent = text;
    root.appendChild(p);
  }
}

function playButton(
  root: HTMLElement,
  clipId: string,
  label: string,
  deps: UiDeps,
  onResult: (completed: boolean, durationS: number) => void,
): HTMLButtonElement {
  const button = root.ownerDocument.createElement("button");
  button.type = "button";
  button.className = "play";
  button.dataset.clip = clipId;
  button.textContent = label;
  button.addEventListener("click", () => {
    button.disabled = true;
    void deps.player.play(clipId).then((result) => {
      button.disabled = false;
      onResult(result.completed, result.durationS);
      deps.refresh();
    });
  });
  root.appendChild(button);
  return button;
}

// --- qualification: type the three digits heard in each trial ---------------

export function renderQualification(root: HTMLElement, session: ClientSession, deps: UiDeps): void {
  heading(root, session, "qualification", "Hearing check");
  session.config.qualification_clips.forEach((clipId, index) => {
    const doc = root.ownerDocument;
    const trial = doc.createElement("div");
    trial.className = "triplet-trial";
    trial.dataset.trial = String(index);
    playButton(trial, clipId, `Play digits ${index + 1}`, deps, () => {});

    const input = doc.createElement("input");
    input.type = "text";
    input.inputMode = "numeric";
    input.maxLength = 3;
    input.value = session.tripletAnswer(index) ?? "";
    input.setAttribute("aria-label", `digits heard in trial ${index + 1}`);
    const error = doc.createElement("span");
    error.className = "error";
    input.addEventListener("change", () => {
      try {
        session.recordTripletAnswer(index, input.value);
      } catch (e) {
        // leave the typed text in place so the rater can correct it
        error.textContent = e instanceof Error ? e.message : String(e);
        return;
      }
      error.textContent = "";
      deps.refresh();
    });
    trial.appendChild(input);
    trial.appendChild(error);
    root.appendChild(trial);
  });
}

// --- setup: hardware questions with fixed options ---------------------------

export function renderSetup(root: HTMLElement, session: ClientSession, deps: UiDeps): void {
  heading(root, session, "setup", "Listening setup check");
  session.config.environment_trials.forEach((trial, index) => {
    const doc = root.ownerDocument;
    const block = doc.createElement("fieldset");
    block.className = "environment-trial";
    block.dataset.trial = String(index);
    const legend = doc.createElement("legend");
    legend.textContent = trial.prompt;
    block.appendChild(legend);
    if (trial.clip_id) playButton(block, trial.clip_id, "Play sample", deps, () => {});
    trial.options.forEach((option, optionIndex) => {
      const label = doc.createElement("label");
      const radio = doc.createElement("input");
      radio.type = "radio";
      radio.name = `environment-${index}`;
      radio.value = String(optionIndex);
      radio.checked = session.environmentPick(index) === optionIndex;
      radio.addEventListener("change", () => {
        session.recordEnvironmentPick(index, optionIndex);
        deps.refresh();
      });
      label.appendChild(radio);
      label.appendChild(doc.createTextNode(option));
      block.appendChild(label);
    });
    root.appendChild(block);
  });
}

// --- training: anchor samples spanning the scales ----------------------------

export function renderTraining(root: HTMLElement, session: ClientSession, deps: UiDeps): void {
  heading(root, session, "training", "Training samples");
  session.config.training_clips.forEach((clipId, index) => {
    const block = root.ownerDocument.createElement("div");
    block.className = "training-clip";
    const played = session.hasTrainingPlayed(clipId);
    const label = `${played ? "Replay" : "Play"} training sample ${index + 1}`;
    playButton(block, clipId, label, deps, (completed) => {
      if (completed) session.recordTrainingPlayback(clipId);
    });
    root.appendChild(block);
  });
}

// --- rating: play each clip, answer each scale in manifest order -------------

export function renderRating(root: HTMLElement, session: ClientSession, deps: UiDeps): void {
  heading(root, session, "rating", "Ratings");
  const doc = root.ownerDocument;
  if (session.task.scenario === "dt") {
    // Conversation framing: the rater sits between the two talkers, one
    // voice per ear. The illustration slot is filled by campaign styling.
    const framing = doc.createElement("div");
    framing.className = "dt-framing";
    const slot = doc.createElement("div");
    slot.className = "illustration-slot";
    const caption = doc.createElement("p");
    caption.textContent =
      "You are positioned in the center of the communication: " +
      "Person 1 is on one side, Person 2 on the other. Use headphones.";
    framing.appendChild(slot);
    framing.appendChild(caption);
    root.appendChild(framing);
  }

  session.task.clips.forEach((clipId, clipIndex) => {
    const block = doc.createElement("section");
    block.className = "clip";
    block.dataset.clip = clipId;
    const title = doc.createElement("h3");
    title.textContent = `Sample ${clipIndex + 1} of ${session.task.clips.length}`;
    block.appendChild(title);

    const plays = session.completedPlays(clipId);
    const needed = session.task.scales.length;
    playButton(
      block,
      clipId,
      plays === 0 ? "Play sample" : `Listen again (${plays}/${needed})`,
      deps,
      (completed, durationS) => {
        if (completed) session.playbackFinished(clipId, durationS);
        else session.playbackFailed(clipId);
      },
    );

    session.task.scales.forEach((scale, scaleIndex) => {
      block.appendChild(scaleFieldset(doc, session, clipId, scale, scaleIndex, deps));
    });
    root.appendChild(block);
  });
}

function scaleFieldset(
  doc: Document,
  session: ClientSession,
  clipId: string,
  scale: ScaleId,
  scaleIndex: number,
  deps: UiDeps,
): HTMLFieldSetElement {
  const fieldset = doc.createElement("fieldset");
  fieldset.className = "scale";
  fieldset.dataset.scale = scale;
  const open = session.canRate(clipId, scaleIndex);
  if (!open) fieldset.setAttribute("disabled", "");

  const legend = doc.createElement("legend");
  legend.textContent = questionText(session.task.scenario, scale);
  fieldset.appendChild(legend);

  const labels = labelsForScale(scale);
  const chosen = session.scoreFor(clipId, scale);
  for (let score = SCORE_MIN; score <= SCORE_MAX; score++) {
    const label = doc.createElement("label");
    const radio = doc.createElement("input");
    radio.type = "radio";
    radio.name = `${clipId}-${scale}`;
    radio.value = String(score);
    radio.disabled = !open;
    radio.checked = chosen === score;
    radio.addEventListener("change", () => {
      session.setScore(clipId, scale, score);
      deps.refresh();
    });
    label.appendChild(radio);
    label.appendChild(doc.createTextNode(`${score}: ${labels[score]}`));
    fieldset.appendChild(label);
  }
  return fieldset;
}
