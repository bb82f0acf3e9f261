// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";
import { ClipPlayer, PlaybackResult } from "../src/audio.js";
import { ClientConfig, TaskDocument } from "../src/schema.js";
import { ClientSession } from "../src/session.js";
import { renderSession } from "../src/ui.js";

class FakePlayer implements ClipPlayer {
  calls: string[] = [];
  failFor = new Set<string>();
  play(clipId: string): Promise<PlaybackResult> {
    this.calls.push(clipId);
    return Promise.resolve({ completed: !this.failFor.has(clipId), durationS: 2.0 });
  }
}

class ManualPlayer implements ClipPlayer {
  pending: ((r: PlaybackResult) => void)[] = [];
  play(): Promise<PlaybackResult> {
    return new Promise((resolve) => this.pending.push(resolve));
  }
}

const flush = () => new Promise((resolve) => setTimeout(resolve, 0));

function makeTask(overrides: Partial<TaskDocument> = {}): TaskDocument {
  return {
    task_id: "camp-000001",
    clips: ["c0", "c1"],
    scales: ["echo_dmos", "other_dmos"],
    scenario: "fe_st",
    pay_usd: 0.5,
    section_flags: { qualification: false, setup: false, training: false },
    lease_expires_at: 9e9,
    ...overrides,
  };
}

function makeConfig(overrides: Partial<ClientConfig> = {}): ClientConfig {
  return {
    qualification_clips: ["q0", "q1"],
    environment_trials: [
      { prompt: "Which side plays the tone?", options: ["left", "right"], clip_id: "pan0" },
      { prompt: "How many voices?", options: ["one", "two", "three"] },
    ],
    training_clips: ["t0", "t1"],
    instructions: { rating: "Rate every sample on each question." },
    ...overrides,
  };
}

function mount(task: TaskDocument, config = makeConfig(), player: ClipPlayer = new FakePlayer()) {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const session = new ClientSession("w", task, config);
  const state = { done: false };
  const refresh = () =>
    renderSession(root, session, { player, refresh, onComplete: () => (state.done = true) });
  refresh();
  return { root, session, state, player };
}

function clipBlocks(root: HTMLElement): HTMLElement[] {
  return Array.from(root.querySelectorAll("section.clip")) as HTMLElement[];
}

function scaleOrder(block: HTMLElement): (string | undefined)[] {
  return (Array.from(block.querySelectorAll("fieldset.scale")) as HTMLElement[]).map(
    (f) => f.dataset.scale,
  );
}

function radios(block: HTMLElement, scale: string): HTMLInputElement[] {
  return Array.from(
    block.querySelectorAll(`fieldset[data-scale="${scale}"] input[type="radio"]`),
  ) as HTMLInputElement[];
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("rating section rendering", () => {
  it("renders scale blocks in manifest order across randomized tasks", () => {
    const choices: [TaskDocument["scenario"], TaskDocument["scales"]][] = [
      ["ne_st", ["overall_mos"]],
      ["fe_st", ["echo_dmos", "other_dmos"]],
      ["fe_st", ["other_dmos", "echo_dmos"]],
      ["dt", ["echo_dmos", "other_dmos"]],
      ["dt", ["other_dmos", "echo_dmos"]],
    ];
    for (let seed = 0; seed < 20; seed++) {
      const rand = mulberry32(0xabcd + seed);
      const pick = choices[Math.floor(rand() * choices.length)]!;
      const clips = Array.from(
        { length: 1 + Math.floor(rand() * 8) },
        (_, i) => `s${seed}_clip_${i}`,
      );
      const task = makeTask({ scenario: pick[0], scales: pick[1], clips });
      const { root } = mount(task);

      const blocks = clipBlocks(root);
      expect(blocks.map((b) => b.dataset.clip)).toEqual(clips);
      for (const block of blocks) {
        expect(scaleOrder(block)).toEqual(task.scales);
      }
      root.remove();
    }
  });

  it("keeps every rating control disabled until playback completes", async () => {
    const { root } = mount(makeTask({ clips: ["c0"] }));
    let block = clipBlocks(root)[0]!;
    for (const scale of ["echo_dmos", "other_dmos"]) {
      const fieldset = block.querySelector(`fieldset[data-scale="${scale}"]`)!;
      expect(fieldset.hasAttribute("disabled")).toBe(true);
      for (const radio of radios(block, scale)) expect(radio.disabled).toBe(true);
    }

    (block.querySelector("button.play") as HTMLButtonElement).click();
    await flush();

    block = clipBlocks(root)[0]!;
    expect(radios(block, "echo_dmos").every((r) => !r.disabled)).toBe(true);
    expect(radios(block, "other_dmos").every((r) => r.disabled)).toBe(true);
    root.remove();
  });

  it("unlocks the second scale only after a full replay", async () => {
    const { root } = mount(makeTask({ clips: ["c0"] }));
    (clipBlocks(root)[0]!.querySelector("button.play") as HTMLButtonElement).click();
    await flush();
    (clipBlocks(root)[0]!.querySelector("button.play") as HTMLButtonElement).click();
    await flush();
    const block = clipBlocks(root)[0]!;
    expect(radios(block, "echo_dmos").every((r) => !r.disabled)).toBe(true);
    expect(radios(block, "other_dmos").every((r) => !r.disabled)).toBe(true);
    root.remove();
  });

  it("unlocks scoring when playback fails and reports the failure", async () => {
    const player = new FakePlayer();
    player.failFor.add("c0");
    const { root, session } = mount(makeTask({ clips: ["c0"] }), makeConfig(), player);
    (clipBlocks(root)[0]!.querySelector("button.play") as HTMLButtonElement).click();
    await flush();
    const block = clipBlocks(root)[0]!;
    expect(radios(block, "echo_dmos").every((r) => !r.disabled)).toBe(true);
    expect(radios(block, "other_dmos").every((r) => !r.disabled)).toBe(true);

    for (const scale of ["echo_dmos", "other_dmos"] as const) {
      const radio = radios(clipBlocks(root)[0]!, scale)[2]!;
      radio.checked = true;
      radio.dispatchEvent(new Event("change"));
    }
    const doc = session.buildSubmission();
    expect(doc.answers.every((a) => a.playback_complete === false)).toBe(true);
    root.remove();
  });

  it("disables the play button while a clip is playing", async () => {
    const player = new ManualPlayer();
    const { root } = mount(makeTask({ clips: ["c0"] }), makeConfig(), player);
    const button = clipBlocks(root)[0]!.querySelector("button.play") as HTMLButtonElement;
    button.click();
    expect(button.disabled).toBe(true);
    player.pending[0]!({ completed: true, durationS: 2 });
    await flush();
    expect((clipBlocks(root)[0]!.querySelector("button.play") as HTMLButtonElement).disabled).toBe(
      false,
    );
    root.remove();
  });

  it("never shows study-internal markers to the rater", () => {
    const clips = ["zq_trap_0", "zq_gold_1", "zq_cond_a_2"];
    const { root } = mount(makeTask({ scenario: "dt", clips }));
    const visible = root.textContent ?? "";
    expect(visible).not.toMatch(/trap|gold|cond|expected|truth/i);
    // clip ids stay in data attributes, out of the visible text
    for (const clip of clips) expect(visible).not.toContain(clip);
    expect(visible).toContain("Sample 1 of 3");
    root.remove();
  });

  it("frames double-talk tasks with the listener-in-the-middle setup", () => {
    const { root } = mount(makeTask({ scenario: "dt" }));
    expect(root.querySelector(".dt-framing .illustration-slot")).not.toBeNull();
    expect(root.textContent).toContain("center of the communication");
    const { root: feRoot } = mount(makeTask({ scenario: "fe_st" }));
    expect(feRoot.querySelector(".dt-framing")).toBeNull();
    root.remove();
    feRoot.remove();
  });
});

describe("check sections", () => {
  it("shows inline errors for malformed digit entries until corrected", () => {
    const flags = { qualification: true, setup: false, training: false };
    const { root, session } = mount(makeTask({ section_flags: flags }));
    expect(root.querySelector("h2")?.textContent).toBe("Hearing check");

    const trial = root.querySelector('[data-trial="0"]')!;
    const input = trial.querySelector("input") as HTMLInputElement;
    input.value = "12";
    input.dispatchEvent(new Event("change"));
    expect(root.querySelector('[data-trial="0"] .error')?.textContent).toMatch(/three digits/);
    expect(session.sectionComplete("qualification")).toBe(false);

    const fixed = root.querySelector('[data-trial="0"] input') as HTMLInputElement;
    fixed.value = "135";
    fixed.dispatchEvent(new Event("change"));
    expect(root.querySelector('[data-trial="0"] .error')?.textContent).toBe("");
    // the recorded answer survives the re-render
    expect((root.querySelector('[data-trial="0"] input') as HTMLInputElement).value).toBe("135");
    root.remove();
  });

  it("walks qualification, setup, training and rating to completion", async () => {
    const task = makeTask({
      clips: ["c0"],
      scales: ["echo_dmos"],
      section_flags: { qualification: true, setup: true, training: true },
    });
    const { root, state } = mount(task);

    for (const [i, digits] of [["0", "135"], ["1", "790"]] as const) {
      const input = root.querySelector(`[data-trial="${i}"] input`) as HTMLInputElement;
      input.value = digits;
      input.dispatchEvent(new Event("change"));
    }
    expect(root.querySelector("h2")?.textContent).toBe("Listening setup check");

    for (const i of ["0", "1"]) {
      const radio = root.querySelector(
        `fieldset[data-trial="${i}"] input[type="radio"]`,
      ) as HTMLInputElement;
      radio.checked = true;
      radio.dispatchEvent(new Event("change"));
    }
    expect(root.querySelector("h2")?.textContent).toBe("Training samples");

    const trainingButtons = Array.from(root.querySelectorAll("button.play")) as HTMLButtonElement[];
    expect(trainingButtons).toHaveLength(2);
    for (const button of trainingButtons) button.click();
    await flush();
    expect(root.querySelector("h2")?.textContent).toBe("Ratings");
    expect(root.textContent).toContain("Rate every sample on each question.");

    (root.querySelector("button.play") as HTMLButtonElement).click();
    await flush();
    const radio = radios(clipBlocks(root)[0]!, "echo_dmos")[4]!;
    radio.checked = true;
    radio.dispatchEvent(new Event("change"));
    expect(state.done).toBe(true);
    root.remove();
  });
});
