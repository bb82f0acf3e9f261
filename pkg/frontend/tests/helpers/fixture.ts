// Shared live-campaign fixture: synthesize a tiny servable corpus, build
// a campaign with the echoeval CLI, and run the real HTTP server on a
// caller-chosen port.
import { execFileSync, spawn, ChildProcess } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { ClientConfig } from "../../src/schema.js";

export const QUAL_TRUTH = ["135", "790", "246"];
export const ENV_TRUTH = [0, 1];

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Minimal PCM16 mono WAV writer for synthetic test clips. */
export function writeWav(filePath: string, samples: Float64Array, rate = 16000): void {
  const n = samples.length;
  const buf = Buffer.alloc(44 + n * 2);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + n * 2, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20); // linear PCM
  buf.writeUInt16LE(1, 22); // mono
  buf.writeUInt32LE(rate, 24);
  buf.writeUInt32LE(rate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(n * 2, 40);
  for (let i = 0; i < n; i++) {
    const pcm = Math.max(-32768, Math.min(32767, Math.round(samples[i]! * 32768)));
    buf.writeInt16LE(pcm, 44 + i * 2);
  }
  fs.writeFileSync(filePath, buf);
}

/** Walk the RIFF chunks and return the play length of a PCM WAV. */
export function wavDurationS(bytes: ArrayBuffer): number {
  const view = new DataView(bytes);
  const tag = (o: number) =>
    String.fromCharCode(view.getUint8(o), view.getUint8(o + 1), view.getUint8(o + 2), view.getUint8(o + 3));
  if (tag(0) !== "RIFF" || tag(8) !== "WAVE") throw new Error("not a RIFF/WAVE file");
  let offset = 12;
  let rate = 0;
  let channels = 0;
  while (offset + 8 <= view.byteLength) {
    const id = tag(offset);
    const size = view.getUint32(offset + 4, true);
    if (id === "fmt ") {
      channels = view.getUint16(offset + 10, true);
      rate = view.getUint32(offset + 12, true);
    }
    if (id === "data") {
      if (rate === 0 || channels === 0) throw new Error("data chunk before fmt");
      return size / (rate * channels * 2);
    }
    offset += 8 + size + (size % 2);
  }
  throw new Error("no data chunk");
}

/**
 * 2 conditions x 4 clips plus one planted instruction clip (trap_0,
 * expected score 1 on echo_dmos), built into `<workDir>/campaign` with
 * the CLI. Grading keys for the check sections go into campaign.json.
 */
export function buildCampaign(workDir: string): string {
  const clipsDir = path.join(workDir, "wavs");
  fs.mkdirSync(clipsDir);
  const rand = mulberry32(0x5eed);
  const noise = () => Float64Array.from({ length: 8000 }, () => (rand() - 0.5) * 0.2);

  const rows = ["id,scenario,condition,gain,delay_ms,gain_left,gain_right,path"];
  for (const condition of ["model_a", "model_b"]) {
    for (let i = 0; i < 4; i++) {
      const wav = path.join(clipsDir, `${condition}_${i}.wav`);
      writeWav(wav, noise());
      rows.push(`${condition}_${i},fe_st,${condition},1.0,600.0,,,${wav}`);
    }
  }
  const trapWav = path.join(clipsDir, "trap_0.wav");
  writeWav(trapWav, noise());
  rows.push(`trap_0,fe_st,trapping,1.0,600.0,,,${trapWav}`);
  fs.writeFileSync(path.join(workDir, "corpus.csv"), rows.join("\n") + "\n");
  fs.writeFileSync(path.join(workDir, "trapping.csv"), "clip_id,expected,scale\ntrap_0,1,echo_dmos\n");

  const campaignDir = path.join(workDir, "campaign");
  const buildOut = execFileSync(
    "echoeval",
    [
      "build",
      "--corpus", path.join(workDir, "corpus.csv"),
      "--votes", "2",
      "--task-size", "4",
      "--seed", "11",
      "--trapping", path.join(workDir, "trapping.csv"),
      "--gold-per-task", "0",
      "--out", campaignDir,
    ],
    { encoding: "utf8" },
  );
  if (!buildOut.includes("built 4 tasks")) throw new Error(`unexpected build output: ${buildOut}`);

  fs.writeFileSync(
    path.join(campaignDir, "campaign.json"),
    JSON.stringify({
      qualification_truth: QUAL_TRUTH,
      environment_truth: ENV_TRUTH,
      lease_timeout_s: 1800,
      max_trapping_failures: 2,
    }) + "\n",
  );
  return campaignDir;
}

/**
 * Deploy-time client config matching the campaign.json answer keys. In
 * production the clip ids point at dedicated recordings; any servable
 * clip works for the protocol, since the server does the grading.
 */
export function clientTestConfig(): ClientConfig {
  return {
    qualification_clips: ["model_a_0", "model_a_1", "model_b_0"],
    environment_trials: [
      { prompt: "Which side plays the tone?", options: ["left", "right"], clip_id: "model_a_2" },
      { prompt: "How many talkers do you hear?", options: ["one", "two"] },
    ],
    training_clips: ["model_a_3", "model_b_1"],
  };
}

export interface LiveServer {
  child: ChildProcess;
  log: () => string;
}

/** Start `echoeval serve` (ECHOEVAL_PORT must beat --port) and wait for it. */
export async function startServer(campaignDir: string, port: number): Promise<LiveServer> {
  let log = "";
  const child = spawn("echoeval", ["serve", "--campaign", campaignDir, "--port", "9999"], {
    env: { ...process.env, ECHOEVAL_PORT: String(port) },
  });
  child.stdout?.on("data", (chunk) => (log += chunk));
  child.stderr?.on("data", (chunk) => (log += chunk));

  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const probe = await fetch(`http://127.0.0.1:${port}/api/admin/results`);
      if (probe.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) throw new Error(`server never came up\n${log}`);
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  return { child, log: () => log };
}

export async function stopServer(server: LiveServer | undefined): Promise<void> {
  if (!server || server.child.exitCode !== null) return;
  server.child.kill("SIGTERM");
  await new Promise((resolve) => {
    const hardKill = setTimeout(() => {
      server.child.kill("SIGKILL");
      resolve(null);
    }, 5000);
    server.child.once("exit", () => {
      clearTimeout(hardKill);
      resolve(null);
    });
  });
}

export function makeWorkDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "echoeval-client-"));
}
