// Browser entry point. The page is served next to client-config.json,
// which carries the deploy-time pieces the task API does not know about:
// qualification clip ids, hardware-check trials, training anchors and
// campaign instructions. The worker id and API base come from the query
// string, e.g. index.html?worker=w123&api=http://host:8765.

import { ApiError, TaskServerClient } from "./api.js";
import { HtmlAudioPlayer } from "./audio.js";
import { ClientConfig, ClientConfigSchema } from "./schema.js";
import { ClientSession } from "./session.js";
import { renderSession } from "./ui.js";

function statusLine(root: HTMLElement, text: string): void {
  root.textContent = "";
  const p = root.ownerDocument.createElement("p");
  p.className = "status";
  p.textContent = text;
  root.appendChild(p);
}

async function loadConfig(): Promise<ClientConfig> {
  const response = await fetch("./client-config.json");
  if (!response.ok) throw new Error(`client-config.json: HTTP ${response.status}`);
  return ClientConfigSchema.parse(await response.json());
}

async function runTask(
  root: HTMLElement,
  client: TaskServerClient,
  config: ClientConfig,
  workerId: string,
): Promise<boolean> {
  let task;
  try {
    task = await client.nextTask(workerId);
  } catch (e) {
    if (e instanceof ApiError && e.status === 404) {
      statusLine(root, "No tasks left. Thank you for participating!");
      return false;
    }
    if (e instanceof ApiError && e.status === 403) {
      statusLine(root, "This account can no longer take tasks in this study.");
      return false;
    }
    throw e;
  }

  const session = new ClientSession(workerId, task, config);
  const player = new HtmlAudioPlayer((clipId) => client.clipUrl(clipId));
  await new Promise<void>((resolve) => {
    const refresh = () =>
      renderSession(root, session, {
        player,
        refresh,
        onComplete: () => resolve(),
      });
    refresh();
  });

  const ack = await client.submit(session.buildSubmission());
  statusLine(root, `Answers saved (${ack.submission_id}). Loading the next task...`);
  return true;
}

export async function main(root: HTMLElement): Promise<void> {
  const params = new URLSearchParams(root.ownerDocument.location?.search ?? "");
  const workerId = params.get("worker");
  if (!workerId) {
    statusLine(root, "Missing ?worker= id in the page address.");
    return;
  }
  const apiBase = params.get("api") ?? "";

  try {
    const config = await loadConfig();
    const client = new TaskServerClient(apiBase);
    while (await runTask(root, client, config, workerId)) {
      // keep leasing until the server runs out of tasks
    }
  } catch (e) {
    statusLine(root, e instanceof Error ? `Something went wrong: ${e.message}` : String(e));
  }
}

const root = typeof document !== "undefined" ? document.getElementById("app") : null;
if (root) void main(root);
