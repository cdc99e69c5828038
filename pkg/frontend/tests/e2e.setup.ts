/**
 * Global setup for the live end-to-end test: bootstrap a tiny desk model
 * (cached under .cache) and run the real HTTP service on port 8031.
 */

import { spawn, spawnSync } from "node:child_process";
import { existsSync, mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

const CACHE = join(__dirname, "..", ".cache");
const PORT = 8031;
export const SERVER_URL = `http://127.0.0.1:${PORT}`;

const TINY_CONFIG = {
  version: 1,
  pretrain: { steps: 60, batch_size: 2, corpus_size: 8, seed: 0 },
  stage1: { steps: 5, batch_size: 2, lr: 0.01 },
  stage2: { steps: 5, batch_size: 2, lr: 0.001 },
  dataset: {
    concepts: [
      {
        id: "c0",
        shape: "star",
        texture: "striped",
        orientation_deg: 30.0,
        color: "red",
        n_pairs: 1,
        n_edits: 1,
      },
    ],
  },
};

function cli(args: string[]): void {
  const result = spawnSync("python3", ["-m", "sketchconcept.platform.cli", ...args], {
    stdio: "inherit",
    timeout: 600000,
  });
  if (result.status !== 0) {
    throw new Error(`cli ${args[0]} failed with status ${result.status}`);
  }
}

async function waitForHealth(timeoutMs = 60000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${SERVER_URL}/health`);
      if (resp.ok) return;
    } catch {
      // server not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
}

export default async function setup(): Promise<() => void> {
  mkdirSync(CACHE, { recursive: true });
  const basePath = join(CACHE, "pre", "base.zip");
  const configPath = join(CACHE, "tiny.json");
  writeFileSync(configPath, JSON.stringify(TINY_CONFIG));
  if (!existsSync(basePath)) {
    cli(["pretrain", "--config", configPath, "--out", join(CACHE, "pre"), "--seed", "0"]);
    cli(["synth-data", "--config", configPath, "--out", join(CACHE, "data"), "--seed", "0"]);
    cli([
      "train", "--config", configPath, "--base", basePath,
      "--store", join(CACHE, "store"), "--pairs", join(CACHE, "data", "c0"),
      "--out", join(CACHE, "train"), "--seed", "0",
    ]);
  }
  const server = spawn(
    "python3",
    ["-m", "sketchconcept.platform.cli", "serve", "--base", basePath,
     "--store", join(CACHE, "store"), "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForHealth();
  return () => {
    server.kill("SIGTERM");
  };
}
