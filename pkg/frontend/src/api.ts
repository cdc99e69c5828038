/**
 * HTTP client for the sketch-concept service. Only the published endpoints
 * are used: /health, /concepts, /echo/sketch, /jobs and /jobs/{id}[/result].
 */

import type { Stroke, StrokeWire } from "./strokes.js";
import { strokeToWire } from "./strokes.js";

export interface ConceptInfo {
  id: string;
  class_name: string;
  base_hash: string;
}

export interface JobHandle {
  id: string;
  status: string;
}

export interface JobRecord {
  id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  error: string | null;
  result: Record<string, unknown> | null;
}

export interface EchoCounts {
  s_c_ink: number;
  s_d_ink: number;
  height: number;
  width: number;
}

export interface RleMask {
  shape: number[];
  runs: number[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function expectOk(resp: Response): Promise<Response> {
  if (!resp.ok) {
    const text = await resp.text();
    throw new ApiError(resp.status, `${resp.status}: ${text}`);
  }
  return resp;
}

export class StudioClient {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<{ version: string; base_hash: string }> {
    const resp = await expectOk(await fetch(this.url("/health")));
    return resp.json();
  }

  async concepts(): Promise<ConceptInfo[]> {
    const resp = await expectOk(await fetch(this.url("/concepts")));
    return resp.json();
  }

  async echoSketch(strokes: Stroke[], height = 64, width = 64): Promise<EchoCounts> {
    const body = { strokes: strokes.map(strokeToWire), height, width };
    const resp = await expectOk(
      await fetch(this.url("/echo/sketch"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
    return resp.json();
  }

  async submitJob(kind: string, payload: Record<string, unknown>): Promise<JobHandle> {
    const resp = await expectOk(
      await fetch(this.url("/jobs"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ kind, payload }),
      }),
    );
    return resp.json();
  }

  async submitGenerate(options: {
    conceptId: string;
    strokes: Stroke[];
    prompt: string;
    seed?: number;
    steps?: number;
    mask?: RleMask | null;
  }): Promise<JobHandle> {
    return this.submitJob("generate", {
      concept_id: options.conceptId,
      strokes: options.strokes.map(strokeToWire) as StrokeWire[],
      prompt: options.prompt,
      seed: options.seed ?? 0,
      steps: options.steps ?? 50,
      mask: options.mask ?? null,
    });
  }

  async jobStatus(id: string): Promise<JobRecord> {
    const resp = await expectOk(await fetch(this.url(`/jobs/${id}`)));
    return resp.json();
  }

  async jobResultPng(id: string): Promise<Uint8Array> {
    const resp = await expectOk(await fetch(this.url(`/jobs/${id}/result`)));
    const type = resp.headers.get("content-type") ?? "";
    if (!type.includes("image/png")) throw new ApiError(500, `expected PNG, got ${type}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  /** Poll a job until it leaves the queue; resolves with the final record. */
  async poll(handle: JobHandle, intervalMs = 300, timeoutMs = 120000): Promise<JobRecord> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const record = await this.jobStatus(handle.id);
      if (record.status === "done" || record.status === "failed") return record;
      if (Date.now() > deadline) throw new ApiError(408, `job ${handle.id} timed out`);
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
