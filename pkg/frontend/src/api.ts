/**
 * Typed client for the imaging service HTTP API v1. Failures raise
 * ServiceError with the backend's code and message verbatim.
 */

import type { BackendChoice, PromptPoint, StageName } from "./state.js";
import type { RasterDoc } from "./overlay.js";

export class ServiceError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export interface UploadResult {
  session_id: string;
  width: number;
  height: number;
}

export interface SegmentResponse {
  mask: RasterDoc;
  elapsed_ms: number;
  backend: string;
}

export interface StageReport {
  name: string;
  wall_time_s: number;
  params: Record<string, unknown>;
}

export interface SkinbandResponse {
  image: RasterDoc;
  band_mask: RasterDoc;
  report: StageReport;
}

export interface DualsosResponse {
  image: RasterDoc;
  ellipse: { cx: number; cy: number; a: number; b: number; theta: number };
  report: StageReport;
}

export interface VesselsResponse {
  labels: RasterDoc;
  regions: Array<{
    label: number;
    area_px: number;
    area_mm2: number;
    mean_intensity: number;
    centroid_px: [number, number];
  }>;
  report: StageReport;
}

export type StageResponse = SkinbandResponse | DualsosResponse | VesselsResponse;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (e) {
      throw new ServiceError("unreachable", `service unreachable: ${String(e)}`, 0);
    }
    let doc: unknown = null;
    try {
      doc = await resp.json();
    } catch {
      // fall through to the status check with a generic message
    }
    if (!resp.ok) {
      const err = (doc as { error?: { code?: string; message?: string } } | null)?.error;
      throw new ServiceError(
        err?.code ?? "http_error",
        err?.message ?? `HTTP ${resp.status}`,
        resp.status,
      );
    }
    if (doc === null) {
      throw new ServiceError("malformed", "response is not valid JSON", resp.status);
    }
    return doc as T;
  }

  private postJson<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  uploadImage(body: BodyInit, pitchMm?: number): Promise<UploadResult> {
    const query = pitchMm === undefined ? "" : `?pitch_mm=${pitchMm}`;
    return this.request<UploadResult>(`/v1/images${query}`, {
      method: "POST",
      headers: { "Content-Type": "application/octet-stream" },
      body,
    });
  }

  /** URL of the server-rendered 8-bit PNG for the session image. */
  renderUrl(sessionId: string): string {
    return `${this.baseUrl}/v1/images/${sessionId}/render`;
  }

  /** Replace the server-side prompt list so undo stays in sync. */
  setPrompts(sessionId: string, prompts: readonly PromptPoint[]): Promise<{ prompts: PromptPoint[] }> {
    return this.postJson(`/v1/images/${sessionId}/prompts`, {
      prompts: prompts.map((p) => ({ x: p.x, y: p.y, label: p.label })),
      replace: true,
    });
  }

  segment(
    sessionId: string,
    backend: BackendChoice,
    mode: "binary" | "multilabel" = "binary",
    params: Record<string, unknown> = {},
  ): Promise<SegmentResponse> {
    return this.postJson(`/v1/images/${sessionId}/segment?backend=${backend}`, { mode, params });
  }

  runStage(stage: StageName, payload: Record<string, unknown>): Promise<StageResponse> {
    return this.postJson(`/v1/pipeline/${stage}`, payload);
  }
}
