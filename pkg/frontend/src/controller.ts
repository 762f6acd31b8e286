/**
 * Orchestration between pure session state and the service API: clicks
 * place prompts and refresh the mask (latest-wins), downstream stages run
 * against the current session, and every failure surfaces verbatim
 * without losing prompts.
 */

import { ApiClient, ServiceError, type StageResponse, type VesselsResponse, type DualsosResponse, type SkinbandResponse } from "./api.js";
import { decodeImageF32, decodeMaskU8 } from "./overlay.js";
import {
  foregroundCount,
  initialState,
  placePrompt,
  undoPrompt,
  type BackendChoice,
  type PipelineView,
  type PromptLabel,
  type SessionState,
  type StageName,
} from "./state.js";
import { LatestWins } from "./scheduler.js";

function errorMessage(err: unknown): string {
  if (err instanceof ServiceError) {
    return `${err.code}: ${err.message}`;
  }
  return String(err);
}

export class StudioController {
  state: SessionState = initialState();
  private readonly gate = new LatestWins();
  private readonly listeners: Array<(state: SessionState) => void> = [];

  constructor(private readonly api: ApiClient) {}

  onChange(listener: (state: SessionState) => void): void {
    this.listeners.push(listener);
  }

  private update(next: SessionState): void {
    this.state = next;
    for (const listener of this.listeners) {
      listener(next);
    }
  }

  async openImage(body: BodyInit, pitchMm?: number): Promise<void> {
    try {
      const result = await this.api.uploadImage(body, pitchMm);
      this.update({
        ...initialState(),
        backend: this.state.backend,
        view: this.state.view,
        session: {
          sessionId: result.session_id,
          width: result.width,
          height: result.height,
        },
      });
    } catch (err) {
      this.update({ ...this.state, error: errorMessage(err) });
    }
  }

  /** Place a prompt under a canvas click and refresh the mask. */
  clickAt(canvasX: number, canvasY: number): void {
    const next = placePrompt(this.state, canvasX, canvasY);
    const placed = next.prompts.length > this.state.prompts.length;
    this.update(next);
    if (placed) {
      this.requestSegmentation();
    }
  }

  undo(): void {
    const next = undoPrompt(this.state);
    if (next === this.state) {
      return;
    }
    this.update(next);
    if (foregroundCount(next.prompts) > 0) {
      this.requestSegmentation();
    }
  }

  setActiveLabel(label: PromptLabel): void {
    this.update({ ...this.state, activeLabel: label });
  }

  setBackend(backend: BackendChoice): void {
    this.update({ ...this.state, backend });
  }

  setZoom(zoom: number): void {
    this.update({ ...this.state, view: { ...this.state.view, zoom } });
  }

  /**
   * Sync prompts to the session and fetch a fresh mask. No-op until a
   * foreground prompt exists. Responses with mismatched dims are
   * rejected so the overlay always matches the image.
   */
  requestSegmentation(mode: "binary" | "multilabel" = "binary"): void {
    const session = this.state.session;
    if (!session || foregroundCount(this.state.prompts) === 0) {
      return;
    }
    const prompts = [...this.state.prompts];
    this.gate.submit(
      async () => {
        await this.api.setPrompts(session.sessionId, prompts);
        return this.api.segment(session.sessionId, this.state.backend, mode);
      },
      (result) => {
        const overlay = decodeMaskU8(result.mask);
        if (overlay.width !== session.width || overlay.height !== session.height) {
          this.update({
            ...this.state,
            error: `mask is ${overlay.width}x${overlay.height}, image is ${session.width}x${session.height}`,
          });
          return;
        }
        this.update({
          ...this.state,
          segmentation: {
            overlay,
            elapsedMs: result.elapsed_ms,
            backend: result.backend,
          },
          error: null,
        });
      },
      (err) => {
        // Prompts stay untouched; the banner shows the verbatim failure.
        this.update({ ...this.state, error: errorMessage(err) });
      },
    );
  }

  /** Run a downstream stage; state is unchanged on failure. */
  async runStage(stage: StageName, params: Record<string, unknown> = {}): Promise<void> {
    const session = this.state.session;
    if (!session || !this.state.segmentation) {
      return;
    }
    const payload = {
      session_id: session.sessionId,
      backend: this.state.backend,
      ...params,
    };
    try {
      const result = await this.api.runStage(stage, payload);
      this.update({
        ...this.state,
        pipeline: this.stageView(stage, result),
        error: null,
      });
    } catch (err) {
      this.update({ ...this.state, error: errorMessage(err) });
    }
  }

  toggleBeforeAfter(): void {
    const pipeline = this.state.pipeline;
    if (!pipeline) {
      return;
    }
    this.update({
      ...this.state,
      pipeline: { ...pipeline, showAfter: !pipeline.showAfter },
    });
  }

  private stageView(stage: StageName, result: StageResponse): PipelineView {
    if (stage === "vessels") {
      const doc = result as VesselsResponse;
      return {
        stage,
        image: null,
        labels: decodeMaskU8(doc.labels),
        regions: doc.regions.map((r) => ({
          label: r.label,
          areaPx: r.area_px,
          areaMm2: r.area_mm2,
          meanIntensity: r.mean_intensity,
          centroidPx: r.centroid_px,
        })),
        report: doc.report,
        showAfter: true,
      };
    }
    if (stage === "dualsos") {
      const doc = result as DualsosResponse;
      return {
        stage,
        image: decodeImageF32(doc.image),
        ellipse: doc.ellipse,
        report: doc.report,
        showAfter: true,
      };
    }
    const doc = result as SkinbandResponse;
    return {
      stage,
      image: decodeImageF32(doc.image),
      report: doc.report,
      showAfter: true,
    };
  }
}
