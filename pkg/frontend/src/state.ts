/**
 * Session state and its pure transitions. Transport and rendering live in
 * api.ts / app.ts; everything here is synchronous and side-effect free so
 * the prompt workflow is testable without a DOM.
 */

import { canvasToPixel, insideImage, type ViewTransform } from "./coords.js";

export type PromptLabel = 0 | 1;

export interface PromptPoint {
  x: number;
  y: number;
  label: PromptLabel;
}

export type BackendChoice = "builtin" | "remote";

export interface SessionInfo {
  sessionId: string;
  width: number;
  height: number;
}

/** Decoded label raster; dims always equal the session image dims. */
export interface MaskOverlay {
  width: number;
  height: number;
  labels: Int32Array;
}

export interface SegmentationView {
  overlay: MaskOverlay;
  elapsedMs: number;
  backend: string;
}

export interface RegionStat {
  label: number;
  areaPx: number;
  areaMm2: number;
  meanIntensity: number;
  centroidPx: [number, number];
}

export interface EllipseFit {
  cx: number;
  cy: number;
  a: number;
  b: number;
  theta: number;
}

export type StageName = "skinband" | "dualsos" | "vessels";

export interface PipelineView {
  stage: StageName;
  /** Result raster in [0, 1], session image dims; null for label-only stages. */
  image: Float32Array | null;
  /** Refined label raster for the vessels stage, recolored per region. */
  labels?: MaskOverlay;
  regions?: RegionStat[];
  ellipse?: EllipseFit;
  report: unknown;
  /** Before/after toggle: false shows the input image. */
  showAfter: boolean;
}

export interface SessionState {
  session: SessionInfo | null;
  prompts: PromptPoint[];
  activeLabel: PromptLabel;
  backend: BackendChoice;
  view: ViewTransform;
  segmentation: SegmentationView | null;
  pipeline: PipelineView | null;
  /** Verbatim service error message, or null; prompts survive errors. */
  error: string | null;
  /** Visual-cue flag: the last click landed outside the image. */
  outsideClick: boolean;
}

export function initialState(): SessionState {
  return {
    session: null,
    prompts: [],
    activeLabel: 1,
    backend: "builtin",
    view: { zoom: 1, offsetX: 0, offsetY: 0 },
    segmentation: null,
    pipeline: null,
    error: null,
    outsideClick: false,
  };
}

/**
 * Append a prompt at the image pixel under a canvas click. Clicks outside
 * the image change nothing except the outsideClick cue.
 */
export function placePrompt(state: SessionState, canvasX: number, canvasY: number): SessionState {
  if (!state.session) {
    return state;
  }
  const p = canvasToPixel(canvasX, canvasY, state.view);
  if (!insideImage(p.x, p.y, state.session.width, state.session.height)) {
    return { ...state, outsideClick: true };
  }
  const prompt: PromptPoint = { x: p.x, y: p.y, label: state.activeLabel };
  return { ...state, prompts: [...state.prompts, prompt], outsideClick: false };
}

/** Remove the most recent prompt; earlier prompts keep their order. */
export function undoPrompt(state: SessionState): SessionState {
  if (state.prompts.length === 0) {
    return state;
  }
  return { ...state, prompts: state.prompts.slice(0, -1) };
}

export function foregroundCount(prompts: readonly PromptPoint[]): number {
  return prompts.filter((p) => p.label === 1).length;
}

/**
 * Canonical wire serialization: compact JSON, key order x, y, label. The
 * service and the command-line tools emit byte-identical text for the
 * same list (pinned by a fixture shared with the library's test suite).
 */
export function serializePrompts(prompts: readonly PromptPoint[]): string {
  return JSON.stringify(prompts.map((p) => ({ x: p.x, y: p.y, label: p.label })));
}

export function parsePrompts(text: string): PromptPoint[] {
  const doc: unknown = JSON.parse(text);
  if (!Array.isArray(doc)) {
    throw new Error("prompt list must be a JSON array");
  }
  return doc.map((item: unknown, i: number) => {
    const p = item as Record<string, unknown>;
    const x = Number(p["x"]);
    const y = Number(p["y"]);
    const label = Number(p["label"]);
    if (!Number.isInteger(x) || !Number.isInteger(y) || (label !== 0 && label !== 1)) {
      throw new Error(`bad prompt at index ${i}`);
    }
    return { x, y, label: label as PromptLabel };
  });
}
