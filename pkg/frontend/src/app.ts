/**
 * DOM wiring: binds the canvas and controls to StudioController and
 * paints SessionState. All rasters come from service bytes; the only
 * client-side image math is the display window on the 8-bit render.
 */

import { ApiClient } from "./api.js";
import { StudioController } from "./controller.js";
import { pixelToCanvas } from "./coords.js";
import { maskToRgba, windowToRgba } from "./overlay.js";
import type { PipelineView, SessionState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function rasterCanvas(rgba: Uint8ClampedArray<ArrayBuffer>, width: number, height: number): HTMLCanvasElement {
  const off = document.createElement("canvas");
  off.width = width;
  off.height = height;
  const ctx = off.getContext("2d")!;
  ctx.putImageData(new ImageData(rgba, width, height), 0, 0);
  return off;
}

class StudioPage {
  private readonly canvas = el<HTMLCanvasElement>("viewport");
  private readonly resultCanvas = el<HTMLCanvasElement>("result");
  private readonly banner = el<HTMLDivElement>("banner");
  private readonly status = el<HTMLDivElement>("status");
  private readonly regionInfo = el<HTMLDivElement>("region-info");
  private readonly windowLo = el<HTMLInputElement>("window-lo");
  private readonly windowHi = el<HTMLInputElement>("window-hi");
  private baseImage: HTMLImageElement | null = null;

  constructor(private readonly controller: StudioController, private readonly api: ApiClient) {
    controller.onChange((state) => this.render(state));
    this.bind();
  }

  private bind(): void {
    el<HTMLInputElement>("file").addEventListener("change", (event) => {
      const input = event.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file) {
        void this.open(file);
      }
    });
    this.canvas.addEventListener("click", (event) => {
      const rect = this.canvas.getBoundingClientRect();
      this.controller.clickAt(event.clientX - rect.left, event.clientY - rect.top);
    });
    el<HTMLButtonElement>("undo").addEventListener("click", () => this.controller.undo());
    el<HTMLSelectElement>("label").addEventListener("change", (event) => {
      this.controller.setActiveLabel(Number((event.target as HTMLSelectElement).value) === 0 ? 0 : 1);
    });
    el<HTMLSelectElement>("backend").addEventListener("change", (event) => {
      const value = (event.target as HTMLSelectElement).value;
      this.controller.setBackend(value === "remote" ? "remote" : "builtin");
    });
    el<HTMLSelectElement>("zoom").addEventListener("change", (event) => {
      this.controller.setZoom(Number((event.target as HTMLSelectElement).value));
    });
    for (const input of [this.windowLo, this.windowHi]) {
      input.addEventListener("input", () => this.render(this.controller.state));
    }
    el<HTMLButtonElement>("stage-skinband").addEventListener("click", () => {
      void this.controller.runStage("skinband", {
        depth_mm: Number(el<HTMLInputElement>("depth-mm").value),
        apply: el<HTMLSelectElement>("band-apply").value,
      });
    });
    el<HTMLButtonElement>("stage-dualsos").addEventListener("click", () => {
      void this.controller.runStage("dualsos", {
        channels: el<HTMLInputElement>("channels-path").value,
        geometry: {
          type: "ring",
          n_elements: Number(el<HTMLInputElement>("ring-n").value),
          radius_mm: Number(el<HTMLInputElement>("ring-radius").value),
        },
        c_in: Number(el<HTMLInputElement>("c-in").value),
        c_out: Number(el<HTMLInputElement>("c-out").value),
      });
    });
    el<HTMLButtonElement>("stage-vessels").addEventListener("click", () => {
      void this.controller.runStage("vessels", {});
    });
    el<HTMLButtonElement>("toggle-view").addEventListener("click", () => {
      this.controller.toggleBeforeAfter();
    });
  }

  private async open(file: File): Promise<void> {
    await this.controller.openImage(await file.arrayBuffer());
    const session = this.controller.state.session;
    if (!session) {
      return;
    }
    const image = new Image();
    image.src = this.api.renderUrl(session.sessionId);
    await image.decode();
    this.baseImage = image;
    this.render(this.controller.state);
  }

  private window(): [number, number] {
    const lo = Number(this.windowLo.value);
    const hi = Math.max(Number(this.windowHi.value), lo + 0.01);
    return [lo, hi];
  }

  private render(state: SessionState): void {
    this.banner.textContent = state.error ?? "";
    this.banner.hidden = !state.error;
    this.canvas.classList.toggle("outside-click", state.outsideClick);
    const session = state.session;
    const ctx = this.canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!session || !this.baseImage) {
      this.status.textContent = "upload an image to begin";
      return;
    }
    const zoom = state.view.zoom;
    this.canvas.width = Math.ceil(session.width * zoom);
    this.canvas.height = Math.ceil(session.height * zoom);
    ctx.imageSmoothingEnabled = false;

    const [lo, hi] = this.window();
    ctx.filter = "none";
    ctx.drawImage(this.windowed(session.width, session.height, lo, hi), 0, 0, this.canvas.width, this.canvas.height);

    if (state.segmentation) {
      const overlay = state.segmentation.overlay;
      ctx.drawImage(
        rasterCanvas(maskToRgba(overlay), overlay.width, overlay.height),
        0, 0, this.canvas.width, this.canvas.height,
      );
      this.status.textContent =
        `${state.segmentation.backend}: ${state.segmentation.elapsedMs.toFixed(1)} ms, ` +
        `${state.prompts.length} prompt(s)`;
    } else {
      this.status.textContent = `${state.prompts.length} prompt(s)`;
    }
    for (const prompt of state.prompts) {
      const c = pixelToCanvas(prompt.x, prompt.y, state.view);
      ctx.strokeStyle = prompt.label === 1 ? "#2ecc71" : "#e74c3c";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(c.x - 5, c.y);
      ctx.lineTo(c.x + 5, c.y);
      ctx.moveTo(c.x, c.y - 5);
      ctx.lineTo(c.x, c.y + 5);
      ctx.stroke();
    }
    this.renderPipeline(state, session.width, session.height);
  }

  private windowed(width: number, height: number, lo: number, hi: number): HTMLCanvasElement {
    const off = document.createElement("canvas");
    off.width = width;
    off.height = height;
    const ctx = off.getContext("2d")!;
    ctx.drawImage(this.baseImage!, 0, 0);
    const pixels = ctx.getImageData(0, 0, width, height);
    const data = pixels.data;
    for (let i = 0; i < data.length; i += 4) {
      const v = Math.min(1, Math.max(0, ((data[i] ?? 0) / 255 - lo) / (hi - lo)));
      const u8 = Math.round(v * 255);
      data[i] = u8;
      data[i + 1] = u8;
      data[i + 2] = u8;
    }
    ctx.putImageData(pixels, 0, 0);
    return off;
  }

  private renderPipeline(state: SessionState, width: number, height: number): void {
    const pipeline = state.pipeline;
    const ctx = this.resultCanvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    if (!pipeline) {
      this.resultCanvas.hidden = true;
      this.regionInfo.textContent = "";
      return;
    }
    this.resultCanvas.hidden = false;
    this.resultCanvas.width = width;
    this.resultCanvas.height = height;
    if (!pipeline.showAfter) {
      const [lo, hi] = this.window();
      ctx.drawImage(this.windowed(width, height, lo, hi), 0, 0);
      this.regionInfo.textContent = `${pipeline.stage}: before`;
      return;
    }
    if (pipeline.labels) {
      ctx.fillStyle = "#000";
      ctx.fillRect(0, 0, width, height);
      ctx.drawImage(rasterCanvas(maskToRgba(pipeline.labels, 1.0), width, height), 0, 0);
    } else if (pipeline.image) {
      const [lo, hi] = this.window();
      ctx.drawImage(rasterCanvas(windowToRgba(pipeline.image, lo, hi), width, height), 0, 0);
    }
    if (pipeline.ellipse && state.session) {
      this.drawEllipse(ctx, pipeline);
    }
    this.regionInfo.textContent =
      pipeline.stage === "vessels"
        ? `vessels: ${pipeline.regions?.length ?? 0} region(s)`
        : `${pipeline.stage}: after`;
  }

  private drawEllipse(ctx: CanvasRenderingContext2D, pipeline: PipelineView): void {
    // The service reports the fit in mm; the session grid is needed to
    // place it. The render uses pixel dims directly when pitch is 0.1 mm
    // per pixel (the upload default); other pitches scale accordingly.
    const ellipse = pipeline.ellipse!;
    ctx.strokeStyle = "#f1c40f";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    const scale = 1 / Number(el<HTMLInputElement>("pitch-mm").value || "0.1");
    ctx.ellipse(
      ellipse.cx * scale,
      ellipse.cy * scale,
      ellipse.a * scale,
      ellipse.b * scale,
      ellipse.theta,
      0,
      2 * Math.PI,
    );
    ctx.stroke();
  }
}

const api = new ApiClient("");
new StudioPage(new StudioController(api), api);
