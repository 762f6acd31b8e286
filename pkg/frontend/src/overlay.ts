/**
 * Mask payload decoding and overlay colorization. Pure byte transforms:
 * every displayed raster derives from service response bytes, never from
 * client-side segmentation.
 */

import type { MaskOverlay } from "./state.js";

export interface RasterDoc {
  width: number;
  height: number;
  encoding: string;
  data: string;
}

export function decodeBase64(data: string): Uint8Array {
  const binary = atob(data);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    out[i] = binary.charCodeAt(i);
  }
  return out;
}

/** Decode a u8le-base64 label raster into row-major labels. */
export function decodeMaskU8(doc: RasterDoc): MaskOverlay {
  if (doc.encoding !== "u8le-base64") {
    throw new Error(`unsupported mask encoding ${doc.encoding}`);
  }
  const bytes = decodeBase64(doc.data);
  if (bytes.length !== doc.width * doc.height) {
    throw new Error(`mask payload is ${bytes.length} bytes, expected ${doc.width * doc.height}`);
  }
  return { width: doc.width, height: doc.height, labels: Int32Array.from(bytes) };
}

/** Decode an f32le-base64 image raster (values in [0, 1]) little-endian. */
export function decodeImageF32(doc: RasterDoc): Float32Array {
  if (doc.encoding !== "f32le-base64") {
    throw new Error(`unsupported image encoding ${doc.encoding}`);
  }
  const bytes = decodeBase64(doc.data);
  const n = doc.width * doc.height;
  if (bytes.length !== n * 4) {
    throw new Error(`image payload is ${bytes.length} bytes, expected ${n * 4}`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = view.getFloat32(i * 4, true);
  }
  return out;
}

/** Distinct overlay colors; label k uses entry (k - 1) mod length. */
export const LABEL_COLORS: ReadonlyArray<readonly [number, number, number]> = [
  [46, 204, 113],
  [52, 152, 219],
  [231, 76, 60],
  [241, 196, 15],
  [155, 89, 182],
  [26, 188, 156],
  [230, 126, 34],
  [149, 165, 166],
];

/**
 * Colorize a label raster as premixed RGBA bytes: label 0 fully
 * transparent, others semi-transparent per-label colors.
 */
export function maskToRgba(mask: MaskOverlay, alpha = 0.45): Uint8ClampedArray<ArrayBuffer> {
  const a = Math.round(alpha * 255);
  const out = new Uint8ClampedArray(mask.width * mask.height * 4);
  for (let i = 0; i < mask.labels.length; i++) {
    const label = mask.labels[i] ?? 0;
    if (label === 0) {
      continue;
    }
    const color = LABEL_COLORS[(label - 1) % LABEL_COLORS.length] ?? LABEL_COLORS[0]!;
    out[i * 4] = color[0];
    out[i * 4 + 1] = color[1];
    out[i * 4 + 2] = color[2];
    out[i * 4 + 3] = a;
  }
  return out;
}

/** Window a [0, 1] raster to 8-bit grayscale RGBA (display concern only). */
export function windowToRgba(values: Float32Array, lo: number, hi: number): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(values.length * 4);
  const span = hi - lo;
  for (let i = 0; i < values.length; i++) {
    const v = Math.min(1, Math.max(0, ((values[i] ?? 0) - lo) / span));
    const u8 = Math.round(v * 255);
    out[i * 4] = u8;
    out[i * 4 + 1] = u8;
    out[i * 4 + 2] = u8;
    out[i * 4 + 3] = 255;
  }
  return out;
}

export function distinctLabelCount(mask: MaskOverlay): number {
  const seen = new Set<number>();
  for (const label of mask.labels) {
    if (label !== 0) {
      seen.add(label);
    }
  }
  return seen.size;
}
