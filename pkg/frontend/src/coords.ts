/**
 * Canvas <-> image coordinate mapping.
 *
 * The image is drawn with its top-left corner at (offsetX, offsetY) canvas
 * units, scaled by zoom, so image pixel (px, py) covers the half-open
 * canvas square [offsetX + px*zoom, offsetX + (px+1)*zoom). Pixel centers
 * sit at (px + 0.5) * zoom + offset, which keeps the round trip
 * canvas -> pixel -> canvas within half an image pixel at any zoom.
 */

export interface ViewTransform {
  /** Canvas units per image pixel, > 0. */
  zoom: number;
  /** Canvas position of the image's left edge. */
  offsetX: number;
  /** Canvas position of the image's top edge. */
  offsetY: number;
}

export interface Point {
  x: number;
  y: number;
}

/** Canvas position of an image pixel's center. */
export function pixelToCanvas(px: number, py: number, view: ViewTransform): Point {
  return {
    x: (px + 0.5) * view.zoom + view.offsetX,
    y: (py + 0.5) * view.zoom + view.offsetY,
  };
}

/** Image pixel under a canvas position (top-left origin, integer indices). */
export function canvasToPixel(cx: number, cy: number, view: ViewTransform): Point {
  return {
    x: Math.floor((cx - view.offsetX) / view.zoom),
    y: Math.floor((cy - view.offsetY) / view.zoom),
  };
}

export function insideImage(px: number, py: number, width: number, height: number): boolean {
  return px >= 0 && py >= 0 && px < width && py < height;
}
