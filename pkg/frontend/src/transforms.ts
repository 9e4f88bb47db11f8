import type { Point } from "./types";

/** Canvas view: image px -> canvas px is scale by zoom then shift by pan. */
export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export function imageToCanvas(pt: Point, t: ViewTransform): Point {
  return { x: pt.x * t.zoom + t.panX, y: pt.y * t.zoom + t.panY };
}

export function canvasToImage(pt: Point, t: ViewTransform): Point {
  return { x: (pt.x - t.panX) / t.zoom, y: (pt.y - t.panY) / t.zoom };
}

/** Zoom about a fixed canvas point (the cursor), preserving what is under it. */
export function zoomAt(t: ViewTransform, canvasPt: Point, factor: number,
                       minZoom = 0.1, maxZoom = 16): ViewTransform {
  const zoom = Math.min(maxZoom, Math.max(minZoom, t.zoom * factor));
  const anchor = canvasToImage(canvasPt, t);
  return {
    zoom,
    panX: canvasPt.x - anchor.x * zoom,
    panY: canvasPt.y - anchor.y * zoom,
  };
}

export function clampToImage(pt: Point, width: number, height: number): Point {
  return {
    x: Math.min(width - 1, Math.max(0, pt.x)),
    y: Math.min(height - 1, Math.max(0, pt.y)),
  };
}

/** Clip a polyline to the image bounds; returns [] when fully outside. */
export function clipStroke(points: Point[], width: number,
                           height: number): Point[] {
  const inside = (p: Point) =>
    p.x >= 0 && p.x <= width - 1 && p.y >= 0 && p.y <= height - 1;
  if (points.every(inside)) return points;
  if (!points.some(inside)) return [];
  return points.map((p) => clampToImage(p, width, height));
}

export function normalizedRect(a: Point, b: Point): { x: number; y: number;
                                                      width: number;
                                                      height: number } {
  const x = Math.min(a.x, b.x);
  const y = Math.min(a.y, b.y);
  return { x, y, width: Math.abs(a.x - b.x), height: Math.abs(a.y - b.y) };
}
