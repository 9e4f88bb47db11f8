/** Pure pixel math for the tinted mask overlay (kept DOM-free for tests). */

export interface OverlayStyle {
  r: number;
  g: number;
  b: number;
  opacity: number; // 0..1, applied to mask-on pixels only
}

export const DEFAULT_OVERLAY: OverlayStyle = { r: 255, g: 64, b: 64,
                                               opacity: 0.45 };

/**
 * Convert decoded grayscale mask pixels (0 or 255) into a premade RGBA
 * overlay buffer: lichen pixels get the tint at the configured opacity,
 * background pixels stay fully transparent so thallus borders remain visible.
 */
export function tintMask(gray: Uint8ClampedArray | Uint8Array,
                         style: OverlayStyle): Uint8ClampedArray {
  const out = new Uint8ClampedArray(gray.length * 4);
  const alpha = Math.round(255 * Math.min(1, Math.max(0, style.opacity)));
  for (let i = 0; i < gray.length; i++) {
    if (gray[i] >= 128) {
      const o = i * 4;
      out[o] = style.r;
      out[o + 1] = style.g;
      out[o + 2] = style.b;
      out[o + 3] = alpha;
    }
  }
  return out;
}

/** RGBA ImageData pixels -> grayscale using the red channel (masks are L). */
export function rgbaToGray(rgba: Uint8ClampedArray): Uint8ClampedArray {
  const out = new Uint8ClampedArray(rgba.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = rgba[i * 4];
  return out;
}
