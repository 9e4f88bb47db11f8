/**
 * Opt-in round trip against a live annotation service:
 *
 *   lichenmeter annotate --data <dataset> --port 8642 &
 *   LICHEN_SERVICE_URL=http://127.0.0.1:8642 npm test
 *
 * Drives the same scripted session (init rectangle + 4 strokes) twice through
 * the HTTP client and asserts the final mask PNGs are byte-identical: the
 * server recomputes every mask from the stroke history, so a replay must
 * reproduce it exactly.
 */

import { describe, expect, it } from "vitest";

import { httpTransport } from "../src/api";
import { AnnotationSession } from "../src/session";
import type { Stroke } from "../src/types";

const base = process.env.LICHEN_SERVICE_URL;

describe.skipIf(!base)("live service round trip", () => {
  it("scripted init + 4 strokes replays byte-identically", async () => {
    const transport = httpTransport(base);
    const images = await transport.listImages();
    expect(images.length).toBeGreaterThan(0);
    const target = images[images.length - 1];
    const w = target.width;
    const h = target.height;

    // a plausible operator: mark foreground near the center first, then
    // background along the (blob-free) border corridor
    const script: Stroke[][] = [
      [{ points: [[0.48 * w, 0.5 * h], [0.55 * w, 0.5 * h]], label: "fg",
         brushRadius: 4 }],
      [{ points: [[0.05 * w, 0.04 * h], [0.4 * w, 0.04 * h]], label: "bg",
         brushRadius: 3 }],
      [{ points: [[0.5 * w, 0.44 * h], [0.5 * w, 0.56 * h]], label: "fg",
         brushRadius: 3 }],
      [{ points: [[0.96 * w, 0.9 * h]], label: "bg", brushRadius: 4 }],
    ];

    const runScript = async () => {
      const s = new AnnotationSession(transport, target.id, w, h);
      await s.init({ x: 2, y: 2, width: w - 4, height: h - 4 });
      for (const group of script) {
        for (const st of group) {
          s.addStroke(st.points.map(([x, y]) => ({ x, y })), {
            label: st.label,
            radiusPx: st.brushRadius,
          });
        }
        expect(await s.submit()).toBe(true);
      }
      expect(s.historyDepth).toBe(script.length);
      return s.maskBytes!;
    };

    const first = await runScript();
    const second = await runScript(); // re-init replays from scratch
    expect(first.length).toBe(second.length);
    expect(Buffer.from(first).equals(Buffer.from(second))).toBe(true);
  }, 120_000);
});
