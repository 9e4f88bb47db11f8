import { describe, expect, it } from "vitest";

import { AnnotationSession } from "../src/session";
import type { MaskRef, Rect, Stroke, Transport } from "../src/types";

/** Scripted transport: every mask response is distinct bytes; mutation order
 * and history depth follow the real service semantics. */
class FakeTransport implements Transport {
  calls: string[] = [];
  depth = 0;
  version = 0;
  failNext = false;
  private gate: Promise<void> = Promise.resolve();
  private release: (() => void) | null = null;

  hold() {
    this.gate = new Promise((res) => (this.release = res));
  }

  releaseHeld() {
    this.release?.();
    this.release = null;
  }

  private ref(imageId: string): MaskRef {
    this.version += 1;
    return {
      imageId,
      version: this.version,
      maskUrl: `/mask/${this.version}`,
      historyDepth: this.depth,
    };
  }

  async listImages() {
    return [];
  }

  async init(imageId: string, rect: Rect) {
    this.calls.push(`init:${rect.x},${rect.y},${rect.width},${rect.height}`);
    await this.gate;
    this.depth = 0;
    return this.ref(imageId);
  }

  async postStrokes(imageId: string, strokes: Stroke[]) {
    await this.gate;
    if (this.failNext) {
      this.failNext = false;
      this.calls.push("strokes:FAIL");
      throw new Error("503: busy");
    }
    this.calls.push(`strokes:${strokes.length}`);
    this.depth += 1;
    return this.ref(imageId);
  }

  async undo(imageId: string) {
    this.calls.push("undo");
    this.depth -= 1;
    return this.ref(imageId);
  }

  async fetchMask(maskUrl: string) {
    this.calls.push(`mask:${maskUrl}`);
    return new TextEncoder().encode(maskUrl);
  }

  async finalize(imageId: string) {
    this.calls.push("finalize");
    return { imageId, mask: `masks/manual/${imageId}.png` };
  }
}

function newSession(t: FakeTransport, events = {}) {
  return new AnnotationSession(t, "img0", 200, 100, events);
}

describe("AnnotationSession", () => {
  it("displays exactly the last server response", async () => {
    const t = new FakeTransport();
    const s = newSession(t);
    await s.init({ x: 0, y: 0, width: 200, height: 100 });
    expect(new TextDecoder().decode(s.maskBytes!)).toBe("/mask/1");
    s.addStroke([{ x: 5, y: 5 }], { label: "fg", radiusPx: 4 });
    await s.submit();
    expect(new TextDecoder().decode(s.maskBytes!)).toBe("/mask/2");
  });

  it("discards empty and fully out-of-bounds strokes", () => {
    const t = new FakeTransport();
    const s = newSession(t);
    expect(s.addStroke([], { label: "fg", radiusPx: 3 })).toBeNull();
    expect(
      s.addStroke([{ x: -5, y: -5 }], { label: "fg", radiusPx: 3 }),
    ).toBeNull();
    expect(s.pending).toHaveLength(0);
  });

  it("clips border-crossing strokes to the image", () => {
    const s = newSession(new FakeTransport());
    const stroke = s.addStroke(
      [{ x: 190, y: 50 }, { x: 230, y: 50 }],
      { label: "bg", radiusPx: 2 },
    );
    expect(stroke!.points[1][0]).toBe(199);
  });

  it("submit with no pending strokes is a disabled no-op", async () => {
    const t = new FakeTransport();
    const s = newSession(t);
    expect(await s.submit()).toBe(false);
    expect(t.calls).toHaveLength(0);
  });

  it("undo depth always equals the server history depth", async () => {
    const t = new FakeTransport();
    const s = newSession(t);
    await s.init({ x: 0, y: 0, width: 200, height: 100 });
    for (let i = 0; i < 3; i++) {
      s.addStroke([{ x: 10 + i, y: 10 }], { label: "fg", radiusPx: 3 });
      await s.submit();
    }
    expect(s.historyDepth).toBe(3);
    await s.undo();
    expect(s.historyDepth).toBe(2);
    expect(s.historyDepth).toBe(t.depth);
  });

  it("keeps pending strokes for retry and surfaces a banner on failure", async () => {
    const t = new FakeTransport();
    const errors: string[] = [];
    const s = newSession(t, { onError: (m: string) => errors.push(m) });
    await s.init({ x: 0, y: 0, width: 200, height: 100 });
    s.addStroke([{ x: 5, y: 6 }], { label: "fg", radiusPx: 3 });
    t.failNext = true;
    expect(await s.submit()).toBe(false);
    expect(errors).toHaveLength(1);
    expect(s.pending).toHaveLength(1); // preserved for retry
    expect(new TextDecoder().decode(s.maskBytes!)).toBe("/mask/1"); // unchanged
    expect(await s.submit()).toBe(true); // retry succeeds
    expect(s.pending).toHaveLength(0);
  });

  it("serializes mutations: one in flight, later submissions queue", async () => {
    const t = new FakeTransport();
    const s = newSession(t);
    await s.init({ x: 0, y: 0, width: 200, height: 100 });
    t.hold(); // block the next request server-side
    s.addStroke([{ x: 1, y: 1 }], { label: "fg", radiusPx: 2 });
    const first = s.submit();
    s.addStroke([{ x: 2, y: 2 }], { label: "bg", radiusPx: 2 });
    const second = s.submit();
    expect(s.busy).toBe(true);
    t.releaseHeld();
    await Promise.all([first, second]);
    await s.idle();
    expect(s.busy).toBe(false);
    // both batches arrived, in order, as separate refinement steps
    const strokeCalls = t.calls.filter((c) => c.startsWith("strokes:"));
    expect(strokeCalls).toEqual(["strokes:1", "strokes:1"]);
    expect(s.historyDepth).toBe(2);
  });

  it("finalize marks the session read-only", async () => {
    const t = new FakeTransport();
    const s = newSession(t);
    await s.init({ x: 0, y: 0, width: 200, height: 100 });
    await s.finalize();
    expect(s.finalized).toBe(true);
    expect(t.calls).toContain("finalize");
  });
});
