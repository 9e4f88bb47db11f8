import { clipStroke } from "./transforms";
import type {
  BrushState,
  MaskRef,
  Point,
  Rect,
  Stroke,
  Transport,
} from "./types";

export interface SessionEvents {
  onMask?: (bytes: Uint8Array, ref: MaskRef) => void;
  onPendingChange?: (pending: Stroke[]) => void;
  onError?: (message: string) => void;
  onBusyChange?: (busy: boolean) => void;
}

/**
 * Client-side session state. Holds NO segmentation logic: every displayed
 * mask is byte-for-byte a server response, and the undo depth always mirrors
 * the server's history depth. Mutating requests are serialized; submissions
 * made while one is in flight queue up client-side.
 */
export class AnnotationSession {
  readonly imageId: string;
  readonly width: number;
  readonly height: number;

  pending: Stroke[] = [];
  historyDepth = 0;
  maskBytes: Uint8Array | null = null;
  maskRef: MaskRef | null = null;
  finalized = false;

  private transport: Transport;
  private events: SessionEvents;
  private chain: Promise<void> = Promise.resolve();
  private inFlight = 0;

  constructor(transport: Transport, imageId: string, width: number,
              height: number, events: SessionEvents = {}) {
    this.transport = transport;
    this.imageId = imageId;
    this.width = width;
    this.height = height;
    this.events = events;
  }

  get busy(): boolean {
    return this.inFlight > 0;
  }

  /** Serialize mutating requests: one in flight, the rest queue in order. */
  private enqueue(task: () => Promise<void>): Promise<void> {
    this.inFlight += 1;
    this.events.onBusyChange?.(true);
    const run = this.chain.then(task);
    this.chain = run.catch(() => undefined).then(() => {
      this.inFlight -= 1;
      if (this.inFlight === 0) this.events.onBusyChange?.(false);
    });
    return run;
  }

  private async applyRef(ref: MaskRef): Promise<void> {
    const bytes = await this.transport.fetchMask(ref.maskUrl);
    this.maskRef = ref;
    this.maskBytes = bytes;
    this.historyDepth = ref.historyDepth;
    this.events.onMask?.(bytes, ref);
  }

  init(rect: Rect): Promise<void> {
    return this.enqueue(async () => {
      try {
        await this.applyRef(await this.transport.init(this.imageId, rect));
      } catch (e) {
        this.events.onError?.(String(e));
        throw e;
      }
    });
  }

  /** Queue a drawn stroke; empty or fully-out-of-bounds strokes are dropped. */
  addStroke(points: Point[], brush: BrushState): Stroke | null {
    const clipped = clipStroke(points, this.width, this.height);
    if (clipped.length === 0) return null;
    const stroke: Stroke = {
      points: clipped.map((p) => [p.x, p.y]),
      label: brush.label,
      brushRadius: Math.max(1, Math.round(brush.radiusPx)),
    };
    this.pending.push(stroke);
    this.events.onPendingChange?.(this.pending);
    return stroke;
  }

  /**
   * Post pending strokes as one refinement step. A no-op without pending
   * strokes. On failure the pending strokes stay queued for retry.
   */
  submit(): Promise<boolean> {
    if (this.pending.length === 0) return Promise.resolve(false);
    const batch = this.pending;
    this.pending = [];
    this.events.onPendingChange?.(this.pending);
    let ok = false;
    return this.enqueue(async () => {
      try {
        await this.applyRef(
          await this.transport.postStrokes(this.imageId, batch),
        );
        ok = true;
      } catch (e) {
        this.pending = batch.concat(this.pending); // preserve for retry
        this.events.onPendingChange?.(this.pending);
        this.events.onError?.(String(e));
      }
    }).then(() => ok);
  }

  undo(): Promise<void> {
    return this.enqueue(async () => {
      try {
        await this.applyRef(await this.transport.undo(this.imageId));
      } catch (e) {
        this.events.onError?.(String(e));
      }
    });
  }

  finalize(): Promise<void> {
    return this.enqueue(async () => {
      try {
        await this.transport.finalize(this.imageId);
        this.finalized = true;
      } catch (e) {
        this.events.onError?.(String(e));
      }
    });
  }

  /** Resolves when every queued mutation has settled. */
  idle(): Promise<void> {
    return this.chain;
  }
}
