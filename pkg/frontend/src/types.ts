export interface Point {
  x: number;
  y: number;
}

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export type StrokeLabel = "fg" | "bg";

export interface Stroke {
  points: [number, number][]; // image-space x,y
  label: StrokeLabel;
  brushRadius: number;
}

export interface BrushState {
  label: StrokeLabel;
  radiusPx: number;
}

export interface ImageInfo {
  id: string;
  status: string;
  split: string;
  url: string;
  width: number;
  height: number;
  hasManualMask: boolean;
}

export interface MaskRef {
  imageId: string;
  version: number;
  maskUrl: string;
  historyDepth: number;
}

/** Everything the session needs from the server; swapped out in tests. */
export interface Transport {
  listImages(): Promise<ImageInfo[]>;
  init(imageId: string, rect: Rect): Promise<MaskRef>;
  postStrokes(imageId: string, strokes: Stroke[]): Promise<MaskRef>;
  undo(imageId: string): Promise<MaskRef>;
  fetchMask(maskUrl: string): Promise<Uint8Array>;
  finalize(imageId: string): Promise<{ imageId: string; mask: string }>;
}
