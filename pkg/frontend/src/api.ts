import type { ImageInfo, MaskRef, Rect, Stroke, Transport } from "./types";

async function asJson<T>(r: Response): Promise<T> {
  if (!r.ok) {
    let detail = r.statusText;
    try {
      const body = await r.json();
      if (body && body.detail) detail = String(body.detail);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new Error(`${r.status}: ${detail}`);
  }
  return r.json() as Promise<T>;
}

/** HTTP client for the annotation service API. */
export function httpTransport(baseUrl = ""): Transport {
  const api = (path: string) => `${baseUrl}${path}`;
  return {
    listImages: () => fetch(api("/api/images")).then(asJson<ImageInfo[]>),

    init: (imageId: string, rect: Rect) =>
      fetch(api(`/api/sessions/${imageId}/init`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ rect }),
      }).then(asJson<MaskRef>),

    postStrokes: (imageId: string, strokes: Stroke[]) =>
      fetch(api(`/api/sessions/${imageId}/strokes`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          strokes: strokes.map((s) => ({
            points: s.points,
            label: s.label,
            brushRadius: s.brushRadius,
          })),
        }),
      }).then(asJson<MaskRef>),

    undo: (imageId: string) =>
      fetch(api(`/api/sessions/${imageId}/undo`), { method: "POST" }).then(
        asJson<MaskRef>,
      ),

    fetchMask: async (maskUrl: string) => {
      const r = await fetch(api(maskUrl));
      if (!r.ok) throw new Error(`${r.status}: failed to fetch mask`);
      return new Uint8Array(await r.arrayBuffer());
    },

    finalize: (imageId: string) =>
      fetch(api(`/api/sessions/${imageId}/finalize`), { method: "POST" }).then(
        asJson<{ imageId: string; mask: string }>,
      ),
  };
}
