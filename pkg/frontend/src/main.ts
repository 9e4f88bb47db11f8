import { httpTransport } from "./api";
import { DEFAULT_OVERLAY, rgbaToGray, tintMask } from "./overlay";
import { AnnotationSession } from "./session";
import {
  ViewTransform,
  canvasToImage,
  normalizedRect,
  zoomAt,
} from "./transforms";
import type { BrushState, ImageInfo, Point, Stroke } from "./types";

const transport = httpTransport("");

const listEl = document.getElementById("image-list") as HTMLUListElement;
const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner") as HTMLDivElement;
const statusEl = document.getElementById("status") as HTMLDivElement;
const fgBtn = document.getElementById("fg") as HTMLButtonElement;
const bgBtn = document.getElementById("bg") as HTMLButtonElement;
const radiusInput = document.getElementById("radius") as HTMLInputElement;
const opacityInput = document.getElementById("opacity") as HTMLInputElement;
const applyBtn = document.getElementById("apply") as HTMLButtonElement;
const undoBtn = document.getElementById("undo") as HTMLButtonElement;
const finalizeBtn = document.getElementById("finalize") as HTMLButtonElement;
const depthEl = document.getElementById("depth") as HTMLSpanElement;

let session: AnnotationSession | null = null;
let image: HTMLImageElement | null = null;
let overlayCanvas: HTMLCanvasElement | null = null;
let view: ViewTransform = { zoom: 1, panX: 0, panY: 0 };
let brush: BrushState = { label: "fg", radiusPx: 5 };
let overlayStyle = { ...DEFAULT_OVERLAY };
let mode: "idle" | "rect" | "brush" = "idle";
let dragStart: Point | null = null;
let activeStroke: Point[] | null = null;
let panning = false;
let panAnchor: Point | null = null;
let spaceHeld = false;

function showBanner(message: string) {
  banner.textContent = message;
  banner.classList.add("visible");
  setTimeout(() => banner.classList.remove("visible"), 6000);
}

function setStatus(message: string) {
  statusEl.textContent = message;
}

function canvasPoint(ev: MouseEvent): Point {
  const r = canvas.getBoundingClientRect();
  return { x: ev.clientX - r.left, y: ev.clientY - r.top };
}

function redraw() {
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!image) return;
  ctx.setTransform(view.zoom, 0, 0, view.zoom, view.panX, view.panY);
  ctx.imageSmoothingEnabled = view.zoom < 1;
  ctx.drawImage(image, 0, 0);
  if (overlayCanvas) ctx.drawImage(overlayCanvas, 0, 0);
  // pending strokes preview: white = lichen, black = background
  const drawStroke = (pts: [number, number][], label: string, radius: number) => {
    ctx.strokeStyle = label === "fg" ? "rgba(255,255,255,0.9)"
                                     : "rgba(0,0,0,0.9)";
    ctx.lineWidth = radius * 2;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    pts.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
    if (pts.length === 1) ctx.lineTo(pts[0][0] + 0.01, pts[0][1]);
    ctx.stroke();
  };
  session?.pending.forEach((s: Stroke) =>
    drawStroke(s.points, s.label, s.brushRadius));
  if (activeStroke && activeStroke.length) {
    drawStroke(activeStroke.map((p) => [p.x, p.y]), brush.label, brush.radiusPx);
  }
  if (mode === "rect" && dragStart && activeStroke?.length) {
    const end = activeStroke[activeStroke.length - 1];
    const r = normalizedRect(dragStart, end);
    ctx.strokeStyle = "rgba(80,180,255,0.9)";
    ctx.lineWidth = 2 / view.zoom;
    ctx.strokeRect(r.x, r.y, r.width, r.height);
  }
}

async function refreshOverlay(bytes: Uint8Array) {
  if (!image) return;
  const buf = new ArrayBuffer(bytes.length);
  new Uint8Array(buf).set(bytes);
  const blob = new Blob([buf], { type: "image/png" });
  const bmp = await createImageBitmap(blob);
  const work = document.createElement("canvas");
  work.width = bmp.width;
  work.height = bmp.height;
  const wctx = work.getContext("2d")!;
  wctx.drawImage(bmp, 0, 0);
  const rgba = wctx.getImageData(0, 0, bmp.width, bmp.height);
  const tinted = tintMask(rgbaToGray(rgba.data), overlayStyle);
  const overlayData = wctx.createImageData(bmp.width, bmp.height);
  overlayData.data.set(tinted);
  wctx.putImageData(overlayData, 0, 0);
  overlayCanvas = work;
  redraw();
}

function updateControls() {
  const busy = session?.busy ?? false;
  applyBtn.disabled = !session || session.pending.length === 0 || busy
    || session.finalized;
  undoBtn.disabled = !session || session.historyDepth === 0 || busy
    || session.finalized;
  finalizeBtn.disabled = !session || !session.maskBytes || busy
    || session.finalized;
  depthEl.textContent = String(session?.historyDepth ?? 0);
  fgBtn.classList.toggle("active", brush.label === "fg");
  bgBtn.classList.toggle("active", brush.label === "bg");
}

async function openImage(info: ImageInfo) {
  const img = new Image();
  img.src = info.url;
  await img.decode();
  image = img;
  overlayCanvas = null;
  session = new AnnotationSession(transport, info.id, img.naturalWidth,
                                  img.naturalHeight, {
    onMask: (bytes) => void refreshOverlay(bytes),
    onPendingChange: () => {
      updateControls();
      redraw();
    },
    onError: showBanner,
    onBusyChange: updateControls,
  });
  const fitZoom = Math.min(canvas.width / img.naturalWidth,
                           canvas.height / img.naturalHeight);
  view = {
    zoom: fitZoom,
    panX: (canvas.width - img.naturalWidth * fitZoom) / 2,
    panY: (canvas.height - img.naturalHeight * fitZoom) / 2,
  };
  mode = "rect";
  setStatus(`${info.id}: drag a rectangle that encloses the lichens`);
  updateControls();
  redraw();
}

canvas.addEventListener("mousedown", (ev) => {
  if (!session || !image) return;
  const cpt = canvasPoint(ev);
  if (ev.button === 1 || spaceHeld) {
    panning = true;
    panAnchor = cpt;
    ev.preventDefault();
    return;
  }
  if (ev.button !== 0 || session.finalized) return;
  const ipt = canvasToImage(cpt, view);
  dragStart = ipt;
  activeStroke = [ipt];
  redraw();
});

canvas.addEventListener("mousemove", (ev) => {
  const cpt = canvasPoint(ev);
  if (panning && panAnchor) {
    view = { ...view, panX: view.panX + cpt.x - panAnchor.x,
             panY: view.panY + cpt.y - panAnchor.y };
    panAnchor = cpt;
    redraw();
    return;
  }
  if (!activeStroke) return;
  activeStroke.push(canvasToImage(cpt, view));
  redraw();
});

window.addEventListener("mouseup", () => {
  if (panning) {
    panning = false;
    panAnchor = null;
    return;
  }
  if (!session || !activeStroke || !dragStart) {
    activeStroke = null;
    dragStart = null;
    return;
  }
  const stroke = activeStroke;
  const start = dragStart;
  activeStroke = null;
  dragStart = null;
  if (mode === "rect") {
    const end = stroke[stroke.length - 1];
    const r = normalizedRect(start, end);
    const rect = {
      x: Math.max(0, Math.round(r.x)),
      y: Math.max(0, Math.round(r.y)),
      width: Math.min(session.width, Math.round(r.width)),
      height: Math.min(session.height, Math.round(r.height)),
    };
    if (rect.width < 4 || rect.height < 4) {
      redraw();
      return;
    }
    rect.width = Math.min(rect.width, session.width - rect.x);
    rect.height = Math.min(rect.height, session.height - rect.y);
    mode = "brush";
    setStatus("segmenting…");
    session.init(rect).then(
      () => setStatus("paint fg (white) / bg (black) strokes, then Apply"),
      () => {
        mode = "rect";
        setStatus("init failed; drag the rectangle again");
      },
    );
  } else if (mode === "brush") {
    session.addStroke(stroke, brush);
  }
  updateControls();
  redraw();
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  view = zoomAt(view, canvasPoint(ev), ev.deltaY < 0 ? 1.2 : 1 / 1.2);
  redraw();
}, { passive: false });

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  if (ev.code === "Space") spaceHeld = true;
  else if (ev.key === "f") brush = { ...brush, label: "fg" };
  else if (ev.key === "b") brush = { ...brush, label: "bg" };
  else if (ev.key === "x") {
    brush = { ...brush, label: brush.label === "fg" ? "bg" : "fg" };
  } else if (ev.key === "[") {
    brush = { ...brush, radiusPx: Math.max(1, brush.radiusPx - 1) };
    radiusInput.value = String(brush.radiusPx);
  } else if (ev.key === "]") {
    brush = { ...brush, radiusPx: brush.radiusPx + 1 };
    radiusInput.value = String(brush.radiusPx);
  } else if (ev.key === "u") void session?.undo();
  else if (ev.key === "Enter") void session?.submit();
  updateControls();
});
window.addEventListener("keyup", (ev) => {
  if (ev.code === "Space") spaceHeld = false;
});

fgBtn.addEventListener("click", () => {
  brush = { ...brush, label: "fg" };
  updateControls();
});
bgBtn.addEventListener("click", () => {
  brush = { ...brush, label: "bg" };
  updateControls();
});
radiusInput.addEventListener("input", () => {
  brush = { ...brush, radiusPx: Math.max(1, Number(radiusInput.value)) };
});
opacityInput.addEventListener("input", () => {
  overlayStyle = { ...overlayStyle, opacity: Number(opacityInput.value) / 100 };
  if (session?.maskBytes) void refreshOverlay(session.maskBytes);
});
applyBtn.addEventListener("click", () => void session?.submit());
undoBtn.addEventListener("click", () => void session?.undo());
finalizeBtn.addEventListener("click", () => {
  session?.finalize().then(() => {
    setStatus("saved as the manual mask");
    updateControls();
  });
});

async function boot() {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  try {
    const images = await transport.listImages();
    listEl.innerHTML = "";
    for (const info of images) {
      const li = document.createElement("li");
      li.textContent = `${info.id}${info.hasManualMask ? " ✓" : ""}`;
      li.title = `${info.status} / ${info.split}`;
      li.addEventListener("click", () => void openImage(info));
      listEl.appendChild(li);
    }
    setStatus(images.length ? "pick an image" : "dataset has no rectified images");
  } catch (e) {
    showBanner(String(e));
  }
}

window.addEventListener("resize", () => {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  redraw();
});

void boot();
