"""Local annotation service: JSON-over-HTTP API driving GrabCut sessions,
plus static hosting of the browser UI bundle. Loopback-only by default."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .errors import ModelFailure
from .grabcut import GrabcutParams, Stroke
from .imaging import mask_png_bytes, save_mask
from .pipeline import Manifest, SessionState, replay_session


@dataclass
class _LiveSession:
    state: SessionState
    mask: np.ndarray
    version: int = 0
    finalized: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


def _parse_strokes(payload: list[dict]) -> list[Stroke]:
    strokes = []
    for s in payload:
        pts = np.asarray(s["points"], dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise HTTPException(422, "stroke points must be a non-empty [x,y] list")
        label = s.get("label")
        if label not in ("fg", "bg"):
            raise HTTPException(422, f"stroke label must be fg or bg, got {label!r}")
        strokes.append(
            Stroke(points=pts, label=label,
                   brush_radius=int(s.get("brushRadius", 5)))
        )
    return strokes


def create_app(dataset_root: str | Path, seed: int = 0,
               ui_dir: str | Path | None = None) -> FastAPI:
    root = Path(dataset_root)
    app = FastAPI(title="lichenmeter annotation service")
    sessions: dict[str, _LiveSession] = {}
    sessions_guard = threading.Lock()

    def manifest() -> Manifest:
        return Manifest.load(root)

    def entry_or_404(m: Manifest, image_id: str):
        if image_id not in m.images:
            raise HTTPException(404, f"unknown image {image_id!r}")
        return m.images[image_id]

    @app.get("/api/images")
    def list_images():
        from PIL import Image as PILImage

        m = manifest()
        out = []
        for image_id in m.ids():
            e = m.images[image_id]
            if e.rectified is None:
                continue
            with PILImage.open(root / e.rectified) as im:
                width, height = im.size  # header only, pixels stay unread
            out.append(
                {
                    "id": image_id,
                    "status": e.status,
                    "split": e.split,
                    "url": f"/api/images/{image_id}",
                    "width": width,
                    "height": height,
                    "hasManualMask": e.mask_manual is not None,
                }
            )
        return out

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        m = manifest()
        e = entry_or_404(m, image_id)
        if e.rectified is None:
            raise HTTPException(404, f"{image_id} is not rectified yet")
        return FileResponse(root / e.rectified, media_type="image/png")

    @app.post("/api/sessions/{image_id}/init")
    async def init_session(image_id: str, request: Request):
        body = await request.json()
        rect = body.get("rect")
        if not rect:
            raise HTTPException(422, "missing init rectangle")
        m = manifest()
        entry_or_404(m, image_id)
        img = m.load_rectified(image_id)
        state = SessionState(
            image_id=image_id,
            rect=(int(rect["x"]), int(rect["y"]),
                  int(rect["width"]), int(rect["height"])),
            params=GrabcutParams(seed=seed),
        )
        try:
            mask = replay_session(img, state)
        except (ValueError, ModelFailure) as e:
            raise HTTPException(422, str(e))
        with sessions_guard:
            sessions[image_id] = _LiveSession(state=state, mask=mask)
        return _mask_ref(image_id, sessions[image_id])

    def session_or_404(image_id: str) -> _LiveSession:
        with sessions_guard:
            if image_id not in sessions:
                raise HTTPException(404, f"no session for {image_id!r}")
            return sessions[image_id]

    def _mask_ref(image_id: str, live: _LiveSession) -> dict:
        return {
            "imageId": image_id,
            "version": live.version,
            "maskUrl": f"/api/sessions/{image_id}/mask?v={live.version}",
            "historyDepth": len(live.state.stroke_groups),
        }

    @app.post("/api/sessions/{image_id}/strokes")
    async def post_strokes(image_id: str, request: Request):
        body = await request.json()
        strokes = _parse_strokes(body.get("strokes", []))
        if not strokes:
            raise HTTPException(422, "no strokes given")
        live = session_or_404(image_id)
        with live.lock:
            if live.finalized:
                raise HTTPException(409, "session already finalized")
            m = manifest()
            img = m.load_rectified(image_id)
            live.state.stroke_groups.append(strokes)
            try:
                live.mask = replay_session(img, live.state)
            except ModelFailure as e:
                live.state.stroke_groups.pop()
                raise HTTPException(422, str(e))
            live.version += 1
            return _mask_ref(image_id, live)

    @app.post("/api/sessions/{image_id}/undo")
    def undo(image_id: str):
        live = session_or_404(image_id)
        with live.lock:
            if live.finalized:
                raise HTTPException(409, "session already finalized")
            if not live.state.stroke_groups:
                raise HTTPException(409, "nothing to undo")
            live.state.stroke_groups.pop()
            m = manifest()
            img = m.load_rectified(image_id)
            live.mask = replay_session(img, live.state)
            live.version += 1
            return _mask_ref(image_id, live)

    @app.get("/api/sessions/{image_id}/mask")
    def get_mask(image_id: str):
        live = session_or_404(image_id)
        return Response(content=mask_png_bytes(live.mask), media_type="image/png")

    @app.post("/api/sessions/{image_id}/finalize")
    def finalize(image_id: str):
        live = session_or_404(image_id)
        if not live.lock.acquire(blocking=False):
            raise HTTPException(409, "session is busy")
        try:
            if live.finalized:
                raise HTTPException(409, "session already finalized")
            m = manifest()
            e = entry_or_404(m, image_id)
            rel = f"masks/manual/{image_id}.png"
            save_mask(live.mask, root / rel)
            (root / f"sessions/{image_id}.json").write_text(
                json.dumps(live.state.to_dict(), sort_keys=True), encoding="utf-8"
            )
            e.mask_manual = rel
            e.status = "annotated"
            m.save()
            live.finalized = True
            return JSONResponse({"imageId": image_id, "mask": rel,
                                 "historyDepth": len(live.state.stroke_groups)})
        finally:
            live.lock.release()

    if ui_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend/dist"
        ui_dir = bundled if bundled.exists() else None
    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(dataset_root: str | Path, host: str = "127.0.0.1", port: int = 8642,
          seed: int = 0, ui_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(dataset_root, seed=seed, ui_dir=ui_dir)
    print(f"annotation service: http://{host}:{port}/  (dataset: {dataset_root})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
