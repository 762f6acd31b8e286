"""HTTP service exposing the library to the prompt UI.

API v1 (JSON unless noted):

* GET  /v1/healthz
* POST /v1/images                      raw container or PNG body -> session
* GET  /v1/images/{id}/render?window=lo,hi  -> 8-bit PNG
* POST /v1/images/{id}/prompts         append or replace the prompt list
* POST /v1/images/{id}/segment?backend=builtin|remote -> mask + metadata
* POST /v1/pipeline/skinband           band mask + masked image
* POST /v1/pipeline/dualsos            ellipse fit + dual-SoS reconstruction
* POST /v1/pipeline/vessels            refined vessel labels + stats

Rasters in responses use the segmentation wire protocol's encoding
conventions. Errors are structured {error: {code, message}}; malformed
input never crashes the service. Results are bit-identical to the
corresponding library calls.
"""

from __future__ import annotations

import io
import os
import tempfile
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse, Response
from PIL import Image as PILImage

from .containers import MAGIC, read_container
from .core import BINARY, MULTILABEL, Image2D, ImageGrid, LabelMask, PromptPoint
from .dualsos import das_dual_sos, fit_ellipse_from_mask
from .errors import (
    BackendError,
    ContainerError,
    JobCancelledError,
    MalformedResponseError,
    MaskDimensionMismatchError,
    PatkError,
    PromptError,
    TransportError,
)
from .maskops import VesselCriteria, apply_mask, connected_components, refine_vessels, region_stats, skin_band_mask
from .pipeline import geometry_from_config
from .protocol import encode_image, encode_mask, error_body, transport_normalize
from .segment import BuiltinParams, SegmentRequest, SegmentResult, builtin_segment, remote_segment

DEFAULT_PITCH_MM = 0.1


class Session:
    """One uploaded image and its prompt list; mutation is serialized."""

    def __init__(self, image: Image2D):
        self.image = image
        self.prompts: list[PromptPoint] = []
        self.last_mask: LabelMask | None = None
        self.lock = threading.Lock()


class JobPool:
    """Bounded worker pool for reconstruction jobs with per-job cancellation."""

    def __init__(self, max_workers: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=max_workers)
        self._cancels: dict[str, threading.Event] = {}
        self._lock = threading.Lock()

    def run(self, fn):
        """Run fn(should_cancel) on the pool; blocks until done."""
        job_id = uuid.uuid4().hex
        event = threading.Event()
        with self._lock:
            self._cancels[job_id] = event
        try:
            future = self._pool.submit(fn, event.is_set)
            return future.result()
        finally:
            with self._lock:
                self._cancels.pop(job_id, None)

    def cancel_all(self):
        """Cancellation hook: flags every in-flight job."""
        with self._lock:
            for event in self._cancels.values():
                event.set()

    @property
    def active(self) -> int:
        with self._lock:
            return len(self._cancels)


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content=error_body(code, message))


def create_app(remote_endpoint: str | None = None, max_workers: int = 2) -> FastAPI:
    app = FastAPI(title="patk service", version="1")
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    app.state.jobs = JobPool(max_workers=max_workers)
    app.state.remote_endpoint = remote_endpoint
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    @app.exception_handler(PatkError)
    def patk_error_handler(request: Request, exc: PatkError):
        if isinstance(exc, BackendError):
            return _error_response(502, exc.code, exc.message)
        if isinstance(exc, TransportError):
            return _error_response(502, "backend_unreachable", str(exc))
        if isinstance(exc, (MalformedResponseError, MaskDimensionMismatchError)):
            return _error_response(502, "bad_backend_response", str(exc))
        if isinstance(exc, JobCancelledError):
            return _error_response(409, "cancelled", str(exc))
        if isinstance(exc, ContainerError):
            return _error_response(400, "bad_container", str(exc))
        return _error_response(400, type(exc).__name__, str(exc))

    @app.exception_handler(KeyError)
    def key_error_handler(request: Request, exc: KeyError):
        return _error_response(404, "unknown_session", f"no such session: {exc}")

    @app.exception_handler(ValueError)
    def value_error_handler(request: Request, exc: ValueError):
        return _error_response(400, "bad_request", str(exc))

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok", "active_jobs": app.state.jobs.active}

    @app.post("/v1/images")
    async def upload_image(request: Request):
        body = await request.body()
        pitch = float(request.query_params.get("pitch_mm", DEFAULT_PITCH_MM))
        ox = float(request.query_params.get("origin_x_mm", 0.0))
        oy = float(request.query_params.get("origin_y_mm", 0.0))
        image = _decode_upload(body, pitch, ox, oy)
        session_id = uuid.uuid4().hex
        with sessions_lock:
            sessions[session_id] = Session(image)
        return {
            "session_id": session_id,
            "width": image.grid.width_px,
            "height": image.grid.height_px,
        }

    @app.get("/v1/images/{session_id}/render")
    def render(session_id: str, window: str = "0,1"):
        session = get_session(session_id)
        try:
            lo, hi = (float(v) for v in window.split(","))
        except ValueError:
            return _error_response(400, "bad_request", f"bad window {window!r}")
        if not (0.0 <= lo < hi <= 1.0):
            return _error_response(400, "bad_request", "window must satisfy 0 <= lo < hi <= 1")
        norm = transport_normalize(session.image.data)
        scaled = np.clip((norm - lo) / (hi - lo), 0.0, 1.0)
        u8 = np.rint(scaled * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        PILImage.frombytes("L", (u8.shape[1], u8.shape[0]), u8.tobytes()).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/v1/images/{session_id}/prompts")
    def post_prompts(session_id: str, payload: dict = Body(...)):
        session = get_session(session_id)
        items = payload.get("prompts")
        if not isinstance(items, list):
            return _error_response(400, "bad_request", "payload needs a prompts list")
        try:
            new = [PromptPoint(x_px=int(p["x"]), y_px=int(p["y"]), label=int(p["label"]))
                   for p in items]
        except (KeyError, TypeError, ValueError) as e:
            return _error_response(400, "bad_request", f"bad prompt entry: {e}")
        for p in new:
            p.check_inside(session.image.grid)
        with session.lock:
            if payload.get("replace", False):
                session.prompts = list(new)
            else:
                session.prompts.extend(new)
            current = list(session.prompts)
        return {"prompts": [{"x": p.x_px, "y": p.y_px, "label": p.label} for p in current]}

    def run_segmentation(session: Session, backend: str, mode: str,
                         params: dict) -> SegmentResult:
        with session.lock:
            prompts = tuple(session.prompts)
        request_obj = SegmentRequest(image=session.image, prompts=prompts, mode=mode)
        if backend == "remote":
            endpoint = app.state.remote_endpoint
            if not endpoint:
                raise PromptError("no remote backend configured")
            return remote_segment(endpoint, request_obj)
        t0 = time.perf_counter()
        mask = builtin_segment(request_obj, BuiltinParams(**params))
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        return SegmentResult(mask=mask, elapsed_ms=elapsed_ms, backend="builtin")

    @app.post("/v1/images/{session_id}/segment")
    def segment_image(session_id: str, backend: str = "builtin",
                      payload: dict = Body(default={})):
        if backend not in ("builtin", "remote"):
            return _error_response(400, "bad_request", f"unknown backend {backend!r}")
        session = get_session(session_id)
        result = run_segmentation(session, backend,
                                  payload.get("mode", BINARY),
                                  payload.get("params", {}))
        with session.lock:
            session.last_mask = result.mask
        return {
            "mask": encode_mask(result.mask.labels, payload.get("encoding", "u8le-base64")),
            "elapsed_ms": result.elapsed_ms,
            "backend": result.backend,
        }

    def stage_fragment(name: str, params: dict, t0: float) -> dict:
        return {"name": name, "wall_time_s": time.perf_counter() - t0, "params": params}

    @app.post("/v1/pipeline/skinband")
    def pipeline_skinband(payload: dict = Body(...)):
        session = get_session(str(payload.get("session_id")))
        t0 = time.perf_counter()
        result = run_segmentation(session, payload.get("backend", "builtin"),
                                  BINARY, payload.get("params", {}))
        depth = float(payload.get("depth_mm", 10.0))
        offset = float(payload.get("offset_mm", 0.0))
        apply = payload.get("apply", "keep")
        band = skin_band_mask(result.mask, session.image.grid,
                              depth_mm=depth, offset_mm=offset)
        out = apply_mask(session.image, band, apply)
        return {
            "image": encode_image(transport_normalize(out.data)),
            "band_mask": encode_mask(band.labels),
            "report": stage_fragment("skin-band",
                                     {"depth_mm": depth, "offset_mm": offset,
                                      "apply": apply, "backend": result.backend}, t0),
        }

    @app.post("/v1/pipeline/dualsos")
    def pipeline_dualsos(payload: dict = Body(...)):
        session = get_session(str(payload.get("session_id")))
        t0 = time.perf_counter()
        try:
            channels_path = payload["channels"]
            geometry_cfg = payload["geometry"]
            c_in = float(payload["c_in"])
            c_out = float(payload["c_out"])
        except (KeyError, TypeError, ValueError) as e:
            return _error_response(400, "bad_request", f"missing dualsos field: {e}")
        data = read_container(channels_path)
        geometry = geometry_from_config(geometry_cfg)
        result = run_segmentation(session, payload.get("backend", "builtin"),
                                  BINARY, payload.get("params", {}))
        ellipse = fit_ellipse_from_mask(result.mask)
        grid = session.image.grid
        image = app.state.jobs.run(
            lambda should_cancel: das_dual_sos(
                data, geometry, grid, ellipse, c_in, c_out,
                should_cancel=should_cancel))
        return {
            "image": encode_image(transport_normalize(image.data)),
            "ellipse": {"cx": ellipse.cx_mm, "cy": ellipse.cy_mm,
                        "a": ellipse.a_mm, "b": ellipse.b_mm,
                        "theta": ellipse.theta_rad},
            "report": stage_fragment("dualsos", {"c_in": c_in, "c_out": c_out}, t0),
        }

    @app.post("/v1/pipeline/vessels")
    def pipeline_vessels(payload: dict = Body(...)):
        session = get_session(str(payload.get("session_id")))
        t0 = time.perf_counter()
        result = run_segmentation(session, payload.get("backend", "builtin"),
                                  MULTILABEL, payload.get("params", {}))
        criteria = VesselCriteria(**payload.get("criteria", {}))
        labels = result.mask
        if labels.kind != MULTILABEL:
            labels = connected_components(labels)
        refined = refine_vessels(labels, session.image, criteria)
        stats = region_stats(refined, session.image)
        return {
            "labels": encode_mask(refined.labels),
            "regions": [
                {"label": s.label, "area_px": s.area_px, "area_mm2": s.area_mm2,
                 "mean_intensity": s.mean_intensity,
                 "centroid_px": list(s.centroid_px)}
                for s in stats
            ],
            "report": stage_fragment("vessels", {
                "area_min_mm2": criteria.area_min_mm2,
                "area_max_mm2": criteria.area_max_mm2,
                "intensity_rel_min": criteria.intensity_rel_min,
            }, t0),
        }

    return app


def _decode_upload(body: bytes, pitch_mm: float, origin_x_mm: float,
                   origin_y_mm: float) -> Image2D:
    """Decode an uploaded container (image kind) or grayscale PNG."""
    if body[:4] == MAGIC:
        with tempfile.NamedTemporaryFile(suffix=".paz", delete=False) as f:
            f.write(body)
            tmp = f.name
        try:
            obj = read_container(tmp)
        finally:
            os.unlink(tmp)
        if not isinstance(obj, Image2D):
            raise ValueError("uploaded container must hold an image")
        return obj
    if body[:4] == b"\x89PNG":
        img = PILImage.open(io.BytesIO(body))
        if img.mode not in ("L", "I;16", "I"):
            img = img.convert("L")
        arr = np.asarray(img).astype(np.float32)
        if arr.max() > 0:
            arr = arr / float(arr.max())
        grid = ImageGrid(origin_x_mm=origin_x_mm, origin_y_mm=origin_y_mm,
                         pitch_mm=pitch_mm, width_px=arr.shape[1],
                         height_px=arr.shape[0])
        return Image2D(grid=grid, data=arr)
    raise ValueError("upload must be a container or a PNG")


def serve(bind_address: str = "127.0.0.1:8080", remote_endpoint: str | None = None,
          max_workers: int = 2):
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    host, _, port = bind_address.rpartition(":")
    app = create_app(remote_endpoint=remote_endpoint, max_workers=max_workers)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
