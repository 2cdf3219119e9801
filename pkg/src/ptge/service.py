"""HTTP API over the annotation store.

Endpoints (all JSON; errors are ``{"error": {"code", "message"}}``):

- ``POST /rounds``                          create a round (201 / 409)
- ``GET  /rounds/{id}``                     round with progress
- ``GET  /rounds/{id}/pairs?status=...``    pair states, pending first
- ``POST /rounds/{id}/pairs/{pid}/annotation``  body {"text", "annotator", "nonce"?}
- ``POST /rounds/{id}/export``              export (409 until complete)
- ``GET  /rounds/{id}/export``              the manifest, as JSONL
- ``GET  /media/{image_id}``                pair images for the UI
- ``/ui/``                                  built frontend assets, if present

Mutations serialize through the store's single writer; reads are served
from the in-memory snapshot.
"""

from __future__ import annotations

import mimetypes
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ptge.annotation import (
    AnnotationError,
    AnnotationStore,
    DuplicateRound,
    IncompleteRound,
    RoundReadOnly,
    UnknownPair,
    UnknownRound,
    manifest_bytes,
)

_ERROR_STATUS = {
    UnknownRound: (404, "unknown_round"),
    UnknownPair: (404, "unknown_pair"),
    DuplicateRound: (409, "round_exists"),
    RoundReadOnly: (409, "round_read_only"),
    IncompleteRound: (409, "round_incomplete"),
}

MEDIA_EXTENSIONS = (".png", ".jpg", ".jpeg", ".webp", ".bmp", ".gif")


class AnnotationBody(BaseModel):
    text: str
    annotator: str
    nonce: str | None = None


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def create_app(
    store: AnnotationStore,
    media_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="ptge annotation service")
    media_root = Path(media_dir).resolve() if media_dir else None

    @app.exception_handler(AnnotationError)
    async def annotation_error_handler(request: Request, exc: AnnotationError):
        status, code = _ERROR_STATUS.get(type(exc), (400, "bad_request"))
        return _error_response(status, code, str(exc))

    @app.post("/rounds", status_code=201)
    def create_round(round_json: dict):
        round_id = store.create_round(round_json)
        return {"round_id": round_id}

    @app.get("/rounds/{round_id}")
    def get_round(round_id: str):
        return store.round_view(round_id)

    @app.get("/rounds/{round_id}/pairs")
    def get_pairs(round_id: str, status: str = "all"):
        return {"pairs": store.pair_states(round_id, status)}

    @app.post("/rounds/{round_id}/pairs/{pair_id}/annotation")
    def post_annotation(round_id: str, pair_id: str, body: AnnotationBody):
        record = store.submit_annotation(
            round_id, pair_id, body.text, body.annotator, nonce=body.nonce
        )
        return record.to_json()

    @app.post("/rounds/{round_id}/export")
    def export_round(round_id: str):
        rows = store.export_round(round_id)
        return {"round_id": round_id, "exported": True, "count": len(rows)}

    @app.get("/rounds/{round_id}/export")
    def get_export(round_id: str):
        view = store.round_view(round_id)
        if view["status"] != "exported":
            return _error_response(
                409, "round_not_exported", f"round {round_id!r} has not been exported"
            )
        rows = store.export_round(round_id)
        return Response(content=manifest_bytes(rows), media_type="application/x-ndjson")

    @app.get("/media/{image_id}")
    def get_media(image_id: str):
        if media_root is None:
            return _error_response(404, "no_media_dir", "service started without --media")
        candidates = [media_root / image_id]
        candidates += [media_root / f"{image_id}{ext}" for ext in MEDIA_EXTENSIONS]
        for candidate in candidates:
            resolved = candidate.resolve()
            if not resolved.is_relative_to(media_root):
                break
            if resolved.is_file():
                mime = mimetypes.guess_type(resolved.name)[0] or "application/octet-stream"
                return FileResponse(resolved, media_type=mime)
        return _error_response(404, "media_not_found", f"no media for {image_id!r}")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
