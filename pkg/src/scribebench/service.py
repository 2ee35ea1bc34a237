"""Local HTTP API over the dataset registry for the curation workflow:
inspect samples, correct ground truth, reject noisy samples, re-run
preprocessing with per-sample parameters, run engines, view reports.

All registry mutations funnel through one lock (single writer); GET
endpoints never mutate. Optimistic concurrency uses sample revisions:
a stale expected_revision gets 409 and changes nothing. Binds loopback
by default; this is a desk tool, not a public service.
"""

from __future__ import annotations

import re
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .dataset import (
    Registry,
    RevisionConflict,
    SampleNotFound,
    ValidationFailed,
)
from .engines import (
    EngineFailure,
    EngineHandle,
    EngineTimeout,
    EmptyLine,
    InvalidUtf8,
    recognize_reference,
    run_external,
)
from .imaging import load_png, preprocess_line, save_png
from .metrics import align, error_rates
from .textnorm import EmptyAfterNormalization

__all__ = ["create_app", "PAGE_SIZE"]

PAGE_SIZE = 50
RUN_NAME = re.compile(r"^[A-Za-z0-9._-]+$")


class PatchRequest(BaseModel):
    ground_truth: str | None = None
    status: str | None = None
    expected_revision: int
    force: bool = False


class ReprocessRequest(BaseModel):
    blur_k: int = Field(default=4, ge=1)
    threshold: int = Field(default=127, ge=0, le=255)
    invert: bool = True


class RecognizeRequest(BaseModel):
    engine: str


def _sample_doc(sample, processed_exists: bool) -> dict:
    return {
        "id": sample.id,
        "batch": sample.batch,
        "author": sample.author,
        "seq": sample.seq,
        "ground_truth": sample.ground_truth,
        "status": sample.status,
        "revision": sample.revision,
        "split": sample.split,
        "stages": ["raw"] + (["processed"] if processed_exists else []),
    }


def create_app(
    root: Path | str,
    engines: dict[str, EngineHandle] | None = None,
    engine_parallelism: int = 2,
    ui_dir: Path | str | None = None,
) -> FastAPI:
    """Build the curation app over a dataset root.

    The root holds the sample pairs and ``manifest.jsonl`` (created by
    ingesting the root when missing). Engines are named handles the
    recognize endpoint can be pointed at.
    """
    root = Path(root)
    manifest = root / "manifest.jsonl"
    if manifest.exists():
        registry = Registry.load_manifest(manifest)
    else:
        registry = Registry.ingest(root)
        registry.save_manifest(manifest)
    engines = engines or {}
    processed_dir = root / "processed"
    reports_dir = root / "reports"
    write_lock = threading.Lock()
    engine_slots = threading.BoundedSemaphore(engine_parallelism)

    app = FastAPI(title="scribebench review service")

    def processed_file(sample_id: str) -> Path:
        return processed_dir / f"{sample_id}.png"

    def get_or_404(sample_id: str):
        try:
            return registry.get(sample_id)
        except SampleNotFound:
            raise HTTPException(status_code=404, detail=f"no sample {sample_id}")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "samples": len(registry)}

    @app.get("/samples")
    def list_samples(
        split: str | None = None,
        status: str | None = None,
        author: str | None = None,
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=PAGE_SIZE, ge=1, le=500),
    ) -> dict:
        author_num = None
        if author is not None:
            try:
                author_num = int(author)
            except ValueError:
                raise HTTPException(status_code=422, detail=f"bad author {author!r}")
        with write_lock:
            rows = [registry.samples[i] for i in registry.ids()]
        if split is not None:
            rows = [s for s in rows if s.split == split]
        if status is not None:
            rows = [s for s in rows if s.status == status]
        if author_num is not None:
            rows = [s for s in rows if s.author == author_num]
        total = len(rows)
        pages = max(1, -(-total // page_size))
        start = (page - 1) * page_size
        items = [
            _sample_doc(s, processed_file(s.id).exists())
            for s in rows[start : start + page_size]
        ]
        return {"items": items, "total": total, "page": page, "pages": pages}

    @app.get("/samples/{sample_id}")
    def get_sample(sample_id: str) -> dict:
        with write_lock:
            sample = get_or_404(sample_id)
            return _sample_doc(sample, processed_file(sample_id).exists())

    @app.get("/samples/{sample_id}/image")
    def get_image(sample_id: str, stage: str = "raw") -> Response:
        get_or_404(sample_id)
        if stage == "raw":
            path = registry.image_file(sample_id)
        elif stage == "processed":
            path = processed_file(sample_id)
        else:
            raise HTTPException(status_code=422, detail=f"unknown stage {stage!r}")
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no {stage} image for {sample_id}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.patch("/samples/{sample_id}")
    def patch_sample(sample_id: str, req: PatchRequest) -> dict:
        if req.ground_truth is None and req.status is None:
            raise HTTPException(status_code=422, detail="no mutable field in patch")
        with write_lock:
            sample = get_or_404(sample_id)
            try:
                sample = registry.patch(
                    sample_id,
                    ground_truth=req.ground_truth,
                    status=req.status,
                    expected_revision=req.expected_revision,
                    force=req.force,
                )
            except RevisionConflict as exc:
                raise HTTPException(
                    status_code=409,
                    detail={
                        "error": "revision conflict",
                        "current_revision": exc.current_revision,
                    },
                )
            except ValidationFailed as exc:
                raise HTTPException(
                    status_code=422,
                    detail={
                        "error": "charset violations",
                        "violations": [
                            {"position": pos, "codepoint": f"U+{ord(ch):04X}"}
                            for pos, ch in exc.violations
                        ],
                    },
                )
            except (EmptyAfterNormalization, ValueError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            registry.save_manifest(manifest)
            return _sample_doc(sample, processed_file(sample_id).exists())

    @app.post("/samples/{sample_id}/reprocess")
    def reprocess_sample(sample_id: str, req: ReprocessRequest) -> dict:
        with write_lock:
            sample = get_or_404(sample_id)
            raw = load_png(registry.image_file(sample_id))
            processed = preprocess_line(
                raw, blur_k=req.blur_k, t=req.threshold, invert=req.invert
            )
            set_ratio = float((processed.array != 0).mean())
            processed_dir.mkdir(exist_ok=True)
            save_png(processed, processed_file(sample_id))
            sample = registry.bump_revision(sample_id)
            registry.save_manifest(manifest)
            return {
                "id": sample_id,
                "revision": sample.revision,
                "stage": "processed",
                "width": processed.width,
                "height": processed.height,
                "low_contrast": set_ratio > 0.95 or set_ratio < 0.005,
            }

    @app.post("/samples/{sample_id}/recognize")
    def recognize_sample(sample_id: str, req: RecognizeRequest) -> dict:
        with write_lock:
            sample = get_or_404(sample_id)
            reference_text = sample.ground_truth
        handle = engines.get(req.engine)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"no engine {req.engine!r}")
        path = processed_file(sample_id)
        if not path.exists():
            raise HTTPException(
                status_code=404,
                detail=f"no processed image for {sample_id}; reprocess first",
            )
        with engine_slots:
            try:
                if handle.kind == "external":
                    hypothesis = run_external(handle, path)
                else:
                    try:
                        hypothesis = recognize_reference(handle.model, load_png(path))
                    except EmptyLine:
                        hypothesis = ""
            except (EngineFailure, EngineTimeout, InvalidUtf8) as exc:
                raise HTTPException(
                    status_code=502,
                    detail={
                        "error": str(exc),
                        "stderr": getattr(exc, "stderr", ""),
                    },
                )
        alignment = align(list(reference_text), list(hypothesis))
        doc = {
            "hypothesis": hypothesis,
            "alignment": {
                "S": alignment.substitutions,
                "D": alignment.deletions,
                "I": alignment.insertions,
                "matches": alignment.matches,
                "N": alignment.ref_len,
                "ops": [
                    {"op": o.op, "ref": o.ref, "hyp": o.hyp} for o in alignment.ops
                ],
            },
            "cer": alignment.distance / alignment.ref_len * 100.0 if alignment.ref_len else 0.0,
        }
        if hypothesis:
            doc["wer"] = error_rates(reference_text, hypothesis).wer
        return doc

    @app.get("/reports/{run}")
    def get_report(run: str) -> Response:
        if not RUN_NAME.match(run):
            raise HTTPException(status_code=404, detail="bad run name")
        path = reports_dir / f"{run}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no report {run!r}")
        return Response(content=path.read_bytes(), media_type="application/json")

    ui_path = (
        Path(ui_dir)
        if ui_dir is not None
        else Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    )
    if ui_path.is_dir():
        app.mount("/ui", StaticFiles(directory=ui_path, html=True), name="ui")

    return app
