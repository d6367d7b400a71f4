"""HTTP facade over project storage, grouping, linking, and rendering.

One process serves many projects.  Each project lives in a single
interchange document under the data directory, rewritten atomically on
every mutation, with uploaded image files in a per-project subdirectory.
A project's requests serialize on a per-project lock; the only
long-running operation (automatic grouping) does its feature extraction
against a snapshot so readers are never blocked behind it.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, File, Form, Query, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import (
    AutogroupRunningError,
    PhotolinkError,
    UnknownImageError,
    UnknownJobError,
    UnknownProjectError,
)
from .geometry import Quad
from .grouping import DEFAULT_SEED, auto_group, compute_groups
from .interchange import export_project, import_project
from .project import (
    IMAGE_ID_PREFIX,
    ImageRecord,
    Link,
    Project,
    add_image,
    create_manual_link,
    delete_link,
    get_image,
    new_project,
    next_id,
    parse_iso_date,
)
from .raster import decode_image, rgba_to_png_bytes, sniff_extension
from .rendering import render_focus_view

PROJECT_ID_PREFIX = "p"
JOB_ID_PREFIX = "job"

# Engine error codes that do not map to 422.
_STATUS_BY_CODE = {
    "project_not_found": 404,
    "image_not_found": 404,
    "link_not_found": 404,
    "job_not_found": 404,
    "link_exists": 409,
    "image_exists": 409,
    "autogroup_running": 409,
    "unsupported_format": 415,
    "unreadable_image": 415,
    "bad_date": 400,
    "internal_error": 500,
}

_MEDIA_TYPES = {
    ".png": "image/png",
    ".pgm": "image/x-portable-graymap",
    ".ppm": "image/x-portable-pixmap",
}


@dataclass
class Job:
    """State of one background autogroup run."""

    job_id: str
    project_id: str
    status: str  # "running" | "done" | "failed"
    result: dict | None = None
    error: dict | None = None


class ProjectStore:
    """All projects under one data directory, with per-project locking.

    Projects are kept in memory and written through to
    ``{data_dir}/{project_id}.json`` (canonical interchange bytes) on
    every mutation, so a restarted service reloads exactly what a
    crashed one had committed.
    """

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._master = threading.Lock()
        self._projects: dict[str, Project] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._jobs: dict[str, Job] = {}
        self._running_autogroup: set[str] = set()
        self._executor = ThreadPoolExecutor(max_workers=2)
        for path in sorted(self.data_dir.glob("*.json")):
            project = import_project(path.read_bytes())
            project.project_id = path.stem  # the file name is authoritative
            self._projects[project.project_id] = project
            self._locks[project.project_id] = threading.RLock()

    # -- project access ------------------------------------------------

    def create(self, name: str) -> Project:
        with self._master:
            project_id = next_id(self._projects, PROJECT_ID_PREFIX)
            project = new_project(project_id, name)
            self._projects[project_id] = project
            self._locks[project_id] = threading.RLock()
        self.save(project)
        return project

    def ids(self) -> list[str]:
        with self._master:
            return sorted(self._projects, key=lambda pid: (len(pid), pid))

    def get(self, project_id: str) -> Project:
        with self._master:
            project = self._projects.get(project_id)
        if project is None:
            raise UnknownProjectError(f"unknown project id {project_id!r}",
                                      entity=project_id)
        return project

    def lock(self, project_id: str) -> threading.RLock:
        with self._master:
            lock = self._locks.get(project_id)
        if lock is None:
            raise UnknownProjectError(f"unknown project id {project_id!r}",
                                      entity=project_id)
        return lock

    def replace(self, project_id: str, project: Project):
        """Swap in a freshly imported project under an existing id."""
        project.project_id = project_id
        with self._master:
            self._projects[project_id] = project
        self.save(project)

    def save(self, project: Project):
        data = export_project(project)
        target = self.data_dir / f"{project.project_id}.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_bytes(data)
        os.replace(tmp, target)

    def image_dir(self, project_id: str) -> Path:
        directory = self.data_dir / project_id
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    # -- background autogroup jobs ---------------------------------------

    def start_autogroup(self, project_id: str, seed: int) -> Job:
        self.get(project_id)
        with self._master:
            if project_id in self._running_autogroup:
                raise AutogroupRunningError(
                    f"an autogroup job is already running for project "
                    f"{project_id!r}", entity=project_id)
            job = Job(job_id=next_id(self._jobs, JOB_ID_PREFIX),
                      project_id=project_id, status="running")
            self._jobs[job.job_id] = job
            self._running_autogroup.add(project_id)
        self._executor.submit(self._autogroup_worker, job, seed)
        return job

    def get_job(self, project_id: str, job_id: str) -> Job:
        self.get(project_id)
        with self._master:
            job = self._jobs.get(job_id)
        if job is None or job.project_id != project_id:
            raise UnknownJobError(f"unknown job id {job_id!r}", entity=job_id)
        return job

    def run_warmup(self, project_id: str, seed: int) -> dict:
        """Extract and match features against a snapshot, off the lock.

        Returns the warmed feature cache; the apply pass then re-runs the
        grouping against live state, hitting the cache for every image
        whose content is unchanged.
        """
        with self.lock(project_id):
            snapshot = copy.deepcopy(self.get(project_id))
        cache: dict = {}
        auto_group(snapshot, seed=seed, feature_cache=cache)
        return cache

    def _autogroup_worker(self, job: Job, seed: int):
        try:
            cache = self.run_warmup(job.project_id, seed)
            with self.lock(job.project_id):
                project = self.get(job.project_id)
                verified, groups = auto_group(project, seed=seed,
                                              feature_cache=cache)
                self.save(project)
            result = {
                "groups": [_group_json(g) for g in groups],
                "verified_pairs": [
                    {"a": pair.image_a, "b": pair.image_b,
                     "inliers": len(pair.inlier_matches)}
                    for pair in verified],
            }
            with self._master:
                job.status = "done"
                job.result = result
        except PhotolinkError as exc:
            with self._master:
                job.status = "failed"
                job.error = {"code": exc.code, "message": str(exc),
                             "entity": exc.entity}
        except Exception as exc:
            with self._master:
                job.status = "failed"
                job.error = {"code": "internal_error", "message": str(exc),
                             "entity": None}
        finally:
            with self._master:
                self._running_autogroup.discard(job.project_id)


# -- JSON shapes --------------------------------------------------------


def _project_descriptor(project: Project) -> dict:
    return {"id": project.project_id, "name": project.name,
            "image_count": len(project.images),
            "link_count": len(project.links)}


def _image_json(project: Project, record: ImageRecord) -> dict:
    stamp = record.capture_date.isoformat() if record.capture_date else None
    return {"id": record.image_id, "width": record.width,
            "height": record.height, "capture_date": stamp,
            "title": record.title,
            "file": f"/projects/{project.project_id}/images/"
                    f"{record.image_id}/file"}


def _link_json(link: Link) -> dict:
    doc: dict = {"id": link.link_id, "a": link.image_a, "b": link.image_b,
                 "origin": link.origin}
    if link.quad_a is not None:
        doc["quad_a"] = [[x, y] for x, y in link.quad_a.points]
        doc["quad_b"] = [[x, y] for x, y in link.quad_b.points]
    if link.pairs is not None:
        doc["pairs"] = [list(row) for row in link.pairs]
    doc["homography"] = link.homography.flat()
    return doc


def _group_json(group) -> dict:
    return {"id": group.group_id, "members": list(group.members)}


def _project_json(project: Project) -> dict:
    return {"id": project.project_id, "name": project.name,
            "images": [_image_json(project, project.images[i])
                       for i in sorted(project.images)],
            "links": [_link_json(project.links[i])
                      for i in sorted(project.links)]}


def _job_json(job: Job) -> dict:
    doc: dict = {"id": job.job_id, "project": job.project_id,
                 "status": job.status}
    if job.result is not None:
        doc["result"] = job.result
    if job.error is not None:
        doc["error"] = job.error
    return doc


# -- request bodies -----------------------------------------------------


class ProjectBody(BaseModel):
    name: str = ""


class LinkBody(BaseModel):
    a: str
    b: str
    quad_a: list[tuple[float, float]] = Field(min_length=4, max_length=4)
    quad_b: list[tuple[float, float]] = Field(min_length=4, max_length=4)


def _to_quad(points: list[tuple[float, float]]) -> Quad:
    return Quad(tuple((float(x), float(y)) for x, y in points))


# -- application --------------------------------------------------------


def create_app(data_dir, *, seed: int = DEFAULT_SEED,
               ui_dir=None) -> FastAPI:
    """Build the service around one data directory.

    ``seed`` feeds the deterministic per-pair verification; ``ui_dir``,
    when it names an existing directory, is served as the static bundle
    under ``/ui``.
    """
    store = ProjectStore(Path(data_dir))
    app = FastAPI(title="photolink")
    app.state.store = store

    @app.exception_handler(PhotolinkError)
    async def engine_error(request: Request, exc: PhotolinkError):
        status = _STATUS_BY_CODE.get(exc.code, 422)
        return JSONResponse(status_code=status,
                            content={"code": exc.code, "message": str(exc),
                                     "entity": exc.entity})

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "invalid_request",
                                     "message": str(exc), "entity": None})

    @app.post("/projects", status_code=201)
    def create_project(body: ProjectBody):
        return _project_descriptor(store.create(body.name))

    @app.get("/projects")
    def list_projects():
        return [_project_descriptor(store.get(pid)) for pid in store.ids()]

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        with store.lock(project_id):
            return _project_json(store.get(project_id))

    @app.post("/projects/{project_id}/images", status_code=201)
    def upload_image(project_id: str, file: UploadFile = File(...),
                     capture_date: str | None = Form(None),
                     title: str | None = Form(None)):
        data = file.file.read()
        with store.lock(project_id):
            project = store.get(project_id)
            # validate everything before touching disk or project state
            parsed = parse_iso_date(capture_date) if capture_date else None
            extension = sniff_extension(data)
            raster = decode_image(data)
            image_id = next_id(project.images, IMAGE_ID_PREFIX)
            path = store.image_dir(project_id) / f"{image_id}{extension}"
            path.write_bytes(data)
            record = add_image(project, path=str(path), width=raster.width,
                               height=raster.height, image_id=image_id,
                               capture_date=parsed, title=title)
            store.save(project)
            return _image_json(project, record)

    @app.get("/projects/{project_id}/images/{image_id}/file")
    def image_file(project_id: str, image_id: str):
        with store.lock(project_id):
            record = get_image(store.get(project_id), image_id)
            path = Path(record.path)
            if not path.is_file():
                raise UnknownImageError(
                    f"stored file for image {image_id!r} is missing",
                    entity=image_id)
            media = _MEDIA_TYPES.get(path.suffix, "application/octet-stream")
            return Response(content=path.read_bytes(), media_type=media)

    @app.post("/projects/{project_id}/autogroup", status_code=202)
    def start_autogroup(project_id: str):
        job = store.start_autogroup(project_id, seed)
        return {"id": job.job_id, "status": job.status}

    @app.get("/projects/{project_id}/jobs/{job_id}")
    def get_job(project_id: str, job_id: str):
        return _job_json(store.get_job(project_id, job_id))

    @app.get("/projects/{project_id}/groups")
    def get_groups(project_id: str):
        with store.lock(project_id):
            groups = compute_groups(store.get(project_id))
        return {"groups": [_group_json(g) for g in groups]}

    @app.post("/projects/{project_id}/links", status_code=201)
    def create_link(project_id: str, body: LinkBody):
        with store.lock(project_id):
            project = store.get(project_id)
            link = create_manual_link(project, body.a, body.b,
                                      _to_quad(body.quad_a),
                                      _to_quad(body.quad_b))
            store.save(project)
            return _link_json(link)

    @app.delete("/projects/{project_id}/links/{link_id}", status_code=204)
    def remove_link(project_id: str, link_id: str):
        with store.lock(project_id):
            project = store.get(project_id)
            delete_link(project, link_id)
            store.save(project)
        return Response(status_code=204)

    @app.get("/projects/{project_id}/render")
    def render(project_id: str, request: Request,
               focus: str = Query(...),
               date: str | None = Query(None),
               scale: float = Query(1.0, gt=0.0)):
        date_filter = parse_iso_date(date) if date else None
        with store.lock(project_id):
            project = store.get(project_id)
            stamp = hashlib.sha256()
            stamp.update(export_project(project))
            stamp.update(f"|{focus}|{date or ''}|{scale!r}".encode())
            etag = f'"{stamp.hexdigest()}"'
            candidates = request.headers.get("if-none-match", "")
            if etag in candidates or candidates.strip() == "*":
                return Response(status_code=304, headers={"ETag": etag})
            rgba = render_focus_view(project, focus, date_filter=date_filter,
                                     canvas_scale=scale)
        return Response(content=rgba_to_png_bytes(rgba),
                        media_type="image/png",
                        headers={"ETag": etag, "Cache-Control": "no-cache"})

    @app.get("/projects/{project_id}/export")
    def export_document(project_id: str):
        with store.lock(project_id):
            data = export_project(store.get(project_id))
        return Response(content=data,
                        media_type="application/json; charset=utf-8")

    @app.put("/projects/{project_id}/import")
    async def import_document(project_id: str, request: Request):
        data = await request.body()
        imported = import_project(data)
        with store.lock(project_id):
            store.get(project_id)
            store.replace(project_id, imported)
            return _project_descriptor(imported)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="photolink-serve",
        description="serve the photo registration API over HTTP")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--data-dir", default="photolink-data")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--ui-dir", default=None,
                        help="directory with the static UI bundle")
    args = parser.parse_args(argv)

    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = Path(__file__).parent / "ui"
        ui_dir = bundled if bundled.is_dir() else None

    import uvicorn

    app = create_app(args.data_dir, seed=args.seed, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
