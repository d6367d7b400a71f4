"""Command line access to project files for scripted pipelines.

Every command operates on one interchange document.  Input validation
happens before the file is touched, so a failed command leaves the
document exactly as it was.  Exit codes: 0 success, 2 rejected input,
1 unexpected internal failure.  Results go to stdout in stable,
machine-parseable lines; warnings and errors go to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import PhotolinkError
from .geometry import Quad
from .grouping import DEFAULT_SEED, auto_group
from .interchange import export_project, import_project
from .project import (
    Project,
    add_image,
    create_manual_link,
    new_project,
    parse_iso_date,
    set_capture_date,
)
from .raster import decode_image, rgba_to_png_bytes
from .rendering import render_focus_view


class CommandError(Exception):
    """Input problem the user can fix; reported on stderr with exit 2."""


def _load_project_file(path: Path) -> Project:
    if not path.is_file():
        raise CommandError(f"no project file at {path}")
    project = import_project(path.read_bytes())
    project.project_id = path.stem  # the file name is authoritative
    return project


def _save_project_file(path: Path, project: Project):
    data = export_project(project)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _point(text: str) -> tuple[float, float]:
    try:
        x_text, y_text = text.split(",")
        return (float(x_text), float(y_text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected X,Y with numeric coordinates, got {text!r}") from exc


def _date_spec(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key or not value:
        raise argparse.ArgumentTypeError(
            f"expected <image>=<YYYY-MM-DD>, got {text!r}")
    return key, value


def _resolve_date_key(project: Project, key: str) -> str:
    """Match a --date key against an image id, path, or file name."""
    if key in project.images:
        return key
    matches = [r.image_id for r in project.images.values() if r.path == key]
    if not matches:
        matches = [r.image_id for r in project.images.values()
                   if Path(r.path).name == key]
    if not matches:
        raise CommandError(f"--date {key}: no ingested image matches")
    if len(matches) > 1:
        raise CommandError(f"--date {key}: matches several images "
                           f"({', '.join(matches)})")
    return matches[0]


def cmd_ingest(args) -> int:
    dates = [(key, parse_iso_date(value)) for key, value in args.date]
    decoded = []
    for image_path in args.images:
        try:
            data = Path(image_path).read_bytes()
        except OSError as exc:
            raise CommandError(f"cannot read {image_path}: {exc}") from exc
        decoded.append((image_path, decode_image(data)))

    path = Path(args.project_file)
    if path.is_file():
        project = _load_project_file(path)
    else:
        project = new_project(path.stem or "project", path.stem)

    known_paths = {record.path: record.image_id
                   for record in project.images.values()}
    added = []
    for image_path, raster in decoded:
        previous = known_paths.get(image_path)
        if previous is not None:
            print(f"warning: {image_path} already ingested as {previous}; "
                  f"adding another record", file=sys.stderr)
        record = add_image(project, path=image_path, width=raster.width,
                           height=raster.height)
        known_paths.setdefault(image_path, record.image_id)
        added.append(record)

    for key, parsed in dates:
        set_capture_date(project, _resolve_date_key(project, key), parsed)

    _save_project_file(path, project)
    for record in added:
        print(f"{record.image_id}\t{record.path}")
    return 0


def cmd_autogroup(args) -> int:
    path = Path(args.project_file)
    project = _load_project_file(path)
    _, groups = auto_group(project, seed=args.seed)
    _save_project_file(path, project)
    for group in groups:
        print(f"{group.group_id}\t{' '.join(group.members)}")
    return 0


def cmd_link(args) -> int:
    path = Path(args.project_file)
    project = _load_project_file(path)
    link = create_manual_link(project, args.image_a, args.image_b,
                              Quad(tuple(args.quad_a)),
                              Quad(tuple(args.quad_b)))
    _save_project_file(path, project)
    print(link.link_id)
    return 0


def cmd_render(args) -> int:
    project = _load_project_file(Path(args.project_file))
    date_filter = parse_iso_date(args.date) if args.date else None
    rgba = render_focus_view(project, args.focus, date_filter=date_filter,
                             canvas_scale=args.scale)
    Path(args.output).write_bytes(rgba_to_png_bytes(rgba))
    print(args.output)
    return 0


def cmd_export(args) -> int:
    project = _load_project_file(Path(args.project_file))
    sys.stdout.buffer.write(export_project(project))
    sys.stdout.buffer.flush()
    return 0


def cmd_import(args) -> int:
    project = import_project(sys.stdin.buffer.read())
    path = Path(args.project_file)
    project.project_id = path.stem or project.project_id
    _save_project_file(path, project)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photolink",
        description="register, group, link, and render dated photographs")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser(
        "ingest", help="add image files to a project document")
    ingest.add_argument("project_file")
    ingest.add_argument("images", nargs="+", metavar="image")
    ingest.add_argument("--date", action="append", type=_date_spec,
                        default=[], metavar="IMAGE=YYYY-MM-DD",
                        help="capture date for an image (id, path, or "
                             "file name)")
    ingest.set_defaults(handler=cmd_ingest)

    autogroup = commands.add_parser(
        "autogroup", help="link visually matching images automatically")
    autogroup.add_argument("project_file")
    autogroup.add_argument("--seed", type=int, default=DEFAULT_SEED)
    autogroup.set_defaults(handler=cmd_autogroup)

    link = commands.add_parser(
        "link", help="link two images through matching four-point quads")
    link.add_argument("project_file")
    link.add_argument("image_a")
    link.add_argument("image_b")
    link.add_argument("--quad-a", required=True, nargs=4, type=_point,
                      metavar="X,Y")
    link.add_argument("--quad-b", required=True, nargs=4, type=_point,
                      metavar="X,Y")
    link.set_defaults(handler=cmd_link)

    render = commands.add_parser(
        "render", help="compose a focus view and write it as PNG")
    render.add_argument("project_file")
    render.add_argument("focus")
    render.add_argument("--date", default=None, metavar="YYYY-MM-DD",
                        help="hide images captured after this date")
    render.add_argument("--scale", type=float, default=1.0)
    render.add_argument("-o", "--output", required=True)
    render.set_defaults(handler=cmd_render)

    export = commands.add_parser(
        "export", help="write the canonical document to stdout")
    export.add_argument("project_file")
    export.set_defaults(handler=cmd_export)

    importer = commands.add_parser(
        "import", help="replace the project document with stdin")
    importer.add_argument("project_file")
    importer.set_defaults(handler=cmd_import)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PhotolinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
