"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 I/O or
processing failure. File-producing commands refuse to overwrite an
existing output unless --force is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import audio, document
from .binaural import DistanceModel, load_hrir_dir, save_hrir_dir, synthetic_head_hrirs
from .effects import EffectError, effect_from_dict, render_chain
from .engine import EngineError, prepare_assets
from .iirfit import bank_to_document, fit_iir_approximation
from .model import validate
from .trajectory import TrajectoryError, load_trajectory, render_offline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_IO):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}")


def _write(path: str, data: bytes, force: bool):
    if os.path.exists(path) and not force:
        raise CliError(f"{path} exists; pass --force to overwrite")
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e}")


def _load_scape(path: str):
    try:
        return document.deserialize(_read(path))
    except document.DocumentError as e:
        raise CliError(f"{path}: {e}", EXIT_VALIDATION)


def _hrirs(path: str | None):
    if path is None:
        return synthetic_head_hrirs()
    return load_hrir_dir(path)


def _print_report(report):
    for issue in report.issues:
        print(f"{issue.severity}: {issue.path}: {issue.message}")
    print(f"{len(report.errors)} error(s), {len(report.warnings)} warning(s)")


def cmd_validate(args) -> int:
    scape = _load_scape(args.scape)
    report = validate(scape)
    _print_report(report)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_render(args) -> int:
    scape = _load_scape(args.scene)
    report = validate(scape)
    if not report.ok:
        _print_report(report)
        return EXIT_VALIDATION
    try:
        traj = load_trajectory(args.trajectory)
    except (OSError, ValueError, TrajectoryError) as e:
        raise CliError(f"{args.trajectory}: {e}")
    base = os.path.dirname(os.path.abspath(args.scene))
    assets = prepare_assets(scape, resolver=_file_resolver(base))
    buf = render_offline(scape, traj, assets, _hrirs(args.hrir), DistanceModel())
    _write(args.out, audio.encode_wav(buf, depth=args.depth), args.force)
    print(f"wrote {args.out}: {buf.frames} frames ({buf.duration:.2f} s), {args.depth}")
    return EXIT_OK


def _file_resolver(base_dir: str):
    def resolve(uri: str) -> bytes:
        if uri.startswith(("http://", "https://")):
            import requests

            resp = requests.get(uri, timeout=30)
            resp.raise_for_status()
            return resp.content
        path = uri if os.path.isabs(uri) else os.path.join(base_dir, uri)
        with open(path, "rb") as f:
            return f.read()

    return resolve


def cmd_sample(args) -> int:
    buf = audio.decode_wav(_read(args.infile))
    try:
        with open(args.effects, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, ValueError) as e:
        raise CliError(f"{args.effects}: {e}")
    if not isinstance(doc, list):
        raise CliError(f"{args.effects}: expected a JSON array of effects", EXIT_VALIDATION)
    base = os.path.dirname(os.path.abspath(args.effects))
    try:
        specs = [effect_from_dict(d, base_dir=base) for d in doc]
        out = render_chain(buf, specs)
    except EffectError as e:
        raise CliError(str(e), EXIT_VALIDATION)
    _write(args.out, audio.encode_wav(out, depth=args.depth), args.force)
    print(f"wrote {args.out}: {len(specs)} effect(s) applied")
    return EXIT_OK


def cmd_embed(args) -> int:
    scape = _load_scape(args.infile)
    if args.assets.startswith(("http://", "https://")):
        def resolver(uri: str) -> bytes:
            import requests

            url = uri if uri.startswith(("http://", "https://")) else args.assets.rstrip("/") + "/" + uri.lstrip("/")
            resp = requests.get(url, timeout=30)
            resp.raise_for_status()
            return resp.content
    else:
        resolver = _file_resolver(args.assets)
    try:
        embedded = document.embed_assets(scape, resolver)
    except document.AssetResolutionError as e:
        raise CliError(str(e))
    _write(args.out, document.serialize(embedded), args.force)
    print(f"wrote {args.out}: {len(embedded.sources)} source(s), all assets embedded")
    return EXIT_OK


def cmd_fit_hrir(args) -> int:
    hrirs = load_hrir_dir(args.infile)
    bank = fit_iir_approximation(hrirs, order=args.order)
    payload = json.dumps(bank_to_document(bank), indent=2).encode("utf-8")
    _write(args.out, payload, args.force)
    errors = [f.error_db for f in bank.left + bank.right]
    print(f"fitted {len(bank.grid)} direction(s) at order {args.order}: "
          f"RMS error mean {sum(errors) / len(errors):.2f} dB, "
          f"worst {max(errors):.2f} dB")
    return EXIT_OK


def cmd_export_hrir(args) -> int:
    hrirs = synthetic_head_hrirs(azimuth_step_deg=args.az_step)
    save_hrir_dir(hrirs, args.out)
    print(f"wrote {len(hrirs.grid)} directions to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data, hrir_dir=args.hrir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> _Parser:
    p = _Parser(prog="soundscape", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="validate a soundscape document")
    v.add_argument("scape")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("render", help="render a soundscape along a trajectory to WAV")
    r.add_argument("--scene", required=True)
    r.add_argument("--trajectory", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--depth", choices=["pcm16", "float32"], default="float32")
    r.add_argument("--hrir", default=None, help="HRIR directory (default: built-in synthetic set)")
    r.add_argument("--force", action="store_true")
    r.set_defaults(func=cmd_render)

    s = sub.add_parser("sample", help="apply an effects chain to a WAV file")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--effects", required=True, help="JSON array of effect specs")
    s.add_argument("--out", required=True)
    s.add_argument("--depth", choices=["pcm16", "float32"], default="float32")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("embed", help="embed all remote assets into a soundscape")
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--assets", required=True, help="directory or URL base for asset uris")
    e.add_argument("--out", required=True)
    e.add_argument("--force", action="store_true")
    e.set_defaults(func=cmd_embed)

    f = sub.add_parser("fit-hrir", help="fit IIR cascades to an HRIR set")
    f.add_argument("--in", dest="infile", required=True, help="HRIR directory")
    f.add_argument("--order", type=int, choices=[4, 6, 8], default=6)
    f.add_argument("--out", required=True)
    f.add_argument("--force", action="store_true")
    f.set_defaults(func=cmd_fit_hrir)

    x = sub.add_parser("export-hrir", help="write the built-in synthetic HRIR set to a directory")
    x.add_argument("--out", required=True)
    x.add_argument("--az-step", type=int, default=5)
    x.set_defaults(func=cmd_export_hrir)

    sv = sub.add_parser("serve", help="start the HTTP/streaming service")
    sv.add_argument("--port", type=int, default=int(os.environ.get("PORT", "8080")))
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--data", default=os.environ.get("DATA_DIR", "./data-store"))
    sv.add_argument("--hrir", default=os.environ.get("HRIR_DIR"))
    sv.set_defaults(func=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (EngineError, TrajectoryError, audio.AudioError, document.DocumentError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
