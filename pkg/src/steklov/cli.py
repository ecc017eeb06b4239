"""Command-line front end.

    python -m steklov exact ball --dim 3 --count 3 --format csv
    python -m steklov exp tube-limit --eps 0.2 --delta 0.02,0.01,0.005

Exit status: 0 success, 1 a verdict failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import exact, experiments
from .fem import full_spectrum, write_spectrum_csv, write_spectrum_json
from .geometry import make_profile
from .mesh import MeshFormatError, MeshingError, MeshParams, generate_mesh, read_mesh, validate_mesh, write_mesh

DIGITS = 12
COMMANDS = {
    "exact": ("ball", "annulus"),
    "bound": (),
    "fem": ("solve",),
    "mesh": ("gen", "check"),
    "exp": ("asymptotic", "compare", "tube-limit", "optimize", "neck", "audit"),
}
# flag name -> (element type, list allowed)
FLAGS = {
    "dim": (int, True),
    "eps": (float, True),
    "delta": (float, True),
    "k": (int, True),
    "count": (int, False),
    "h": (float, False),
    "modes": (int, False),
    "mesh-in": (str, False),
    "mesh-out": (str, False),
    "out": (str, False),
    "format": (str, False),
}


class UsageError(Exception):
    def __init__(self, flag: str, msg: str):
        self.flag = flag
        super().__init__(f"--{flag}: {msg}")


@dataclass
class RunConfig:
    command: str
    action: Optional[str] = None
    dim: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    delta: list = field(default_factory=list)
    k: list = field(default_factory=list)
    count: Optional[int] = None
    h: Optional[float] = None
    modes: Optional[int] = None
    mesh_in: Optional[str] = None
    mesh_out: Optional[str] = None
    out: Optional[str] = None
    format: str = "csv"

    def single(self, name: str, default=None):
        vals = getattr(self, name)
        if not vals:
            return default
        if len(vals) != 1:
            raise UsageError(name, "expects a single value here")
        return vals[0]


def _convert(flag: str, text: str):
    kind, many = FLAGS[flag]
    parts = [p.strip() for p in str(text).split(",")] if many else [str(text).strip()]
    out = []
    for p in parts:
        try:
            out.append(kind(p))
        except ValueError:
            raise UsageError(flag, f"invalid {kind.__name__} value {p!r}") from None
    return out if many else out[0]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steklov", description="Steklov spectra of balls, shells and tube domains")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, actions in COMMANDS.items():
        cp = sub.add_parser(cmd)
        if actions:
            cp.add_argument("action", choices=actions)
        cp.add_argument("--config", help="INI file of key = value defaults")
        for flag in FLAGS:
            cp.add_argument(f"--{flag}", dest=flag.replace("-", "_"), default=None)
    return p


def _read_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError("config", f"cannot read {path}: {e.strerror}") from None
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise UsageError("config", f"malformed file: {e}") from None
    values = {}
    for section in cp.sections():
        for key, val in cp.items(section):
            flag = key.replace("_", "-")
            if flag not in FLAGS:
                raise UsageError("config", f"unknown key {key!r}")
            values[flag] = val
    return values


def parse_args(argv) -> RunConfig:
    ns = _build_parser().parse_args(argv)
    cfg = RunConfig(ns.command, getattr(ns, "action", None))
    raw = _read_config(ns.config) if ns.config else {}
    for flag in FLAGS:
        val = getattr(ns, flag.replace("-", "_"))
        if val is not None:
            raw[flag] = val
    for flag, text in raw.items():
        setattr(cfg, flag.replace("-", "_"), _convert(flag, text))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.format not in ("csv", "json"):
        raise UsageError("format", "must be csv or json")
    for n in cfg.dim:
        if n < 2 or (n < 3 and cfg.command != "bound"):
            raise UsageError("dim", f"dimension must be >= 3, got {n}")
    for e in cfg.eps:
        if not 0 < e < 1:
            raise UsageError("eps", f"eps must lie in (0,1), got {e}")
    for d in cfg.delta:
        if not 0 < d < 1:
            raise UsageError("delta", f"delta must lie in (0,1), got {d}")
        for e in cfg.eps:
            if d >= e / 2:
                raise UsageError("delta", f"delta {d} must be below eps/2 = {e / 2}")
    if cfg.delta and not cfg.eps:
        raise UsageError("eps", "a tube domain needs --eps as well as --delta")
    for k in cfg.k:
        if k < 1:
            raise UsageError("k", f"k must be >= 1, got {k}")
    if cfg.count is not None and cfg.count < 1:
        raise UsageError("count", "count must be >= 1")
    if cfg.h is not None and not 0 < cfg.h <= 0.5:
        raise UsageError("h", "h must lie in (0, 0.5]")
    if cfg.modes is not None and cfg.modes < 0:
        raise UsageError("modes", "modes must be >= 0")
    if cfg.command == "fem" and cfg.modes is not None and cfg.count is not None and cfg.modes < cfg.count:
        raise UsageError("modes", f"modes ({cfg.modes}) must be >= count ({cfg.count})")
    if cfg.command == "mesh" and cfg.action == "check" and not cfg.mesh_in:
        raise UsageError("mesh-in", "mesh check needs an input mesh")
    if cfg.command == "exact" and cfg.action == "annulus" and not cfg.eps:
        raise UsageError("eps", "the annulus needs --eps")


# -- dispatch -----------------------------------------------------------------------------

def _fmt(x) -> str:
    return f"{x:.{DIGITS}g}" if isinstance(x, float) else str(x)


def _emit_rows(cfg: RunConfig, columns, rows, stream) -> None:
    if cfg.format == "json":
        json.dump({"columns": columns, "rows": rows}, stream, indent=2)
        stream.write("\n")
        return
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])


def _spectrum_rows(spec: exact.Spectrum) -> list:
    rows = []
    for e in spec:
        mode, _, branch = e.label.partition(",")
        rows.append({"value": e.value, "multiplicity": e.multiplicity,
                     "mode": mode.removeprefix("k="), "branch": branch})
    return rows


def _profile(cfg: RunConfig):
    eps = cfg.single("eps")
    delta = cfg.single("delta")
    if delta is not None:
        return make_profile("annulus_with_tube", eps, delta)
    if eps is not None:
        return make_profile("annulus", eps)
    return make_profile("ball")


def _mesh_params(cfg: RunConfig, profile) -> MeshParams:
    h = cfg.h or 0.05
    if profile.kind == "annulus_with_tube":
        return experiments.TubeMeshConfig(h=h).params(profile.params.delta)
    return MeshParams(h)


def _run_exact(cfg: RunConfig, stream) -> int:
    n = cfg.single("dim", 3)
    count = cfg.count or 5
    if cfg.action == "ball":
        spec = exact.ball_spectrum(n, count)
    else:
        spec = exact.annulus_spectrum(n, cfg.single("eps"), count)
    _emit_rows(cfg, ["value", "multiplicity", "mode", "branch"], _spectrum_rows(spec), stream)
    return 0


def _run_bound(cfg: RunConfig, stream) -> int:
    dims = cfg.dim or [3]
    rows = [{"dim": n, "bound": exact.euclidean_bound(n)} for n in dims]
    _emit_rows(cfg, ["dim", "bound"], rows, stream)
    return 0


def _run_fem(cfg: RunConfig, stream) -> int:
    if cfg.mesh_in:
        with open(cfg.mesh_in) as fh:
            mesh = read_mesh(fh)
    else:
        prof = _profile(cfg)
        mesh = generate_mesh(prof, _mesh_params(cfg, prof))
    if cfg.mesh_out:
        with open(cfg.mesh_out, "w") as fh:
            write_mesh(mesh, fh)
    count = cfg.count or 4
    spec = full_spectrum(mesh, cfg.modes if cfg.modes is not None else count, count)
    if cfg.format == "json":
        write_spectrum_json(spec, stream)
    else:
        write_spectrum_csv(spec, stream, DIGITS)
    return 0


def _run_mesh(cfg: RunConfig, stream) -> int:
    if cfg.action == "gen":
        prof = _profile(cfg)
        mesh = generate_mesh(prof, _mesh_params(cfg, prof))
        if cfg.mesh_out:
            with open(cfg.mesh_out, "w") as fh:
                write_mesh(mesh, fh)
        else:
            write_mesh(mesh, stream)
            return 0
        diag = validate_mesh(mesh)
    else:
        with open(cfg.mesh_in) as fh:
            mesh = read_mesh(fh)
        diag = validate_mesh(mesh)
    info = {"ok": diag.ok, "nodes": diag.n_nodes, "triangles": diag.n_triangles,
            "min_angle_deg": diag.min_angle_deg, "max_aspect": diag.max_aspect,
            "failures": "; ".join(diag.failures)}
    _emit_rows(cfg, list(info), [info], stream)
    return 0 if diag.ok else 1


def _run_exp(cfg: RunConfig, stream) -> int:
    a = cfg.action
    if a == "asymptotic":
        reports = [experiments.run_asymptotic_validation(
            tuple(cfg.dim or (3, 4, 5)), tuple(cfg.k or (1, 2, 3)), tuple(cfg.eps or (0.02, 0.04, 0.08)))]
    elif a == "compare":
        reports = [experiments.run_normalized_comparison(
            tuple(cfg.dim or (3, 4, 5, 6)), tuple(cfg.k or (1, 2, 3)), tuple(cfg.eps or (0.05, 0.1)))]
    elif a == "optimize":
        reports = [experiments.run_annulus_optimizer(cfg.single("dim", 3))]
    elif a in ("tube-limit", "neck"):
        mc = experiments.TubeMeshConfig(h=cfg.h) if cfg.h else experiments.TubeMeshConfig()
        eps = cfg.single("eps", 0.2)
        deltas = tuple(cfg.delta or (0.02, 0.01, 0.005))
        run = experiments.run_tube_limit if a == "tube-limit" else experiments.run_neck_concentration
        reports = [run(eps, deltas, mc)]
    else:
        dims = tuple(cfg.dim or (3, 4, 5, 6))
        sources = [experiments.run_normalized_comparison(dims), experiments.run_annulus_optimizer(3)]
        reports = [experiments.run_bound_audit(sources, dims)]
    for rep in reports:
        run_dir = rep.write(cfg.out or "runs")
        print(f"wrote {run_dir}", file=sys.stderr)
    ok = experiments.summary(reports, stream)
    return 0 if ok else 1


_HANDLERS = {"exact": _run_exact, "bound": _run_bound, "fem": _run_fem, "mesh": _run_mesh, "exp": _run_exp}


def dispatch(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    if cfg.command in ("exact", "bound", "fem") and cfg.out:
        buf = io.StringIO()
        status = _HANDLERS[cfg.command](cfg, buf)
        with open(cfg.out, "w") as fh:
            fh.write(buf.getvalue())
        return status
    return _HANDLERS[cfg.command](cfg, stream)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as e:
        print(f"steklov: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:  # argparse usage errors
        return 2 if e.code else 0
    try:
        return dispatch(cfg)
    except (MeshFormatError, MeshingError, OSError) as e:
        print(f"steklov: error: {e}", file=sys.stderr)
        return 2 if isinstance(e, (MeshFormatError, OSError)) else 1
    except ValueError as e:
        print(f"steklov: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
