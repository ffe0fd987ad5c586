"""Command-line front end: plan, sweetspots, estimate, simulate, compare.

Exit codes: 0 success, 2 usage error, 3 size-guard error, 4 invalid config.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .decomposition import (DEFAULT_MAX_IMBALANCE, balanced_blocksize, idle_report, make_plan,
                            sweetspots)
from .grid import GridShape, Layout, Space, total_size
from .redistribution import (DEFAULT_SIZE_GUARD, SizeGuardError, Transform, analytic_estimate,
                             compare_estimate, exact_transfer_map, shared_domain)

EXIT_OK, EXIT_USAGE, EXIT_SIZE_GUARD, EXIT_CONFIG = 0, 2, 3, 4

REQUIRED_KEYS = ("naky", "nakx", "ntgrid", "nlambda", "negrid", "nspec")
OPTIONAL_KEYS = ("iny", "inx", "element_bytes", "layout", "nprocs")


class ConfigError(ValueError):
    pass


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class DomainConfig:
    shape: GridShape
    layout: Layout | None = None
    nprocs: int | None = None
    source: dict = field(default_factory=dict, compare=False)


def parse_config(doc: dict) -> DomainConfig:
    """Validate a flat config mapping; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in REQUIRED_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    for key, value in doc.items():
        if key != "layout" and (not isinstance(value, int) or isinstance(value, bool)):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
    if doc["ntgrid"] < 0:
        raise ConfigError(f"ntgrid must be >= 0, got {doc['ntgrid']}")
    try:
        shape = GridShape.from_dealiased(
            nakx=doc["nakx"], naky=doc["naky"], nig=2 * doc["ntgrid"] + 1,
            nlambda=doc["nlambda"], negrid=doc["negrid"], nspec=doc["nspec"],
            inx=doc.get("inx"), iny=doc.get("iny"),
            element_bytes=doc.get("element_bytes", 16))
        layout = Layout.parse(doc["layout"]) if "layout" in doc else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    nprocs = doc.get("nprocs")
    if nprocs is not None and nprocs < 1:
        raise ConfigError(f"nprocs must be >= 1, got {nprocs}")
    return DomainConfig(shape, layout, nprocs, dict(doc))


def load_config(path) -> DomainConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(doc)


def real(value) -> float:
    return round(float(value), 6)


def shape_doc(shape: GridShape) -> dict:
    return {k: getattr(shape, k) for k in ("nakx", "naky", "inx", "iny", "nig", "nsign",
                                           "nlambda", "negrid", "nspec", "element_bytes")}


def plan_doc(plan) -> dict:
    return {
        "kind": plan.kind.value,
        "small_block": plan.small_block,
        "large_block": plan.large_block,
        "unit": plan.unit,
        "imbalance": real(plan.imbalance),
        "empty_ranks": plan.empty_ranks,
        "degenerate": plan.degenerate,
    }


def space_doc(space, shape, layout, nprocs) -> dict:
    idle = idle_report(space, shape, layout, nprocs)
    return {"total_size": total_size(space, shape, layout), "blocksize": idle.blocksize,
            "used_procs": real(idle.used_procs), "idle_procs": real(idle.idle_procs)}


def _resolve(config: DomainConfig, layout, nprocs):
    layout = layout if layout is not None else config.layout
    if layout is None:
        raise UsageError("no layout given (use --layout or set 'layout' in the config)")
    nprocs = nprocs if nprocs is not None else config.nprocs
    if nprocs is None:
        raise UsageError("no process count given (use --nprocs or set 'nprocs' in the config)")
    if nprocs < 1:
        raise UsageError(f"--nprocs must be >= 1, got {nprocs}")
    return Layout.parse(layout), nprocs


def cmd_plan(config: DomainConfig, space, layout=None, nprocs=None, unbalanced=False,
             max_imbalance=DEFAULT_MAX_IMBALANCE, verbose=False) -> dict:
    layout, nprocs = _resolve(config, layout, nprocs)
    space = Space.parse(space)
    shape = config.shape
    plan = make_plan(space, shape, layout, nprocs, unbalanced, max_imbalance)
    doc = {
        "command": {"name": "plan", "space": space.value, "layout": layout.value,
                    "nprocs": nprocs, "mode": "unbalanced" if unbalanced else "balanced",
                    "max_imbalance": real(max_imbalance)},
        "shape": shape_doc(shape),
        "space": space_doc(space, shape, layout, nprocs),
        "plan": plan_doc(plan),
    }
    if verbose:
        doc["ranges"] = [[lo, hi] for lo, hi in plan.ranges]
    return doc


def cmd_sweetspots(config: DomainConfig, layout=None, max_procs=1024) -> dict:
    layout = Layout.parse(layout if layout is not None else config.layout or "xyles")
    if max_procs < 1:
        raise UsageError(f"--max-procs must be >= 1, got {max_procs}")
    spots = sweetspots(config.shape, layout, max_procs)
    return {
        "command": {"name": "sweetspots", "layout": layout.value, "max_procs": max_procs},
        "shape": shape_doc(config.shape),
        "g_lo": list(spots.g_lo),
        "xxf_lo": list(spots.xxf_lo),
        "yxf_lo": list(spots.yxf_lo),
        "common": list(spots.common()),
        "prefix_products": list(spots.prefix_products),
    }


def _estimate_doc(est) -> dict:
    return {
        "xxf_idle": real(est.xxf_idle),
        "yxf_idle": real(est.yxf_idle),
        "delta_idle_proc": real(est.delta_idle_proc),
        "total_redist_data": est.total_redist_data,
        "total_trans_data": real(est.total_trans_data),
        "transferred_fraction": real(est.transferred_fraction),
    }


def cmd_estimate(config: DomainConfig, layout=None, nprocs=None) -> dict:
    layout, nprocs = _resolve(config, layout, nprocs)
    shape = config.shape
    return {
        "command": {"name": "estimate", "layout": layout.value, "nprocs": nprocs},
        "shape": shape_doc(shape),
        "spaces": {sp.value: space_doc(sp, shape, layout, nprocs) for sp in (Space.XXF, Space.YXF)},
        "estimate": _estimate_doc(analytic_estimate(shape, layout, nprocs)),
    }


def cmd_simulate(config: DomainConfig, layout=None, nprocs=None, transform="xxf2yxf",
                 unbalanced=False, max_imbalance=DEFAULT_MAX_IMBALANCE,
                 size_guard=DEFAULT_SIZE_GUARD, workers=1, with_matrix=False):
    """Run the exact oracle; returns ``(report, transfer_map)``."""
    layout, nprocs = _resolve(config, layout, nprocs)
    transform = Transform.parse(transform)
    shape = config.shape
    src = make_plan(transform.source, shape, layout, nprocs, unbalanced, max_imbalance)
    dst = make_plan(transform.target, shape, layout, nprocs, unbalanced, max_imbalance)
    tmap = exact_transfer_map(src, dst, transform, size_guard=size_guard, workers=workers)
    doc = {
        "command": {"name": "simulate", "layout": layout.value, "nprocs": nprocs,
                    "transform": transform.value,
                    "mode": "unbalanced" if unbalanced else "balanced",
                    "max_imbalance": real(max_imbalance), "size_guard": size_guard},
        "shape": shape_doc(shape),
        "plans": {"source": plan_doc(src), "target": plan_doc(dst)},
        "transfer": {
            "shared_elements": shared_domain(transform, shape).size,
            "off_diagonal_elements": tmap.off_diagonal_elements,
            "bytes": tmap.bytes,
            "message_count": tmap.message_count,
            "max_send_elements": tmap.max_send,
            "max_send_bytes": tmap.max_send * shape.element_bytes,
            "diagonal_fraction": real(tmap.diagonal_fraction),
        },
    }
    if with_matrix:
        doc["matrix"] = [[s, d, n] for s, d, n in tmap.nonzero_entries()]
    return doc, tmap


def cmd_compare(config: DomainConfig, layout=None, nprocs=None, transform="xxf2yxf",
                size_guard=DEFAULT_SIZE_GUARD, workers=1) -> dict:
    layout, nprocs = _resolve(config, layout, nprocs)
    transform = Transform.parse(transform)
    if {transform.source, transform.target} != {Space.XXF, Space.YXF}:
        raise UsageError("compare supports only --transform xxf2yxf or yxf2xxf")
    cmp = compare_estimate(config.shape, layout, nprocs, transform,
                           size_guard=size_guard, workers=workers)
    rel = cmp.relative_error
    return {
        "command": {"name": "compare", "layout": layout.value, "nprocs": nprocs,
                    "transform": transform.value, "size_guard": size_guard},
        "shape": shape_doc(config.shape),
        "estimate": _estimate_doc(cmp.estimate),
        "oracle": {
            "off_diagonal_elements": cmp.oracle_off_diagonal,
            "shared_elements": cmp.oracle_total,
            "transferred_fraction": real(Fraction(cmp.oracle_off_diagonal, cmp.oracle_total)),
        },
        "relative_error": None if rel == float("inf") else real(rel),
    }


# -- rendering ---------------------------------------------------------------

def render_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _human_lines(doc, indent=0):
    pad = "  " * indent
    for key, value in doc.items():
        if key in ("ranges", "matrix"):
            continue
        if isinstance(value, dict):
            yield f"{pad}{key}:"
            yield from _human_lines(value, indent + 1)
        elif isinstance(value, list):
            yield f"{pad}{key}: " + (" ".join(map(str, value)) if value else "(none)")
        elif isinstance(value, float):
            yield f"{pad}{key}: {value:.6f}"
        else:
            yield f"{pad}{key}: {value}"


def render_human(doc: dict) -> str:
    lines = list(_human_lines(doc))
    if "ranges" in doc:
        lines.append(f"{'rank':>8} {'low':>12} {'high':>12} {'extent':>10}")
        for rank, (lo, hi) in enumerate(doc["ranges"]):
            lines.append(f"{rank:>8} {lo:>12} {hi:>12} {hi - lo:>10}")
    if "matrix" in doc:
        lines.append(f"{'src':>8} {'dst':>8} {'elements':>12}")
        for s, d, n in doc["matrix"]:
            lines.append(f"{s:>8} {d:>8} {n:>12}")
    return "\n".join(lines) + "\n"


def _flatten(doc, prefix=""):
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        elif isinstance(value, list):
            yield name, " ".join(map(str, value))
        elif isinstance(value, float):
            yield name, f"{value:.6f}"
        else:
            yield name, "" if value is None else str(value)


def render_csv(doc: dict, tmap=None) -> str:
    """Per-rank table for plans, matrix rows for simulate, key/value otherwise."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if tmap is not None:
        writer.writerow(["src_rank", "dst_rank", "elements", "bytes"])
        for s, d, n in tmap.nonzero_entries():
            writer.writerow([s, d, n, n * tmap.element_bytes])
    elif "ranges" in doc:
        writer.writerow(["rank", "low", "high", "extent"])
        for rank, (lo, hi) in enumerate(doc["ranges"]):
            writer.writerow([rank, lo, hi, hi - lo])
    elif doc["command"]["name"] == "sweetspots":
        writer.writerow(["space", "nprocs"])
        for sp in ("g_lo", "xxf_lo", "yxf_lo"):
            for p in doc[sp]:
                writer.writerow([sp, p])
    else:
        writer.writerow(["key", "value"])
        for key, value in _flatten(doc):
            writer.writerow([key, value])
    return buf.getvalue()


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH",
                        help="flat JSON domain configuration")
    common.add_argument("--layout", choices=[v.value for v in Layout],
                        help="data layout (default: from config)")
    common.add_argument("--format", choices=("human", "json", "csv"), default="human")
    common.add_argument("--verbose", action="store_true")

    nprocs = argparse.ArgumentParser(add_help=False)
    nprocs.add_argument("--nprocs", type=int, help="process count (default: from config)")

    mode = argparse.ArgumentParser(add_help=False)
    mode.add_argument("--unbalanced", action="store_true", help="use two-blocksize plans")
    mode.add_argument("--max-imbalance", type=float, default=DEFAULT_MAX_IMBALANCE,
                      help="largest (large-small)/small accepted before falling back")

    oracle = argparse.ArgumentParser(add_help=False)
    oracle.add_argument("--transform", choices=[v.value for v in Transform], default="xxf2yxf")
    oracle.add_argument("--size-guard", type=int, default=DEFAULT_SIZE_GUARD,
                        help="maximum compound cells the exhaustive oracle may enumerate")
    oracle.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(
        prog="unbalanced-decomp",
        description="Plan and simulate block decompositions of g_lo/xxf_lo/yxf_lo spaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plan", parents=[common, nprocs, mode], help="build a decomposition plan")
    p.add_argument("--space", choices=[v.value for v in Space], default="xxf_lo")
    p = sub.add_parser("sweetspots", parents=[common], help="exactly dividing process counts")
    p.add_argument("--max-procs", type=int, default=1024)
    sub.add_parser("estimate", parents=[common, nprocs], help="analytic transfer estimate")
    sub.add_parser("simulate", parents=[common, nprocs, mode, oracle],
                   help="exact transfer map between two plans")
    sub.add_parser("compare", parents=[common, nprocs, oracle],
                   help="analytic estimate against the exact oracle")
    return parser


def run(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    tmap = None
    try:
        config = load_config(args.config)
        if args.command == "plan":
            doc = cmd_plan(config, args.space, args.layout, args.nprocs, args.unbalanced,
                           args.max_imbalance, args.verbose)
        elif args.command == "sweetspots":
            doc = cmd_sweetspots(config, args.layout, args.max_procs)
        elif args.command == "estimate":
            doc = cmd_estimate(config, args.layout, args.nprocs)
        elif args.command == "simulate":
            doc, tmap = cmd_simulate(config, args.layout, args.nprocs, args.transform,
                                     args.unbalanced, args.max_imbalance, args.size_guard,
                                     args.workers, with_matrix=args.verbose)
        else:
            doc = cmd_compare(config, args.layout, args.nprocs, args.transform,
                              args.size_guard, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeGuardError as exc:
        print(f"size guard: {exc}", file=sys.stderr)
        return EXIT_SIZE_GUARD
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.format == "json":
        out.write(render_json(doc))
    elif args.format == "csv":
        out.write(render_csv(doc, tmap))
    else:
        out.write(render_human(doc))
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
