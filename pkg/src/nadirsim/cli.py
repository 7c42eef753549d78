"""Command-line entry point.

Exit codes::

    0  success
    1  unexpected internal error
    2  bad arguments, coordinates or configuration
    3  map service rejected the API key or quota is exhausted
    4  dataset I/O failure (missing directory, unwritable files)
    5  map service unreachable or misbehaving after all retries
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .config import PROVIDERS, Config, load_config_file, resolve_config
from .dataset import (
    DEFAULT_THRESHOLD,
    META_FILE,
    clean_dataset,
    dataset_dir,
    entropy_stats,
    make_split,
    retained_records,
    write_entropy_stats,
    write_split,
)
from .errors import ConfigError, DatasetError, NadirSimError, ParseError
from .geomath import CameraSpec
from .mission import (
    EDGE_RULES,
    MAP_TYPES,
    RASTER_GRAMMAR,
    SINGLE_GRAMMAR,
    SPAN_METRICS,
    MissionSpec,
    parse_coords,
    plan,
    plan_list,
    plan_single,
)
from .pipeline import capture, margin_shortfall, stored_size
from .provider import MockProvider, StaticMapProvider, resolve_api_key

log = logging.getLogger("nadirsim")

DEFAULT_CONFIG_FILE = "config.json"
DOWNLOAD_COMMANDS = ("download-single", "download-from-list", "download-raster")


def mission_name_for(coords: str) -> str:
    path = Path(coords)
    if path.is_file():
        return path.stem
    return re.sub(r"[^0-9A-Za-z._-]+", "_", coords.strip().strip("\"'")) or "mission"


def build_plan(command: str, cfg: Config):
    if not cfg.coords:
        raise ParseError(f"{command} needs --coords: a file, {RASTER_GRAMMAR} or {SINGLE_GRAMMAR}")
    cam = CameraSpec(cfg.fov, *cfg.aspect_ratio)
    kind, *parsed = parse_coords(cfg.coords)

    if command == "download-single":
        if kind == "file":
            center, agl = parsed[0][0]
        elif kind == "raster":
            # a raster string is accepted; its top-left corner becomes the center
            bbox, agl = parsed
            center = bbox.top_left
        else:
            center, agl = parsed
        return plan_single(center, agl, cam, cfg.map_type)

    if command == "download-from-list":
        if kind == "raster":
            raise ParseError(f"download-from-list takes a file or {SINGLE_GRAMMAR}, got a raster string")
        points = parsed[0] if kind == "file" else [tuple(parsed)]
        return plan_list(points, cam, cfg.map_type)

    if kind != "raster":
        raise ParseError(f"download-raster needs {RASTER_GRAMMAR}, got a {kind} coordinate")
    bbox, agl = parsed
    return plan(MissionSpec("raster", agl=agl, cam=cam, overlap=cfg.overlap, map_type=cfg.map_type,
                            bbox=bbox, edge_rule=cfg.edge_rule, span_metric=cfg.span_metric))


def plan_summary(p, cfg: Config) -> dict:
    zooms = sorted({wp.zoom for wp in p.waypoints})
    sizes = sorted({stored_size(wp, cfg.vmargin) for wp in p.waypoints})
    summary = {
        "kind": p.spec.kind,
        "images": len(p),
        "rows": p.n_rows,
        "cols": p.n_cols,
        "zoom_levels": zooms,
        "stored_sizes": [list(s) for s in sizes],
        "requests": len(p),
        "margin_shortfall_rows": margin_shortfall(p, cfg.vmargin),
    }
    if p.footprint is not None:
        summary["footprint_m"] = [p.footprint.width_m, p.footprint.height_m]
    if p.step_x is not None:
        summary["step_m"] = [p.step_x, p.step_y]
        summary["utm_zone"] = f"{p.utm_zone}{p.hemisphere}"
    return summary


def make_provider(cfg: Config):
    if cfg.provider == "mock":
        return MockProvider(cfg.seed, cfg.mock_density)
    key = resolve_api_key(cfg.api_key)
    if not key:
        raise ConfigError("no API key: pass --api-key, set NADIRSIM_API_KEY or create .api_key "
                          "(or use --provider mock)")
    return StaticMapProvider(key)


def cmd_download(command: str, cfg: Config, dry_run: bool = False, out=sys.stdout) -> int:
    p = build_plan(command, cfg)
    summary = plan_summary(p, cfg)
    if dry_run:
        for key, value in summary.items():
            print(f"{key}: {value}", file=out)
        return 0

    provider = make_provider(cfg)
    name = cfg.mission_name or mission_name_for(cfg.coords)
    target = dataset_dir(cfg.data_dir, name, cfg.map_type, cfg.overlap)
    if summary["margin_shortfall_rows"]:
        log.warning("requested heights capped at 640 rows; up to %d rows short after cropping",
                    summary["margin_shortfall_rows"])
    snapshot = {"command": command, "config": cfg.snapshot(), "plan": summary}
    records = capture(p, provider, target, vmargin=cfg.vmargin, retry=cfg.retry, img_size=cfg.img_size,
                      concurrency=cfg.concurrency, hide_labels=cfg.hide_labels, snapshot=snapshot)
    print(f"wrote {len(records)} images to {target}", file=out)
    return 0


def target_dir(cfg: Config, dataset: str | None) -> Path:
    if dataset:
        path = Path(dataset)
    else:
        if not (cfg.mission_name or cfg.coords):
            raise ConfigError("name the dataset with --dataset, --mission-name or --coords")
        name = cfg.mission_name or mission_name_for(cfg.coords)
        path = dataset_dir(cfg.data_dir, name, cfg.map_type, cfg.overlap)
    if not (path / META_FILE).is_file():
        raise DatasetError(f"no dataset at {path} ({META_FILE} missing)")
    return path


def cmd_clean(cfg: Config, dataset: str | None = None, out=sys.stdout) -> int:
    path = target_dir(cfg, dataset)
    result = clean_dataset(path, cfg.entropy_threshold)
    print(f"retained {len(result.retained)}, discarded {len(result.discarded)} "
          f"(threshold {result.threshold}, judged by {result.reference})", file=out)
    if len(result.retained) >= 3:
        write_split(path, make_split(result.retained, cfg.split, cfg.seed))
    else:
        log.warning("too few retained images to split")
    return 0


def cmd_stats(cfg: Config, dataset: str | None = None, out=sys.stdout) -> int:
    path = target_dir(cfg, dataset)
    records = retained_records(path)
    if not records:
        print(f"0 images retained in {path}; nothing to summarise", file=out)
        return 0
    stats = entropy_stats(records, cfg.entropy_threshold)
    write_entropy_stats(path, stats)
    print(f"{stats.n} images, fraction below {stats.threshold}: {stats.fraction_below:.4f}", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help=f"JSON config file (default: ./{DEFAULT_CONFIG_FILE} if present)")
    common.add_argument("--coords", default=S,
                        help=f"coordinates file, {RASTER_GRAMMAR} or {SINGLE_GRAMMAR}")
    common.add_argument("--fov", type=float, default=S, help="diagonal field of view in degrees (78.8)")
    common.add_argument("--aspect-ratio", nargs=2, type=int, metavar=("W", "H"), default=S)
    common.add_argument("--map-type", choices=MAP_TYPES, default=S)
    common.add_argument("--data-dir", default=S)
    common.add_argument("--mission-name", default=S)
    common.add_argument("--vmargin", type=float, default=S, help="fraction of height cropped (0.2)")
    common.add_argument("--img-size", nargs=3, type=int, metavar=("W", "H", "C"), default=S)
    common.add_argument("--overlap", type=float, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--retry", type=int, default=S)
    common.add_argument("--api-key", default=S)
    common.add_argument("--concurrency", type=int, default=S)
    common.add_argument("--entropy-threshold", type=float, default=S,
                        help=f"bits (default {DEFAULT_THRESHOLD})")
    common.add_argument("--split", nargs=3, type=float, metavar=("TRAIN", "VAL", "TEST"), default=S)
    common.add_argument("--provider", choices=PROVIDERS, default=S)
    common.add_argument("--mock-density", type=float, default=S)
    common.add_argument("--show-labels", dest="hide_labels", action="store_false", default=S)
    common.add_argument("--edge-rule", choices=EDGE_RULES, default=S)
    common.add_argument("--span-metric", choices=SPAN_METRICS, default=S)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="nadirsim", description="Simulated nadir UAV imagery from static maps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DOWNLOAD_COMMANDS:
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--dry-run", action="store_true", help="print the plan without fetching")
    for name in ("clean", "stats"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--dataset", help="dataset directory holding meta_data.csv")
    return parser


_NON_CONFIG = {"command", "config", "verbose", "dry_run", "dataset"}


def main(argv=None, out=sys.stdout) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    cli_values = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    try:
        if args.config:
            file_values = load_config_file(args.config)
        elif Path(DEFAULT_CONFIG_FILE).is_file():
            file_values = load_config_file(DEFAULT_CONFIG_FILE)
        else:
            file_values = {}
        cfg = resolve_config(cli_values, file_values, Config())
        if args.command in DOWNLOAD_COMMANDS:
            return cmd_download(args.command, cfg, args.dry_run, out)
        if args.command == "clean":
            return cmd_clean(cfg, args.dataset, out)
        return cmd_stats(cfg, args.dataset, out)
    except NadirSimError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return DatasetError.exit_code


if __name__ == "__main__":
    sys.exit(main())
