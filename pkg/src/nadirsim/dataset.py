"""Dataset layout, ``meta_data.csv``, entropy cleanup and split manifests.

Layout::

    {data_dir}/{mission_name}/{map_type}_{overlap_percent}/
        {row:04}_{col:04}_{lat:.6f}_{lon:.6f}.png
        meta_data.csv  mission.json
        clean_manifest.json  split_manifest.json  entropy_hist.csv  entropy_stats.json

Curation never deletes images; it only writes manifests.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError, DomainError
from .geodesy import latlon_to_utm
from .geomath import GeoPoint
from .imaging import encode_png, load_image, resize, shannon_entropy

log = logging.getLogger(__name__)

META_FILE = "meta_data.csv"
META_HEADER = ["img_names", "columns", "rows", "Lat", "Lon", "Alt", "entropy"]
MISSION_FILE = "mission.json"
CLEAN_FILE = "clean_manifest.json"
SPLIT_FILE = "split_manifest.json"
HIST_FILE = "entropy_hist.csv"
STATS_FILE = "entropy_stats.json"
SPLITS = ("train", "val", "test")
DEFAULT_THRESHOLD = 2.1


@dataclass(frozen=True)
class MetaRecord:
    img_name: str
    col: int
    row: int
    lat: float
    lon: float
    alt: int  # zoom level, not meters
    entropy: float


def image_name(row: int, col: int, center: GeoPoint) -> str:
    return f"{row:04d}_{col:04d}_{center.lat:.6f}_{center.lon:.6f}.png"


def dataset_dir(data_dir, mission_name: str, map_type: str, overlap: float) -> Path:
    return Path(data_dir) / mission_name / f"{map_type}_{round(overlap * 100)}"


def _dump_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_meta(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(META_HEADER)
        for r in records:
            # repr keeps full float precision for lat/lon/entropy
            writer.writerow([r.img_name, r.col, r.row, repr(r.lat), repr(r.lon), r.alt, repr(r.entropy)])


def read_meta(path) -> list[MetaRecord]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no metadata table at {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != META_HEADER:
            raise DatasetError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            MetaRecord(row["img_names"], int(row["columns"]), int(row["rows"]), float(row["Lat"]),
                       float(row["Lon"]), int(row["Alt"]), float(row["entropy"]))
            for row in reader
        ]


def _write_atomic(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".part")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _records(waypoints, names, entropies):
    return [
        MetaRecord(name, wp.col, wp.row, wp.center.lat, wp.center.lon, wp.zoom, value)
        for wp, name, value in zip(waypoints, names, entropies)
        if value is not None
    ]


def write_dataset(plan, fetch_image, out_dir, *, img_size=None, expected_size=None,
                  concurrency: int = 4, snapshot: dict | None = None) -> list[MetaRecord]:
    """Fetch, store and index one image per waypoint of ``plan``.

    ``fetch_image(waypoint)`` returns the processed (cropped) image. Entropy
    is taken from that image before the optional ``img_size`` resize.
    Images already on disk with the expected pixel size and a row in the
    previous ``meta_data.csv`` are reused instead of fetched again.
    ``expected_size(waypoint)`` gives the stored ``(width, height)``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create dataset directory {out}: {exc}") from None

    previous = {}
    if (out / META_FILE).is_file():
        try:
            previous = {r.img_name: r for r in read_meta(out / META_FILE)}
        except (DatasetError, ValueError, KeyError):
            log.warning("ignoring unreadable %s", out / META_FILE)

    waypoints = plan.waypoints
    names = [image_name(wp.row, wp.col, wp.center) for wp in waypoints]
    if len(set(names)) != len(names):
        raise DatasetError("waypoint image names collide")
    entropies: list[float | None] = [None] * len(waypoints)

    def target_size(wp):
        if img_size is not None:
            return int(img_size[0]), int(img_size[1])
        return expected_size(wp) if expected_size else None

    pending = []
    for i, (wp, name) in enumerate(zip(waypoints, names)):
        path = out / name
        if name in previous and path.is_file():
            try:
                h, w = load_image(path).shape[:2]
            except Exception:
                h = w = None
            want = target_size(wp)
            if w is not None and (want is None or want == (w, h)):
                entropies[i] = previous[name].entropy
                continue
        pending.append(i)

    def work(i):
        wp = waypoints[i]
        img = fetch_image(wp)
        if img is None:
            raise DatasetError(f"no image returned for waypoint ({wp.row}, {wp.col})")
        value = shannon_entropy(img).value
        if img_size is not None:
            img = resize(img, img_size)
        try:
            _write_atomic(out / names[i], encode_png(img))
        except OSError as exc:
            raise DatasetError(f"cannot write {out / names[i]}: {exc}") from None
        return i, value

    if pending:
        log.info("fetching %d of %d images into %s", len(pending), len(waypoints), out)
        with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
            futures = [pool.submit(work, i) for i in pending]
            _, not_done = wait(futures, return_when=FIRST_EXCEPTION)
            for f in not_done:
                f.cancel()
        failure = None
        for f in futures:
            if f.cancelled():
                continue
            if f.exception() is not None:
                failure = failure or f.exception()
                continue
            i, value = f.result()
            entropies[i] = value
        if failure is not None:
            # index what did land so a re-run resumes instead of starting over
            write_meta(out / META_FILE, _records(waypoints, names, entropies))
            raise failure
    if any(e is None for e in entropies):
        raise DatasetError("image count does not match waypoint count")

    records = _records(waypoints, names, entropies)
    write_meta(out / META_FILE, records)
    if snapshot is not None:
        _dump_json(out / MISSION_FILE, snapshot)
    return records


# -- cleanup -----------------------------------------------------------------

@dataclass
class CleanupResult:
    threshold: float
    reference: str
    retained: list[MetaRecord]
    discarded: list[MetaRecord]
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "reference": self.reference,
            "retained": [r.img_name for r in self.retained],
            "discarded": [r.img_name for r in self.discarded],
            "warnings": self.warnings,
        }


def cleanup(records, threshold: float = DEFAULT_THRESHOLD, reference=None,
            reference_name: str = "roadmap") -> CleanupResult:
    """Keep records whose entropy is at least ``threshold``.

    With ``reference`` records (normally the roadmap run of the same mission)
    each record is judged by its ``(row, col)`` counterpart instead; records
    without a counterpart fall back to their own entropy.
    """
    records = list(records)
    index = {(r.row, r.col): r for r in reference} if reference is not None else None
    retained, discarded, warnings = [], [], []
    for rec in records:
        judge = rec
        if index is not None:
            judge = index.get((rec.row, rec.col))
            if judge is None:
                warnings.append(f"{rec.img_name}: no {reference_name} counterpart, using own entropy")
                judge = rec
        (retained if judge.entropy >= threshold else discarded).append(rec)
    for w in warnings:
        log.warning(w)
    return CleanupResult(threshold, reference_name if index is not None else "self",
                         retained, discarded, warnings)


def reference_dir(maptype_dir) -> Path | None:
    """The roadmap sibling of a non-roadmap dataset directory, if one exists."""
    maptype_dir = Path(maptype_dir)
    map_type, _, suffix = maptype_dir.name.rpartition("_")
    if map_type == "roadmap":
        return None
    candidate = maptype_dir.parent / f"roadmap_{suffix}"
    return candidate if (candidate / META_FILE).is_file() else None


def clean_dataset(maptype_dir, threshold: float = DEFAULT_THRESHOLD) -> CleanupResult:
    maptype_dir = Path(maptype_dir)
    records = read_meta(maptype_dir / META_FILE)
    ref_dir = reference_dir(maptype_dir)
    reference = read_meta(ref_dir / META_FILE) if ref_dir else None
    result = cleanup(records, threshold, reference)
    _dump_json(maptype_dir / CLEAN_FILE, result.to_json())
    return result


def retained_records(maptype_dir) -> list[MetaRecord]:
    """Records kept by the last cleanup, or all records if never cleaned."""
    maptype_dir = Path(maptype_dir)
    records = read_meta(maptype_dir / META_FILE)
    manifest = maptype_dir / CLEAN_FILE
    if not manifest.is_file():
        return records
    keep = set(json.loads(manifest.read_text(encoding="utf-8"))["retained"])
    return [r for r in records if r.img_name in keep]


# -- split -------------------------------------------------------------------

@dataclass
class SplitManifest:
    seed: int
    fractions: tuple[float, float, float]
    assignments: dict[str, str]
    label_stats: dict[str, dict[str, float]]
    utm_zone: int
    hemisphere: str
    labels: dict[str, list[float]]

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "utm_zone": self.utm_zone,
            "hemisphere": self.hemisphere,
            "label_stats": self.label_stats,
            "assignments": self.assignments,
            "labels": self.labels,
        }

    def members(self, split: str) -> list[str]:
        return sorted(name for name, s in self.assignments.items() if s == split)


def make_split(records, fractions=(0.8, 0.1, 0.1), seed: int = 2024) -> SplitManifest:
    """Seeded shuffle into train/val/test with standard-scaled UTM labels.

    Scaler statistics come from the train split only. Labels share the UTM
    zone of the first record in name order (the raster's top-left cell).
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise DomainError(f"split fractions must be three positive numbers summing to 1, got {fractions}")
    records = sorted(records, key=lambda r: r.img_name)
    n = len(records)
    if n < len(SPLITS):
        raise DomainError(f"need at least {len(SPLITS)} records to split, got {n}")

    order = np.random.default_rng(seed).permutation(n)
    cuts = [0] + [round(c * n) for c in np.cumsum(fractions)[:-1]] + [n]
    assignments = {}
    for split, lo, hi in zip(SPLITS, cuts[:-1], cuts[1:]):
        for idx in order[lo:hi]:
            assignments[records[idx].img_name] = split

    first = latlon_to_utm(GeoPoint(records[0].lat, records[0].lon))
    xy = np.array([
        (u.easting, u.northing)
        for u in (latlon_to_utm(GeoPoint(r.lat, r.lon), first.zone, first.hemisphere) for r in records)
    ])
    train = np.array([assignments[r.img_name] == "train" for r in records])
    mean = xy[train].mean(axis=0)
    std = xy[train].std(axis=0)
    std[std == 0] = 1.0
    scaled = (xy - mean) / std
    stats = {
        axis: {"mean": float(mean[k]), "std": float(std[k])}
        for k, axis in enumerate(("easting", "northing"))
    }
    labels = {r.img_name: [float(v) for v in scaled[k]] for k, r in enumerate(records)}
    return SplitManifest(int(seed), fractions, assignments, stats, first.zone, first.hemisphere, labels)


def write_split(maptype_dir, manifest: SplitManifest) -> Path:
    path = Path(maptype_dir) / SPLIT_FILE
    _dump_json(path, manifest.to_json())
    return path


# -- entropy statistics --------------------------------------------------------

@dataclass
class EntropyStats:
    edges: np.ndarray
    counts: np.ndarray
    threshold: float
    fraction_below: float
    n: int


def entropy_stats(records, threshold: float = DEFAULT_THRESHOLD, bins: int = 64) -> EntropyStats:
    values = np.array([r.entropy for r in records], dtype=float)
    if values.size == 0:
        raise DomainError("no records to summarise")
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 8.0))
    below = float(np.count_nonzero(values < threshold)) / values.size
    return EntropyStats(edges, counts, float(threshold), below, int(values.size))


def write_entropy_stats(maptype_dir, stats: EntropyStats) -> Path:
    maptype_dir = Path(maptype_dir)
    path = maptype_dir / HIST_FILE
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_start", "bin_end", "count"])
        for lo, hi, c in zip(stats.edges[:-1], stats.edges[1:], stats.counts):
            writer.writerow([f"{lo:g}", f"{hi:g}", int(c)])
    _dump_json(maptype_dir / STATS_FILE, {
        "n": stats.n,
        "threshold": stats.threshold,
        "fraction_below_threshold": stats.fraction_below,
    })
    return path
