"""Glue between planner, provider, imaging and dataset writer."""

from __future__ import annotations

import logging

from .dataset import write_dataset
from .imaging import crop_vmargin, cropped_height
from .provider import CaptureSpec, margin_height

log = logging.getLogger(__name__)


def capture_spec(wp, map_type: str, vmargin: float, hide_labels: bool = True) -> CaptureSpec:
    height, _ = margin_height(wp.res_y, vmargin)
    return CaptureSpec(wp.center, wp.zoom, wp.res_x, height, map_type, hide_labels)


def stored_size(wp, vmargin: float) -> tuple[int, int]:
    """``(width, height)`` of a waypoint's image after the margin crop."""
    height, _ = margin_height(wp.res_y, vmargin)
    return wp.res_x, cropped_height(height, vmargin)


def margin_shortfall(plan, vmargin: float) -> int:
    """Largest row deficit across the plan when the margin request hit the cap."""
    return max((margin_height(wp.res_y, vmargin)[1] for wp in plan.waypoints), default=0)


def capture(plan, provider, out_dir, *, vmargin: float = 0.2, retry: int = 3, img_size=None,
            concurrency: int = 4, hide_labels: bool = True, snapshot=None):
    map_type = plan.spec.map_type
    total = len(plan.waypoints)
    done = [0]

    def fetch_image(wp):
        result = provider.fetch(capture_spec(wp, map_type, vmargin, hide_labels), retry)
        image = crop_vmargin(result.image, vmargin)
        done[0] += 1
        log.info("captured %d/%d (row %d, col %d, %d attempt(s))",
                 done[0], total, wp.row, wp.col, result.attempts)
        return image

    return write_dataset(plan, fetch_image, out_dir, img_size=img_size,
                         expected_size=lambda wp: stored_size(wp, vmargin),
                         concurrency=concurrency, snapshot=snapshot)
