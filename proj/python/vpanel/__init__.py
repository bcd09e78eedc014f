"""Dynamic multi-image panels for video QA: sampling plans, panel images,
answer parsing and prompt rendering."""

import json

from . import _core
from ._core import (
    VpanelError,
    compose_panel,
    detection_expectation,
    format_points,
    format_relative,
    parse_choice,
    render_prompt,
    resize_bilinear,
    slice_panel,
    uniform_indices,
)

__all__ = [
    "VpanelError",
    "compose_panel",
    "detection_expectation",
    "format_points",
    "format_relative",
    "panelize",
    "parse_choice",
    "plan",
    "render_prompt",
    "resize_bilinear",
    "slice_panel",
    "uniform_indices",
]


def plan(frame_count, fps=2.0, width=640, height=480, *, context_window=32,
         grid="2x2", gamma="1fps", mode="auto"):
    """Sampling plan for one video as a dict (same fields as `vpanel plan --json`)."""
    return json.loads(_core.plan_json(frame_count, fps, width, height,
                                      context_window, grid, gamma, mode))


def panelize(uri, out_dir, *, context_window=32, grid="2x2", gamma="1fps",
             mode="auto"):
    """Panelize a video (or frame directory) into out_dir; returns the manifest."""
    return json.loads(_core.panelize_json(str(uri), str(out_dir), context_window,
                                          grid, gamma, mode))
