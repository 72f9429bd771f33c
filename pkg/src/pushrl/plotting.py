"""SVG rendering of episode trajectories.

Output is plain SVG with the world-to-image transform declared as data-
attributes on the root element (data-scale, data-margin, data-x-min,
data-y-max), so tooling can map plotted points back to world coordinates:

    x = x_min + (X - margin) / scale
    y = y_max - (Y - margin) / scale
"""

from __future__ import annotations

from pathlib import Path

from .env import Goal, Workspace
from .harness import EpisodeLog

_SCALE = 1000.0  # svg units per meter (mm)
_MARGIN = 10.0  # mm

PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Mapper:
    def __init__(self, ws: Workspace):
        self.ws = ws

    def point(self, x: float, y: float) -> tuple[float, float]:
        return (
            (x - self.ws.x_min) * _SCALE + _MARGIN,
            (self.ws.y_max - y) * _SCALE + _MARGIN,
        )

    def polyline(self, xy) -> str:
        return " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (self.point(x, y) for x, y in xy))


def render_svg(
    logs: list[EpisodeLog],
    goals: list[Goal],
    workspace: Workspace,
    out_path=None,
    goal_radius: float = 0.025,
    title: str | None = None,
) -> str:
    m = _Mapper(workspace)
    width = (workspace.x_max - workspace.x_min) * _SCALE + 2 * _MARGIN
    height = (workspace.y_max - workspace.y_min) * _SCALE + 2 * _MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(width)} {_fmt(height)}" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'data-scale="{_SCALE}" data-margin="{_MARGIN}" '
        f'data-x-min="{workspace.x_min!r}" data-y-max="{workspace.y_max!r}">'
    ]
    if title:
        parts.append(f'<title>{title}</title>')
    x0, y0 = m.point(workspace.x_min, workspace.y_max)
    parts.append(
        f'<rect class="workspace" x="{_fmt(x0)}" y="{_fmt(y0)}" '
        f'width="{_fmt((workspace.x_max - workspace.x_min) * _SCALE)}" '
        f'height="{_fmt((workspace.y_max - workspace.y_min) * _SCALE)}" '
        'fill="#fafafa" stroke="#333" stroke-width="1"/>'
    )
    for g in goals:
        gx, gy = m.point(g.x, g.y)
        parts.append(
            f'<circle class="goal" cx="{_fmt(gx)}" cy="{_fmt(gy)}" '
            f'r="{_fmt(goal_radius * _SCALE)}" fill="none" stroke="#2ca02c" stroke-width="1.5"/>'
        )
    for log in logs:
        color = PALETTE[log.episode_id % len(PALETTE)]
        pusher = m.polyline(log.data[:, 0:2])
        obj = m.polyline(log.data[:, 6:8])
        parts.append(
            f'<polyline class="traj-pusher episode-{log.episode_id}" points="{pusher}" '
            f'fill="none" stroke="{color}" stroke-width="0.8" stroke-dasharray="4 3" opacity="0.6"/>'
        )
        parts.append(
            f'<polyline class="traj-object episode-{log.episode_id}" points="{obj}" '
            f'fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        sx, sy = m.point(log.data[0, 6], log.data[0, 7])
        ex, ey = m.point(log.data[-1, 6], log.data[-1, 7])
        parts.append(
            f'<circle class="start episode-{log.episode_id}" cx="{_fmt(sx)}" cy="{_fmt(sy)}" '
            f'r="3" fill="{color}"/>'
        )
        marker = "#2ca02c" if log.status == "success" else "#d62728"
        parts.append(
            f'<circle class="end episode-{log.episode_id}" cx="{_fmt(ex)}" cy="{_fmt(ey)}" '
            f'r="3" fill="none" stroke="{marker}" stroke-width="1.5"/>'
        )
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg


def parse_transform(svg_text: str) -> dict:
    """Read the declared world transform back out of a rendered SVG."""
    import re

    attrs = {}
    for key in ("data-scale", "data-margin", "data-x-min", "data-y-max"):
        match = re.search(f'{key}="([^"]+)"', svg_text)
        if match is None:
            raise ValueError(f"svg lacks {key}")
        attrs[key] = float(match.group(1))
    return attrs


def svg_to_world(attrs: dict, px: float, py: float) -> tuple[float, float]:
    s, mg = attrs["data-scale"], attrs["data-margin"]
    return (
        attrs["data-x-min"] + (px - mg) / s,
        attrs["data-y-max"] - (py - mg) / s,
    )
