"""Planar geometry: angle wrapping, rigid poses, convex polygon shapes."""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    r = theta % TWO_PI  # [0, 2*pi)
    if r > math.pi:
        r -= TWO_PI
    return r


def rotate(theta: float, x: float, y: float) -> tuple[float, float]:
    """Rotate the vector (x, y) by theta."""
    c, s = math.cos(theta), math.sin(theta)
    return c * x - s * y, s * x + c * y


@dataclass(frozen=True)
class Pose2:
    """Rigid planar pose; theta is kept in (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose translation must be finite, got ({self.x!r}, {self.y!r})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def transform(self, px: float, py: float) -> tuple[float, float]:
        """Map a point from this frame to the parent frame."""
        rx, ry = rotate(self.theta, px, py)
        return self.x + rx, self.y + ry

    def inverse_transform(self, wx: float, wy: float) -> tuple[float, float]:
        """Map a parent-frame point into this frame."""
        return rotate(-self.theta, wx - self.x, wy - self.y)

    def compose(self, local: "Pose2") -> "Pose2":
        """Pose of `local` (expressed in this frame) in the parent frame."""
        x, y = self.transform(local.x, local.y)
        return Pose2(x, y, self.theta + local.theta)

    def relative_to(self, base: "Pose2") -> "Pose2":
        """This pose expressed in the frame of `base`."""
        x, y = base.inverse_transform(self.x, self.y)
        return Pose2(x, y, self.theta - base.theta)


class ConvexShape:
    """Strictly convex polygon with CCW vertices and centroid at the body origin.

    The centroid condition keeps the body origin meaningful as the default
    center of friction; off-center friction is modeled separately
    (SliderParams.cof_offset), not by shifting vertices.
    """

    def __init__(self, vertices, name: str = "shape"):
        verts = tuple((float(x), float(y)) for x, y in vertices)
        if len(verts) < 3:
            raise ValueError(f"shape {name!r} needs at least 3 vertices, got {len(verts)}")
        for x, y in verts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"shape {name!r} has non-finite vertex ({x!r}, {y!r})")
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            cx, cy = verts[(i + 2) % n]
            cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
            if cross <= 0.0:
                raise ValueError(
                    f"shape {name!r} is not strictly convex CCW at vertex {(i + 1) % n}"
                )
        cx, cy, area = _polygon_centroid(verts)
        if math.hypot(cx, cy) > 1e-7:
            raise ValueError(
                f"shape {name!r} centroid ({cx:.3e}, {cy:.3e}) is not at the body origin"
            )
        self.vertices = verts
        self.name = name
        self.area = area
        normals = []
        inradius = math.inf
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            ex, ey = bx - ax, by - ay
            length = math.hypot(ex, ey)
            nx, ny = ey / length, -ex / length  # outward for CCW winding
            normals.append((nx, ny))
            inradius = min(inradius, ax * nx + ay * ny)  # origin-to-edge distance
        self.edge_normals = tuple(normals)
        self.inradius = inradius
        self.circumradius = max(math.hypot(x, y) for x, y in verts)

    def __repr__(self):
        return f"ConvexShape({self.name!r}, {len(self.vertices)} vertices)"

    @classmethod
    def box(cls, width: float, height: float, name: str = "box") -> "ConvexShape":
        w, h = width / 2.0, height / 2.0
        return cls([(-w, -h), (w, -h), (w, h), (-w, h)], name=name)

    @classmethod
    def regular(cls, sides: int, circumradius: float, name: str = "polygon") -> "ConvexShape":
        """Regular polygon with one face centered on the -x axis.

        The face-on--x orientation makes theta = 0 present a flat face to a
        pusher approaching along +x.
        """
        if sides < 3:
            raise ValueError("regular polygon needs at least 3 sides")
        half = math.pi / sides
        verts = []
        for k in range(sides):
            a = math.pi + half + k * 2.0 * math.pi / sides
            verts.append((circumradius * math.cos(a), circumradius * math.sin(a)))
        return cls(verts, name=name)


def _polygon_centroid(verts) -> tuple[float, float, float]:
    a2 = 0.0
    cx = 0.0
    cy = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        w = x0 * y1 - x1 * y0
        a2 += w
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    area = a2 / 2.0
    if area <= 0.0:
        raise ValueError("degenerate polygon")
    return cx / (6.0 * area), cy / (6.0 * area), area
