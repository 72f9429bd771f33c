"""Quasi-static single-point pushing with an ellipsoidal limit surface.

A round-tipped pusher presses on a convex polygonal slider. Under the
quasi-static assumption the slider's twist is read off the limit surface:
for a contact force f applied at lever arm r from the center of friction
(COF), the instantaneous motion of the COF is proportional to

    v = f,          omega = (r x f) / c**2

in scaled units, where c is the limit-surface torque/force ratio (meters).
A step solves for the force direction consistent with Coulomb friction at
the contact (sticking inside the cone, sliding on a cone edge) and applies
the resulting displacement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .geometry import ConvexShape, Pose2, rotate, wrap_angle

# Contacts further than this from the tip surface are not reported at all;
# gap in (0, DETECTION_RANGE] is reported as Separated geometry.
DETECTION_RANGE = 0.005


class ContactMode(enum.Enum):
    STICKING = "Sticking"
    SLIDING_LEFT = "SlidingLeft"
    SLIDING_RIGHT = "SlidingRight"
    SEPARATED = "Separated"


@dataclass(frozen=True)
class PusherParams:
    """Round-tipped pusher; only the tip circle touches the slider."""

    tip_radius: float = 0.005

    def __post_init__(self):
        if not (math.isfinite(self.tip_radius) and self.tip_radius > 0):
            raise ValueError(f"tip_radius must be positive, got {self.tip_radius!r}")


@dataclass(frozen=True)
class SliderParams:
    """Contact friction and limit-surface parameters of the pushed object."""

    mu_contact: float = 0.3
    c_ls: float = 0.03
    cof_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (math.isfinite(self.mu_contact) and self.mu_contact > 0):
            raise ValueError(f"mu_contact must be positive, got {self.mu_contact!r}")
        if not (math.isfinite(self.c_ls) and self.c_ls > 0):
            raise ValueError(f"c_ls must be positive, got {self.c_ls!r}")
        ox, oy = self.cof_offset
        if not (math.isfinite(ox) and math.isfinite(oy)):
            raise ValueError("cof_offset must be finite")
        object.__setattr__(self, "cof_offset", (float(ox), float(oy)))

    def validate_for_shape(self, shape: ConvexShape) -> None:
        if math.hypot(*self.cof_offset) >= shape.inradius:
            raise ValueError(
                f"cof_offset {self.cof_offset} lies outside the inradius "
                f"{shape.inradius:.4f} of shape {shape.name!r}"
            )


@dataclass(frozen=True)
class Contact:
    """Single contact between the tip circle and the slider boundary.

    point   world position of the contact on the slider surface
    normal  outward unit normal of the slider surface (points at the pusher)
    depth   tip penetration (> 0 touching; <= 0 means a gap of -depth)
    edge_index  polygon edge owning the closest feature
    mode    Separated when depth <= 0, Sticking placeholder otherwise
    """

    point: tuple[float, float]
    normal: tuple[float, float]
    depth: float
    edge_index: int
    mode: ContactMode


def closest_contact(
    pusher_pose: Pose2,
    pusher: PusherParams,
    shape: ConvexShape,
    object_pose: Pose2,
) -> Contact:
    """Nearest-feature contact geometry regardless of separation distance."""
    # Tip center in the slider body frame; the polygon is static there.
    cx, cy = object_pose.inverse_transform(pusher_pose.x, pusher_pose.y)
    best_d2 = math.inf
    best = (0, 0.0, 0.0)
    verts = shape.vertices
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        t = ((cx - ax) * ex + (cy - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        px, py = ax + t * ex, ay + t * ey
        d2 = (cx - px) ** 2 + (cy - py) ** 2
        if d2 < best_d2 - 1e-18:  # strict improvement; earlier edge wins ties
            best_d2 = d2
            best = (i, px, py)
    edge_index, px, py = best
    dist = math.sqrt(best_d2)
    inside = _point_inside(shape, cx, cy)
    if dist > 1e-12:
        nx, ny = (cx - px) / dist, (cy - py) / dist
        if inside:
            nx, ny = -nx, -ny
            dist = -dist
    else:
        nx, ny = shape.edge_normals[edge_index]
        dist = 0.0
    depth = pusher.tip_radius - dist
    wx, wy = object_pose.transform(px, py)
    wnx, wny = rotate(object_pose.theta, nx, ny)
    mode = ContactMode.STICKING if depth > 0.0 else ContactMode.SEPARATED
    return Contact(point=(wx, wy), normal=(wnx, wny), depth=depth, edge_index=edge_index, mode=mode)


def detect_contact(
    pusher_pose: Pose2,
    pusher: PusherParams,
    shape: ConvexShape,
    object_pose: Pose2,
) -> Contact | None:
    """Contact within detection range, or None when the gap exceeds 5 mm."""
    contact = closest_contact(pusher_pose, pusher, shape, object_pose)
    if -contact.depth > DETECTION_RANGE:
        return None
    return contact


def contact_frame(contact: Contact) -> Pose2:
    """World pose of the contact frame: origin at the contact point, x-axis
    along the inward normal (the direction the pusher pushes)."""
    nx, ny = contact.normal
    return Pose2(contact.point[0], contact.point[1], math.atan2(-ny, -nx))


def surface_pose(contact: Contact, object_pose: Pose2, pusher_pose: Pose2) -> Pose2:
    """Contact frame expressed in the pusher frame."""
    if contact.mode is ContactMode.SEPARATED:
        raise ValueError("no surface pose without contact")
    return contact_frame(contact).relative_to(pusher_pose)


@dataclass(frozen=True)
class QuasiStaticSolution:
    """Diagnostics from one quasi-static solve (scaled force units)."""

    mode: ContactMode
    force: tuple[float, float]
    twist: tuple[float, float, float]  # (vx, vy, omega) of the COF, per step
    contact_displacement: tuple[float, float]
    slip: float  # tangential slip of the tip along the surface, +left


_MAX_MOTION = 0.002  # small-motion regime bound on |(dx, dy)| per step


def quasi_static_solve(
    object_pose: Pose2,
    slider: SliderParams,
    contact: Contact,
    pusher_motion: tuple[float, float, float],
    pusher_pose: Pose2,
) -> QuasiStaticSolution:
    dx, dy, dth = (float(v) for v in pusher_motion)
    for v in (dx, dy, dth):
        if not math.isfinite(v):
            raise ValueError(f"pusher_motion must be finite, got {pusher_motion!r}")
    if math.hypot(dx, dy) > _MAX_MOTION + 1e-12:
        raise ValueError(
            f"pusher translation {math.hypot(dx, dy):.4f} m exceeds the small-motion bound "
            f"{_MAX_MOTION} m"
        )
    if contact.mode is ContactMode.SEPARATED:
        raise ValueError("quasi-static step requires a touching contact")

    # Tip translation in the world frame. The tip is a circle, so spinning the
    # pusher (dth) re-aims it without dragging the contact.
    ux, uy = rotate(pusher_pose.theta, dx, dy)
    nx, ny = -contact.normal[0], -contact.normal[1]  # inward: push direction
    tx, ty = -ny, nx  # left of the push direction
    un = ux * nx + uy * ny
    zero = QuasiStaticSolution(
        ContactMode.SEPARATED, (0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0), 0.0
    )
    if un <= 0.0:
        return zero  # withdrawing or tangent: no quasi-static push this step

    cofx, cofy = object_pose.transform(*slider.cof_offset)
    rx, ry = contact.point[0] - cofx, contact.point[1] - cofy
    c2 = slider.c_ls * slider.c_ls
    m11 = 1.0 + ry * ry / c2
    m12 = -rx * ry / c2
    m22 = 1.0 + rx * rx / c2
    det = m11 * m22 - m12 * m12  # = 1 + |r|^2/c^2 > 0
    mu = slider.mu_contact

    # Sticking hypothesis: contact moves with the tip, f = M^-1 u.
    fx = (m22 * ux - m12 * uy) / det
    fy = (-m12 * ux + m11 * uy) / det
    fn = fx * nx + fy * ny
    ft = fx * tx + fy * ty
    if fn > 0.0 and abs(ft) <= mu * fn:  # boundary counts as sticking
        omega = (rx * fy - ry * fx) / c2
        return QuasiStaticSolution(
            ContactMode.STICKING, (fx, fy), (fx, fy, omega), (ux, uy), 0.0
        )

    if fn > 0.0:
        sigma = 1.0 if ft > 0.0 else -1.0
    else:
        # Degenerate lever arms can map the friction cone past a half-plane;
        # fall back to the kinematic side of the tangential motion.
        ut = ux * tx + uy * ty
        sigma = 1.0 if ut > 0.0 else -1.0

    # Sliding: force pinned to the cone edge d = n + sigma*mu*t, magnitude set
    # by matching the normal component of the contact velocity to the tip's.
    dxv = nx + sigma * mu * tx
    dyv = ny + sigma * mu * ty
    mdx = m11 * dxv + m12 * dyv
    mdy = m12 * dxv + m22 * dyv
    denom = nx * mdx + ny * mdy
    if denom <= 1e-12:
        return zero  # contact cannot be maintained on this cone edge
    s = un / denom
    omega = s * (rx * dyv - ry * dxv) / c2
    dpx, dpy = s * mdx, s * mdy
    # Tip slip relative to the surface, along +t.
    slip = (ux - dpx) * tx + (uy - dpy) * ty
    mode = ContactMode.SLIDING_LEFT if sigma > 0.0 else ContactMode.SLIDING_RIGHT
    return QuasiStaticSolution(
        mode, (s * dxv, s * dyv), (s * dxv, s * dyv, omega), (dpx, dpy), slip
    )


def quasi_static_step(
    object_pose: Pose2,
    slider: SliderParams,
    contact: Contact,
    pusher_motion: tuple[float, float, float],
    pusher_pose: Pose2,
) -> tuple[Pose2, ContactMode]:
    """Advance the slider pose through one small pusher motion.

    Returns the new object pose and the contact mode of the step. A
    withdrawing motion reports Separated and leaves the pose unchanged.
    """
    sol = quasi_static_solve(object_pose, slider, contact, pusher_motion, pusher_pose)
    if sol.mode is ContactMode.SEPARATED:
        return object_pose, sol.mode
    dpx, dpy = sol.contact_displacement
    dtheta = sol.twist[2]
    # Rotate about the contact point, then move that material point by the
    # solved contact displacement. First-order equal to the COF twist but it
    # cannot create spurious gap at the contact (depth is preserved exactly
    # under sticking translation).
    px, py = contact.point
    ox, oy = rotate(dtheta, object_pose.x - px, object_pose.y - py)
    new_pose = Pose2(px + dpx + ox, py + dpy + oy, object_pose.theta + dtheta)
    return new_pose, sol.mode


def _point_inside(shape: ConvexShape, x: float, y: float) -> bool:
    for (ax, ay), (nx, ny) in zip(shape.vertices, shape.edge_normals):
        if (x - ax) * nx + (y - ay) * ny > 0.0:
            return False
    return True
