"""Vector, segment, and oriented-box primitives for line-of-sight queries.

All geometry is double precision; comparisons use an absolute tolerance of
``TOL`` metres. Grazing contact (a segment tangent to a box face) counts as
a hit, which keeps every blockage decision conservative.
"""

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from .mobility import VehicleState

TOL = 1e-9


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Vec3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))

    @staticmethod
    def from_array(a: Sequence[float]) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class Segment:
    start: Vec3
    end: Vec3

    def length(self) -> float:
        return self.start.distance_to(self.end)


def wrap_angle(a: float) -> float:
    """Map an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class OrientedBox:
    """Box centred at ``center``, rotated by ``yaw`` about the +z axis."""

    center: Vec3
    half_extents: Vec3
    yaw: float = 0.0

    def __post_init__(self):
        he = self.half_extents
        if not (he.x > 0.0 and he.y > 0.0 and he.z > 0.0):
            raise ValueError("half_extents must all be positive")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class LosResult:
    clear: bool
    blocker: Optional[object] = None


# ---------------------------------------------------------------------------
# Vectorised kernels. These operate on plain float arrays so that a whole
# connection graph's worth of candidate links can be tested in one call.
# ---------------------------------------------------------------------------

def boxes_as_arrays(boxes: Iterable[OrientedBox]):
    """Pack boxes into (centers, half_extents, cos_yaw, sin_yaw) arrays."""
    bs = list(boxes)
    centers = np.array(
        [[b.center.x, b.center.y, b.center.z] for b in bs], dtype=float
    ).reshape(-1, 3)
    half = np.array(
        [[b.half_extents.x, b.half_extents.y, b.half_extents.z] for b in bs],
        dtype=float,
    ).reshape(-1, 3)
    yaw = np.array([b.yaw for b in bs], dtype=float)
    return centers, half, np.cos(yaw), np.sin(yaw)


def segment_box_hits(starts, ends, centers, half, cos_yaw, sin_yaw):
    """Slab test of S segments against B oriented boxes.

    Returns ``(hit, t_entry)``: a boolean (S, B) matrix and the entry
    parameter of each segment into each box (meaningful only where ``hit``).
    A segment parameter of 0 is the start point, 1 the end point.
    """
    starts = np.asarray(starts, dtype=float).reshape(-1, 3)
    ends = np.asarray(ends, dtype=float).reshape(-1, 3)
    n_seg = starts.shape[0]
    n_box = centers.shape[0]
    if n_box == 0 or n_seg == 0:
        return (np.zeros((n_seg, n_box), dtype=bool),
                np.zeros((n_seg, n_box), dtype=float))

    d = ends - starts
    rel = starts[:, None, :] - centers[None, :, :]
    c = cos_yaw[None, :]
    s = sin_yaw[None, :]
    # rotate by -yaw into each box frame
    px = rel[..., 0] * c + rel[..., 1] * s
    py = -rel[..., 0] * s + rel[..., 1] * c
    pz = rel[..., 2]
    dx = d[:, None, 0] * c + d[:, None, 1] * s
    dy = -d[:, None, 0] * s + d[:, None, 1] * c
    dz = np.broadcast_to(d[:, None, 2], px.shape)

    tmin = np.full((n_seg, n_box), -np.inf)
    tmax = np.full((n_seg, n_box), np.inf)
    axes = (
        (px, dx, half[None, :, 0]),
        (py, dy, half[None, :, 1]),
        (pz, dz, half[None, :, 2]),
    )
    for p_a, d_a, h_a in axes:
        lo = -h_a - TOL
        hi = h_a + TOL
        parallel = np.abs(d_a) < 1e-12
        d_safe = np.where(parallel, 1.0, d_a)
        t1 = (lo - p_a) / d_safe
        t2 = (hi - p_a) / d_safe
        a_min = np.minimum(t1, t2)
        a_max = np.maximum(t1, t2)
        inside = (p_a >= lo) & (p_a <= hi)
        a_min = np.where(parallel, np.where(inside, -np.inf, np.inf), a_min)
        a_max = np.where(parallel, np.where(inside, np.inf, -np.inf), a_max)
        tmin = np.maximum(tmin, a_min)
        tmax = np.minimum(tmax, a_max)

    enter = np.maximum(tmin, 0.0)
    exit_ = np.minimum(tmax, 1.0)
    hit = enter <= exit_ + 1e-12
    return hit, enter


def point_line_projections(starts, ends, points):
    """Distance of P points to the infinite lines through S segments.

    Returns ``(dist, t)`` with shapes (S, P): the point-to-line distance and
    the normalised projection parameter along each segment.
    """
    starts = np.asarray(starts, dtype=float).reshape(-1, 3)
    ends = np.asarray(ends, dtype=float).reshape(-1, 3)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    d = ends - starts
    len_sq = np.einsum("sk,sk->s", d, d)
    if np.any(len_sq <= TOL * TOL):
        raise ValueError("degenerate zero-length segment")
    rel = points[None, :, :] - starts[:, None, :]
    t = np.einsum("spk,sk->sp", rel, d) / len_sq[:, None]
    closest = starts[:, None, :] + t[..., None] * d[:, None, :]
    dist = np.linalg.norm(points[None, :, :] - closest, axis=-1)
    return dist, t


# ---------------------------------------------------------------------------
# Scalar operations
# ---------------------------------------------------------------------------

def perpendicular_distance(seg: Segment, p: Vec3) -> tuple[float, float]:
    """Distance from ``p`` to the infinite line through ``seg``.

    Returns ``(distance, t)`` where ``t`` is the normalised projection
    parameter (0 at ``seg.start``, 1 at ``seg.end``). Raises ``ValueError``
    for a zero-length segment.
    """
    dist, t = point_line_projections(
        seg.start.as_array(), seg.end.as_array(), p.as_array()
    )
    return float(dist[0, 0]), float(t[0, 0])


def segment_intersects_box(seg: Segment, box: OrientedBox) -> bool:
    """True iff any point of ``seg`` lies inside or on ``box``."""
    hit, _ = segment_box_hits(
        seg.start.as_array(), seg.end.as_array(), *boxes_as_arrays([box])
    )
    return bool(hit[0, 0])


def vehicle_box(state: "VehicleState") -> OrientedBox:
    """Oriented bounding box of a vehicle, sitting on the ground plane."""
    length, width, height = state.dims
    if length <= 0 or width <= 0 or height <= 0:
        raise ValueError(f"vehicle {state.id!r} has non-positive dimensions")
    p = state.position
    return OrientedBox(
        center=Vec3(p.x, p.y, p.z + height / 2.0),
        half_extents=Vec3(length / 2.0, width / 2.0, height / 2.0),
        yaw=state.heading,
    )


def antenna_positions(state: "VehicleState") -> list[Vec3]:
    """World positions of the four roof-corner antennas.

    Order is fixed: front-left, front-right, rear-left, rear-right.
    """
    length, width, height = state.dims
    c = math.cos(state.heading)
    s = math.sin(state.heading)
    p = state.position
    corners = (
        (length / 2.0, width / 2.0),
        (length / 2.0, -width / 2.0),
        (-length / 2.0, width / 2.0),
        (-length / 2.0, -width / 2.0),
    )
    return [
        Vec3(p.x + ox * c - oy * s, p.y + ox * s + oy * c, p.z + height)
        for ox, oy in corners
    ]


def los_check(
    a: Vec3,
    b: Vec3,
    obstacles: Iterable[tuple[object, OrientedBox]],
    exclude: frozenset = frozenset(),
) -> LosResult:
    """Line-of-sight between two points against identified obstacle boxes.

    Obstacles whose id is in ``exclude`` are ignored. When several boxes
    block the segment, the reported blocker is the one entered first coming
    from ``a`` (ties broken by smallest id).
    """
    if a.distance_to(b) <= TOL:
        raise ValueError("los_check requires two distinct points")
    kept = [(oid, box) for oid, box in obstacles if oid not in exclude]
    if not kept:
        return LosResult(clear=True)
    hit, t_entry = segment_box_hits(
        a.as_array(), b.as_array(), *boxes_as_arrays([box for _, box in kept])
    )
    blockers = [
        (float(t_entry[0, i]), str(kept[i][0]), kept[i][0])
        for i in range(len(kept))
        if hit[0, i]
    ]
    if not blockers:
        return LosResult(clear=True)
    blockers.sort(key=lambda item: (item[0], item[1]))
    return LosResult(clear=False, blocker=blockers[0][2])
