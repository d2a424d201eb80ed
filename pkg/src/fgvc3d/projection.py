"""Orthographic RGB and depth rendering of point-cloud views.

Pixel contract (shared with the test oracle): a point with planar
coordinates (u, v) lands in column ``floor((u - u0) / side * S)`` and row
``floor((v - v0) / side * S)``, where the bounding square of side
``max(planar extents) * (1 + 2 * margin)`` is centered on the planar
bounding-box center and S is the image size. When several points share a
pixel the one nearest the camera (largest coordinate along the projection
axis) wins both color and depth; exact ties go to the lowest point index.
Foreground depth is ``rint(255 * (1 - (w_max - w) / (w_max - w_min + eps)))``
clamped to [1, 255]; background is 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import GeometryError, ValidationError
from .pointcloud import MIN_PIPELINE_POINTS, PointCloudView

DEPTH_EPSILON = 1e-9  # guards flat clouds in the depth normalization
_RANK_RTOL = 1e-12  # eigenvalue ratio below which the covariance is rank-deficient

BACKGROUND_RGB = (0, 0, 0)


class DegenerateGeometryError(GeometryError):
    """Covariance is rank-deficient (collinear/coplanar points)."""


class AxisPolicy(str, Enum):
    PCA_LARGEST_FACE = "pca_largest_face"
    FIXED_Z = "fixed_z"


class FillPolicy(str, Enum):
    NONE = "none"
    NEAREST_NEIGHBOR = "nearest_neighbor"


@dataclass(frozen=True)
class ProjectionConfig:
    image_size: int = 224
    margin: float = 0.05
    axis_policy: AxisPolicy = AxisPolicy.PCA_LARGEST_FACE
    fill_policy: FillPolicy = FillPolicy.NONE

    def __post_init__(self):
        if self.image_size < 16:
            raise ValidationError("image_size must be at least 16")
        if not 0.0 <= self.margin <= 0.5:
            raise ValidationError("margin must lie in [0, 0.5]")
        object.__setattr__(self, "axis_policy", AxisPolicy(self.axis_policy))
        object.__setattr__(self, "fill_policy", FillPolicy(self.fill_policy))

    def to_json_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "margin": self.margin,
            "axis_policy": self.axis_policy.value,
            "fill_policy": self.fill_policy.value,
        }


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Object reference frame: columns of ``rotation`` are the target axes."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (points - self.translation) @ self.rotation


@dataclass(frozen=True)
class ProjectionMeta:
    category_label: str
    instance_id: str
    view_index: int
    axis: int
    extents: tuple[float, float, float]
    axis_policy: AxisPolicy
    used_fallback: bool = False


@dataclass(frozen=True, eq=False)
class ProjectedPair:
    """Orthographic RGB image plus normalized inverse-depth image."""

    rgb: np.ndarray  # (S, S, 3) uint8
    depth: np.ndarray  # (S, S) uint8
    meta: ProjectionMeta

    def __post_init__(self):
        if self.rgb.shape[:2] != self.depth.shape:
            raise ValidationError("rgb and depth sizes disagree")
        self.rgb.setflags(write=False)
        self.depth.setflags(write=False)

    @property
    def foreground(self) -> np.ndarray:
        return self.depth > 0


def canonical_frame(view: PointCloudView) -> RigidTransform:
    """PCA frame: origin at the centroid, axes by descending variance, signs
    fixed so each axis has non-negative skew (deterministic disambiguation).
    """
    if view.point_count < MIN_PIPELINE_POINTS:
        raise ValidationError(
            f"canonical frame needs at least {MIN_PIPELINE_POINTS} points, "
            f"got {view.point_count}"
        )
    centroid = view.xyz.mean(axis=0)
    centered = view.xyz - centroid
    cov = centered.T @ centered / view.point_count
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    eigvals = eigvals[::-1]
    axes = eigvecs[:, ::-1].copy()
    if eigvals[0] <= 0.0 or eigvals[2] < _RANK_RTOL * eigvals[0]:
        raise DegenerateGeometryError(
            "points are collinear or coplanar within tolerance"
        )
    for col in range(3):
        axis = axes[:, col]
        skew = float(((centered @ axis) ** 3).sum())
        if skew < 0.0:
            axes[:, col] = -axis
        elif skew == 0.0 and axis[np.argmax(np.abs(axis))] < 0.0:
            axes[:, col] = -axis
    axes.setflags(write=False)
    centroid.setflags(write=False)
    return RigidTransform(rotation=axes, translation=centroid)


def fixed_z_frame(view: PointCloudView) -> RigidTransform:
    rotation = np.eye(3)
    rotation.setflags(write=False)
    centroid = view.xyz.mean(axis=0)
    centroid.setflags(write=False)
    return RigidTransform(rotation=rotation, translation=centroid)


def resolve_frame(
    view: PointCloudView, config: ProjectionConfig
) -> tuple[RigidTransform, bool]:
    """Frame per the configured policy; PCA falls back to fixed_z on
    degenerate geometry. Returns (frame, used_fallback)."""
    if config.axis_policy is AxisPolicy.FIXED_Z:
        return fixed_z_frame(view), False
    try:
        return canonical_frame(view), False
    except DegenerateGeometryError:
        return fixed_z_frame(view), True


def _frame_for(view, config, frame):
    if frame is not None:
        return frame
    if config.axis_policy is AxisPolicy.FIXED_Z:
        return fixed_z_frame(view)
    return canonical_frame(view)


def project(
    view: PointCloudView,
    axis: int,
    config: ProjectionConfig | None = None,
    *,
    frame: RigidTransform | None = None,
    used_fallback: bool = False,
) -> ProjectedPair:
    """Render the RGB/depth pair seen along one canonical axis."""
    config = config or ProjectionConfig()
    if axis not in (0, 1, 2):
        raise ValidationError("axis must be 0, 1, or 2")
    frame = _frame_for(view, config, frame)
    coords = frame.apply(view.xyz)
    size = config.image_size

    planar = [a for a in range(3) if a != axis]
    u = coords[:, planar[0]]
    v = coords[:, planar[1]]
    w = coords[:, axis]

    umin, umax = u.min(), u.max()
    vmin, vmax = v.min(), v.max()
    side = max(umax - umin, vmax - vmin) * (1.0 + 2.0 * config.margin)
    if side > 0.0:
        u0 = (umin + umax) / 2.0 - side / 2.0
        v0 = (vmin + vmax) / 2.0 - side / 2.0
        col = np.floor((u - u0) / side * size).astype(np.int64)
        row = np.floor((v - v0) / side * size).astype(np.int64)
        np.clip(col, 0, size - 1, out=col)
        np.clip(row, 0, size - 1, out=row)
    else:
        col = np.full(view.point_count, size // 2, dtype=np.int64)
        row = np.full(view.point_count, size // 2, dtype=np.int64)

    wmin, wmax = w.min(), w.max()
    depth_val = np.rint(
        255.0 * (1.0 - (wmax - w) / (wmax - wmin + DEPTH_EPSILON))
    ).astype(np.int64)
    np.clip(depth_val, 1, 255, out=depth_val)

    # Nearest point (largest w) wins each pixel; ties go to the lowest index.
    pix = row * size + col
    order = np.lexsort((np.arange(view.point_count), -w, pix))
    sorted_pix = pix[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_pix[1:] != sorted_pix[:-1]
    winners = order[first]

    rgb = np.zeros((size, size, 3), dtype=np.uint8)
    rgb[:, :] = BACKGROUND_RGB
    depth = np.zeros((size, size), dtype=np.uint8)
    rgb[row[winners], col[winners]] = view.colors[winners]
    depth[row[winners], col[winners]] = depth_val[winners].astype(np.uint8)

    if config.fill_policy is FillPolicy.NEAREST_NEIGHBOR:
        rgb, depth = _fill_holes(rgb, depth)

    extents = coords.max(axis=0) - coords.min(axis=0)
    meta = ProjectionMeta(
        category_label=view.category_label,
        instance_id=view.instance_id,
        view_index=view.view_index,
        axis=axis,
        extents=tuple(float(e) for e in extents),
        axis_policy=config.axis_policy,
        used_fallback=used_fallback,
    )
    return ProjectedPair(rgb=rgb, depth=depth, meta=meta)


def _fill_holes(rgb, depth):
    """Assign background pixels inside the foreground convex hull the values
    of their nearest foreground pixel."""
    from scipy.spatial import Delaunay, QhullError, cKDTree

    fg_coords = np.argwhere(depth > 0)
    if len(fg_coords) < 3:
        return rgb, depth
    try:
        hull = Delaunay(fg_coords.astype(np.float64))
    except QhullError:
        return rgb, depth  # collinear foreground encloses nothing
    size = depth.shape[0]
    grid = np.indices((size, size)).reshape(2, -1).T
    inside = hull.find_simplex(grid.astype(np.float64)) >= 0
    holes = grid[inside & (depth.reshape(-1) == 0)]
    if len(holes) == 0:
        return rgb, depth
    _, nearest = cKDTree(fg_coords).query(holes)
    src = fg_coords[nearest]
    rgb = rgb.copy()
    depth = depth.copy()
    rgb[holes[:, 0], holes[:, 1]] = rgb[src[:, 0], src[:, 1]]
    depth[holes[:, 0], holes[:, 1]] = depth[src[:, 0], src[:, 1]]
    return rgb, depth


def project_all(
    view: PointCloudView, config: ProjectionConfig | None = None
) -> list[ProjectedPair]:
    """One pair per canonical axis, in axis order 0, 1, 2."""
    config = config or ProjectionConfig()
    frame = _frame_for(view, config, None)
    return [project(view, axis, config, frame=frame) for axis in (0, 1, 2)]


# Projection along the smallest-variance axis shows the largest face; the
# pipeline feeds exactly this single pair per view to the encoders.
LARGEST_FACE_AXIS = 2


def project_largest_face(
    view: PointCloudView, config: ProjectionConfig | None = None
) -> ProjectedPair:
    config = config or ProjectionConfig()
    frame, used_fallback = resolve_frame(view, config)
    return project(
        view, LARGEST_FACE_AXIS, config, frame=frame, used_fallback=used_fallback
    )


def pair_filenames(meta: ProjectionMeta) -> tuple[str, str]:
    base = f"{meta.instance_id}_{meta.view_index}_{meta.axis}"
    return f"{base}_rgb.png", f"{base}_depth.png"


def save_pair(pair: ProjectedPair, out_dir) -> tuple[Path, Path]:
    """Write the pair as 8-bit PNGs (RGB and grayscale)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rgb_name, depth_name = pair_filenames(pair.meta)
    rgb_path = out_dir / rgb_name
    depth_path = out_dir / depth_name
    Image.fromarray(pair.rgb, mode="RGB").save(rgb_path, format="PNG")
    Image.fromarray(pair.depth, mode="L").save(depth_path, format="PNG")
    return rgb_path, depth_path
