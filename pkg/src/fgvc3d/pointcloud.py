"""Point-cloud views, ASCII PLY IO, dataset manifests, and synthetic fixtures.

The canonical on-disk cloud format is a strict ASCII PLY subset: float x/y/z
plus uchar red/green/blue, one record per line. Object identity (category,
instance, view index) never lives inside cloud files; it comes from the
dataset directory layout ``<category>/<instance>/<view>.ply`` captured in a
JSON manifest.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ValidationError

# Views smaller than this produce meaningless projections and are rejected at
# pipeline admission (loading them for inspection is still allowed).
MIN_PIPELINE_POINTS = 10

CLOUD_SUFFIX = ".ply"


class PlyError(DataFormatError):
    """Ill-formed PLY input; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PlyHeaderError(PlyError):
    pass


class PlyRecordError(PlyError):
    pass


class NonFiniteCoordinateError(PlyRecordError):
    pass


class EmptyCloudError(PlyError):
    pass


class ManifestError(DataFormatError):
    pass


class EmptyDatasetError(ManifestError):
    pass


class DuplicateViewError(ManifestError):
    pass


@dataclass(frozen=True, eq=False)
class PointCloudView:
    """One segmented partial view of an object: colored points plus identity.

    ``xyz`` is an (N, 3) float64 array in meters, ``colors`` an (N, 3) uint8
    array. Both are frozen after construction and safe to share across
    workers.
    """

    xyz: np.ndarray
    colors: np.ndarray
    category_label: str = ""
    instance_id: str = ""
    view_index: int = 0

    def __post_init__(self):
        xyz = np.ascontiguousarray(np.asarray(self.xyz, dtype=np.float64))
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValidationError(f"xyz must be (N, 3), got {xyz.shape}")
        if xyz.shape[0] == 0:
            raise EmptyCloudError("view has no points")
        if not np.isfinite(xyz).all():
            raise ValidationError("coordinates must be finite")
        colors = np.asarray(self.colors)
        if colors.shape != xyz.shape:
            raise ValidationError(
                f"colors must match xyz shape {xyz.shape}, got {colors.shape}"
            )
        if colors.dtype != np.uint8:
            as_int = np.asarray(colors, dtype=np.int64)
            if not np.array_equal(as_int, np.asarray(colors)):
                raise ValidationError("color channels must be integral")
            if (as_int < 0).any() or (as_int > 255).any():
                raise ValidationError("color channels must lie in [0, 255]")
            colors = as_int.astype(np.uint8)
        colors = np.ascontiguousarray(colors)
        if int(self.view_index) < 0:
            raise ValidationError("view_index must be non-negative")
        xyz.setflags(write=False)
        colors.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "view_index", int(self.view_index))

    @property
    def point_count(self) -> int:
        return self.xyz.shape[0]

    @property
    def row_id(self) -> tuple[str, int]:
        return (self.instance_id, self.view_index)

    def __eq__(self, other):
        if not isinstance(other, PointCloudView):
            return NotImplemented
        return (
            np.array_equal(self.xyz, other.xyz)
            and np.array_equal(self.colors, other.colors)
            and self.category_label == other.category_label
            and self.instance_id == other.instance_id
            and self.view_index == other.view_index
        )


def require_pipeline_admissible(view: PointCloudView) -> None:
    """Reject views too small to project meaningfully."""
    if view.point_count < MIN_PIPELINE_POINTS:
        raise ValidationError(
            f"view {view.instance_id!r}/{view.view_index} has "
            f"{view.point_count} points; pipeline requires at least "
            f"{MIN_PIPELINE_POINTS}"
        )


# --------------------------------------------------------------------------
# ASCII PLY subset
# --------------------------------------------------------------------------

_PROPERTY_LINES = (
    "property float x",
    "property float y",
    "property float z",
    "property uchar red",
    "property uchar green",
    "property uchar blue",
)


def load_view(
    path,
    *,
    category_label: str = "",
    instance_id: str | None = None,
    view_index: int = 0,
) -> PointCloudView:
    """Parse one cloud file. Identity labels come from the caller (manifest),
    never from the file itself."""
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()

    lineno = 0

    def next_line():
        nonlocal lineno
        while lineno < len(lines):
            lineno += 1
            text = lines[lineno - 1].strip()
            if text.startswith("comment"):
                continue
            return text
        return None

    if next_line() != "ply":
        raise PlyHeaderError("expected 'ply' magic", line=1)
    if next_line() != "format ascii 1.0":
        raise PlyHeaderError("expected 'format ascii 1.0'", line=lineno)
    element = next_line()
    if element is None or not element.startswith("element vertex "):
        raise PlyHeaderError("expected 'element vertex N'", line=lineno)
    try:
        declared = int(element.split()[2])
    except (IndexError, ValueError):
        raise PlyHeaderError("unparseable vertex count", line=lineno) from None
    for expected in _PROPERTY_LINES:
        got = next_line()
        if got != expected:
            raise PlyHeaderError(f"expected {expected!r}, got {got!r}", line=lineno)
    if next_line() != "end_header":
        raise PlyHeaderError("expected 'end_header'", line=lineno)
    if declared == 0:
        raise EmptyCloudError("file declares zero vertices", line=lineno)

    xyz = np.empty((declared, 3), dtype=np.float64)
    colors = np.empty((declared, 3), dtype=np.uint8)
    for i in range(declared):
        record = next_line()
        if record is None or record == "":
            raise PlyRecordError(
                f"expected {declared} records, file ends after {i}", line=lineno
            )
        tokens = record.split()
        if len(tokens) != 6:
            raise PlyRecordError(
                f"expected 6 fields per record, got {len(tokens)}", line=lineno
            )
        try:
            x, y, z = float(tokens[0]), float(tokens[1]), float(tokens[2])
        except ValueError:
            raise PlyRecordError("unparseable coordinate", line=lineno) from None
        if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
            raise NonFiniteCoordinateError("non-finite coordinate", line=lineno)
        try:
            rgb = [int(tokens[j]) for j in (3, 4, 5)]
        except ValueError:
            raise PlyRecordError("unparseable color channel", line=lineno) from None
        if any(c < 0 or c > 255 for c in rgb):
            raise PlyRecordError("color channel outside [0, 255]", line=lineno)
        xyz[i] = (x, y, z)
        colors[i] = rgb
    trailing = next_line()
    if trailing not in (None, ""):
        raise PlyRecordError("more records than declared in header", line=lineno)

    return PointCloudView(
        xyz=xyz,
        colors=colors,
        category_label=category_label,
        instance_id=instance_id if instance_id is not None else path.stem,
        view_index=view_index,
    )


def write_view(view: PointCloudView, path) -> Path:
    """Write the ASCII PLY subset. Floats use shortest round-trip formatting
    so a write/load cycle reproduces coordinates exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = [
        "ply",
        "format ascii 1.0",
        f"element vertex {view.point_count}",
        *_PROPERTY_LINES,
        "end_header",
    ]
    for (x, y, z), (r, g, b) in zip(view.xyz, view.colors):
        out.append(f"{x!r} {y!r} {z!r} {r} {g} {b}")
    path.write_text("\n".join(out) + "\n", encoding="ascii")
    return path


# --------------------------------------------------------------------------
# Dataset manifests
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    category: str
    instance: str
    view: int


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """Identity map for a dataset: who each cloud file is.

    Entry paths are interpreted relative to the directory containing the
    manifest file (or the dataset root while in memory).
    """

    name: str
    entries: tuple[ManifestEntry, ...]
    _label_of: dict = field(init=False, repr=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise EmptyDatasetError("manifest has no entries")
        label_of = {}
        for e in entries:
            key = (e.instance, e.view)
            if e.view < 0:
                raise ManifestError(f"negative view index for {key}")
            if key in label_of:
                raise DuplicateViewError(f"duplicate (instance, view) pair {key}")
            label_of[key] = e.category
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_label_of", label_of)

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(sorted({e.category for e in self.entries}))

    @property
    def category_count(self) -> int:
        return len(self.categories)

    @property
    def view_count(self) -> int:
        return len(self.entries)

    @property
    def row_ids(self) -> tuple[tuple[str, int], ...]:
        return tuple((e.instance, e.view) for e in self.entries)

    def label_for(self, instance: str, view: int) -> str:
        try:
            return self._label_of[(instance, view)]
        except KeyError:
            raise ValidationError(
                f"manifest {self.name!r} has no entry for ({instance!r}, {view})"
            ) from None

    def __eq__(self, other):
        if not isinstance(other, DatasetManifest):
            return NotImplemented
        return self.name == other.name and self.entries == other.entries

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "categories": list(self.categories),
            "entries": [
                {
                    "path": e.path,
                    "category": e.category,
                    "instance": e.instance,
                    "view": e.view,
                }
                for e in self.entries
            ],
        }


def save_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(manifest.to_json_dict(), indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")
    return path


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    try:
        entries = tuple(
            ManifestEntry(
                path=e["path"],
                category=e["category"],
                instance=e["instance"],
                view=int(e["view"]),
            )
            for e in raw["entries"]
        )
        manifest = DatasetManifest(name=raw["name"], entries=entries)
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: missing manifest field ({exc})") from exc
    declared = raw.get("categories")
    if declared is not None and sorted(declared) != list(manifest.categories):
        raise ManifestError(f"{path}: category list disagrees with entries")
    return manifest


_TRAILING_DIGITS = re.compile(r"(\d+)$")


def _view_index_from_stem(stem: str) -> int:
    match = _TRAILING_DIGITS.search(stem)
    if match is None:
        raise ManifestError(f"cannot derive a view index from filename {stem!r}")
    return int(match.group(1))


def build_manifest(root_dir, name: str | None = None) -> DatasetManifest:
    """Scan a ``<category>/<instance>/<view>.ply`` tree.

    Entries are sorted by (category, instance, view) so the manifest is
    byte-identical across runs; paths are stored relative to ``root_dir``.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise ManifestError(f"not a directory: {root}")
    entries = []
    for cat_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for inst_dir in sorted(p for p in cat_dir.iterdir() if p.is_dir()):
            for cloud in sorted(inst_dir.glob(f"*{CLOUD_SUFFIX}")):
                entries.append(
                    ManifestEntry(
                        path=cloud.relative_to(root).as_posix(),
                        category=cat_dir.name,
                        instance=inst_dir.name,
                        view=_view_index_from_stem(cloud.stem),
                    )
                )
    if not entries:
        raise EmptyDatasetError(f"no {CLOUD_SUFFIX} files under {root}")
    entries.sort(key=lambda e: (e.category, e.instance, e.view))
    return DatasetManifest(name=name or root.name, entries=tuple(entries))


def load_manifest_view(manifest: DatasetManifest, base_dir, entry: ManifestEntry) -> PointCloudView:
    """Load one manifest entry with its identity attached."""
    return load_view(
        Path(base_dir) / entry.path,
        category_label=entry.category,
        instance_id=entry.instance,
        view_index=entry.view,
    )


# --------------------------------------------------------------------------
# Synthetic fixtures (test substitute for simulator captures)
# --------------------------------------------------------------------------

FIXTURE_SHAPES = ("box", "cylinder", "sphere")

_BOX_EXTENTS = (0.30, 0.20, 0.10)  # distinct so PCA axes are unambiguous
_CYLINDER_RADIUS = 0.06
_CYLINDER_HEIGHT = 0.25
_SPHERE_RADIUS = 0.10


def generate_fixture(
    shape: str,
    point_count: int,
    color=(200, 40, 40),
    seed: int = 0,
    *,
    scale: float = 1.0,
    category_label: str = "",
    instance_id: str = "fixture",
    view_index: int = 0,
) -> PointCloudView:
    """Sample ``point_count`` points uniformly on the surface of a primitive.

    Deterministic for a fixed seed: identical arguments produce bit-identical
    views.
    """
    if shape not in FIXTURE_SHAPES:
        raise ValidationError(f"unknown fixture shape {shape!r}")
    if point_count < 1:
        raise ValidationError("point_count must be at least 1")
    rng = np.random.default_rng(seed)
    if shape == "box":
        xyz = _sample_box(rng, point_count, tuple(s * scale for s in _BOX_EXTENTS))
    elif shape == "cylinder":
        xyz = _sample_cylinder(
            rng, point_count, _CYLINDER_RADIUS * scale, _CYLINDER_HEIGHT * scale
        )
    else:
        xyz = _sample_sphere(rng, point_count, _SPHERE_RADIUS * scale)
    colors = np.tile(np.asarray(color, dtype=np.uint8), (point_count, 1))
    return PointCloudView(
        xyz=xyz,
        colors=colors,
        category_label=category_label,
        instance_id=instance_id,
        view_index=view_index,
    )


def fixture_dimensions(shape: str, scale: float = 1.0) -> tuple[float, float, float]:
    """Axis-aligned bounding-box extents of a fixture primitive."""
    if shape == "box":
        return tuple(s * scale for s in _BOX_EXTENTS)
    if shape == "cylinder":
        return (
            2 * _CYLINDER_RADIUS * scale,
            2 * _CYLINDER_RADIUS * scale,
            _CYLINDER_HEIGHT * scale,
        )
    if shape == "sphere":
        d = 2 * _SPHERE_RADIUS * scale
        return (d, d, d)
    raise ValidationError(f"unknown fixture shape {shape!r}")


def _sample_box(rng, n, extents):
    hx, hy, hz = (e / 2.0 for e in extents)
    areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
    faces = rng.choice(6, size=n, p=areas / areas.sum())
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    xyz = np.empty((n, 3))
    for face in range(6):
        mask = faces == face
        axis = face // 2
        sign = 1.0 if face % 2 == 0 else -1.0
        half = (hx, hy, hz)[axis]
        others = [a for a in range(3) if a != axis]
        other_half = [(hx, hy, hz)[a] for a in others]
        xyz[mask, axis] = sign * half
        xyz[mask, others[0]] = uv[mask, 0] * other_half[0]
        xyz[mask, others[1]] = uv[mask, 1] * other_half[1]
    return xyz


def _sample_cylinder(rng, n, radius, height):
    lateral = 2 * np.pi * radius * height
    cap = np.pi * radius**2
    areas = np.array([lateral, cap, cap])
    region = rng.choice(3, size=n, p=areas / areas.sum())
    u = rng.uniform(0.0, 1.0, size=(n, 2))
    xyz = np.empty((n, 3))
    side = region == 0
    theta = 2 * np.pi * u[:, 0]
    xyz[side, 0] = radius * np.cos(theta[side])
    xyz[side, 1] = radius * np.sin(theta[side])
    xyz[side, 2] = (u[side, 1] - 0.5) * height
    for which, sign in ((1, 1.0), (2, -1.0)):
        mask = region == which
        r = radius * np.sqrt(u[mask, 0])
        xyz[mask, 0] = r * np.cos(2 * np.pi * u[mask, 1])
        xyz[mask, 1] = r * np.sin(2 * np.pi * u[mask, 1])
        xyz[mask, 2] = sign * height / 2.0
    return xyz


def _sample_sphere(rng, n, radius):
    raw = rng.standard_normal((n, 3))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return radius * raw / norms
