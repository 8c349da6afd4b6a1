"""Synthetic satellite-like image time series: generation, filtering, patching, storage.

Scenes are built from a static per-region base field plus a 12-month seasonal
sinusoid, per-pixel Gaussian noise, optional bright cloud blobs (with ground
truth masks), and an optional persistent change event (step or ramp).
Images are dense (H, W, 3) float arrays with channels in [0, 1]; series are
stored on disk as binary P6 pixmaps plus a JSON manifest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

MANIFEST_FORMAT = 1
MANIFEST_NAME = "manifest.json"
CLOUD_DIR = "clouds"

# Internal shape constants for generated clouds (axis-aligned ellipses).
_CLOUD_RADIUS_FRAC = (0.10, 0.45)
_CLOUD_BRIGHTNESS = 0.65


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle, top-left origin."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"rect must have positive size, got {self}")
        if self.top < 0 or self.left < 0:
            raise ValueError(f"rect origin must be non-negative, got {self}")

    @property
    def bottom(self) -> int:
        return self.top + self.height

    @property
    def right(self) -> int:
        return self.left + self.width

    def slices(self) -> tuple[slice, slice]:
        return slice(self.top, self.bottom), slice(self.left, self.right)

    def fits_within(self, height: int, width: int) -> bool:
        return self.bottom <= height and self.right <= width

    def intersects(self, other: "Rect") -> bool:
        return (
            self.top < other.bottom
            and other.top < self.bottom
            and self.left < other.right
            and other.left < self.right
        )


@dataclass(frozen=True)
class ChangeEvent:
    """A persistent change: a per-channel color shift applied to a region from onset on."""

    kind: str  # "step" or "ramp"
    onset_month: int
    region: Rect
    delta: tuple[float, float, float]
    ramp_duration: int = 0  # months to reach full delta; 0 behaves as a step

    def __post_init__(self):
        if self.kind not in ("step", "ramp"):
            raise ValueError(f"unknown change kind {self.kind!r}")
        if self.ramp_duration < 0:
            raise ValueError("ramp_duration must be >= 0")

    def contribution(self, month: int) -> float:
        """Fraction of delta visible at the given month (0 before onset, 1 when complete)."""
        if month < self.onset_month:
            return 0.0
        if self.kind == "step" or self.ramp_duration == 0:
            return 1.0
        return min(1.0, (month - self.onset_month) / self.ramp_duration)

    def to_json(self) -> dict:
        d = asdict(self)
        d["delta"] = list(self.delta)
        return d

    @staticmethod
    def from_json(d: dict) -> "ChangeEvent":
        return ChangeEvent(
            kind=d["kind"],
            onset_month=int(d["onset_month"]),
            region=Rect(**{k: int(v) for k, v in d["region"].items()}),
            delta=tuple(float(x) for x in d["delta"]),
            ramp_duration=int(d.get("ramp_duration", 0)),
        )


@dataclass(frozen=True)
class SceneSpec:
    """Full deterministic description of one synthetic series (seed included)."""

    height: int = 64
    width: int = 64
    n_images: int = 32
    span_months: int = 96  # series always covers months [0, span_months - 1]
    base_regions: int = 4
    seasonal_amplitude: float = 0.1
    seasonal_phase: float = 0.0
    noise_sigma: float = 0.02
    cloud_probability: float = 0.0
    change: ChangeEvent | None = None
    seed: int = 0

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError("image dimensions must be positive")
        if self.n_images < 2:
            raise ValueError("need at least 2 images per series")
        if self.span_months < 2 * (self.n_images - 1) + 1:
            raise ValueError(
                f"span of {self.span_months} months cannot hold {self.n_images} images "
                f"at a minimum 2-month cadence"
            )
        if self.seasonal_amplitude < 0 or self.noise_sigma < 0:
            raise ValueError("seasonal_amplitude and noise_sigma must be >= 0")
        if not 0.0 <= self.cloud_probability <= 1.0:
            raise ValueError("cloud_probability must lie in [0, 1]")
        if self.change is not None:
            if not self.change.region.fits_within(self.height, self.width):
                raise ValueError(
                    f"change region {self.change.region} exceeds {self.height}x{self.width} image"
                )
            if not 0 < self.change.onset_month < self.span_months - 1:
                raise ValueError(
                    f"change onset month {self.change.onset_month} must lie strictly inside "
                    f"(0, {self.span_months - 1})"
                )


@dataclass
class TimeSeries:
    """Ordered RGB image sequence with integer month timestamps.

    images: (n, H, W, 3) floats in [0, 1]; cloud_masks: optional (n, H, W) bools,
    the simulator's ground truth cloud cover.
    """

    id: str
    images: np.ndarray
    timestamps: np.ndarray
    cloud_masks: np.ndarray | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[3] != 3:
            raise ValueError(f"images must be (n, H, W, 3), got {self.images.shape}")
        if self.timestamps.shape != (self.images.shape[0],):
            raise ValueError("timestamps length must match image count")
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) < 2):
            raise ValueError("timestamps must be strictly increasing with gaps >= 2 months")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("channel values must lie in [0, 1]")
        if self.cloud_masks is not None:
            self.cloud_masks = np.asarray(self.cloud_masks, dtype=bool)
            if self.cloud_masks.shape != self.images.shape[:3]:
                raise ValueError("cloud_masks must be (n, H, W) matching images")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]


@dataclass
class SeriesEntry:
    """One manifest row: where a series lives plus optional ground truth."""

    id: str
    directory: str
    n: int
    timestamps: list[int]
    changed: bool | None = None
    event: dict | None = None

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(d: dict) -> "SeriesEntry":
        return SeriesEntry(
            id=d["id"],
            directory=d["directory"],
            n=int(d["n"]),
            timestamps=[int(t) for t in d["timestamps"]],
            changed=d.get("changed"),
            event=d.get("event"),
        )


@dataclass
class DatasetManifest:
    entries: list[SeriesEntry] = field(default_factory=list)
    format: int = MANIFEST_FORMAT

    def by_id(self) -> dict[str, SeriesEntry]:
        return {e.id: e for e in self.entries}

    def to_json(self) -> dict:
        return {"format": self.format, "series": [e.to_json() for e in self.entries]}

    @staticmethod
    def from_json(d: dict) -> "DatasetManifest":
        fmt = int(d.get("format", -1))
        if fmt != MANIFEST_FORMAT:
            raise ValueError(f"unsupported manifest format {fmt}, expected {MANIFEST_FORMAT}")
        return DatasetManifest(
            entries=[SeriesEntry.from_json(e) for e in d.get("series", [])], format=fmt
        )


def series_entry(series: TimeSeries, spec: SceneSpec | None = None) -> SeriesEntry:
    """Manifest entry for a series, recording the generating event when known."""
    changed = None
    event = None
    if spec is not None:
        changed = spec.change is not None
        event = spec.change.to_json() if spec.change is not None else None
    return SeriesEntry(
        id=series.id,
        directory=series.id,
        n=len(series),
        timestamps=[int(t) for t in series.timestamps],
        changed=changed,
        event=event,
    )


def _sample_months(rng: np.random.Generator, n: int, span: int) -> np.ndarray:
    """n strictly increasing months in [0, span-1], gaps >= 2, endpoints pinned."""
    slack = span - 1 - 2 * (n - 1)
    offsets = np.zeros(n, dtype=np.int64)
    if slack > 0:
        if n > 2:
            offsets[1:-1] = np.sort(rng.integers(0, slack + 1, size=n - 2))
        offsets[-1] = slack
    return offsets + 2 * np.arange(n, dtype=np.int64)


def _base_field(rng: np.random.Generator, spec: SceneSpec) -> np.ndarray:
    """Static mean-color field: a background with a few random colored rectangles."""
    h, w = spec.height, spec.width
    base = np.empty((h, w, 3))
    base[:] = rng.uniform(0.15, 0.70, size=3)
    for _ in range(spec.base_regions):
        rh = int(rng.integers(max(2, h // 8), max(3, h // 2 + 1)))
        rw = int(rng.integers(max(2, w // 8), max(3, w // 2 + 1)))
        top = int(rng.integers(0, h - rh + 1))
        left = int(rng.integers(0, w - rw + 1))
        base[top : top + rh, left : left + rw] = rng.uniform(0.10, 0.90, size=3)
    return base


def _cloud_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Elliptical cloud blob; size varies so that some images exceed the 20% filter."""
    cy = rng.uniform(0, height)
    cx = rng.uniform(0, width)
    ry = rng.uniform(*_CLOUD_RADIUS_FRAC) * height
    rx = rng.uniform(*_CLOUD_RADIUS_FRAC) * width
    yy, xx = np.ogrid[0:height, 0:width]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def generate_scene(spec: SceneSpec, series_id: str | None = None) -> TimeSeries:
    """Render a full time series from a SceneSpec. Pure function of the spec."""
    rng = np.random.default_rng(spec.seed)
    months = _sample_months(rng, spec.n_images, spec.span_months)
    base = _base_field(rng, spec)
    h, w = spec.height, spec.width

    images = np.empty((spec.n_images, h, w, 3))
    masks = np.zeros((spec.n_images, h, w), dtype=bool)
    for j, month in enumerate(months):
        img = base + spec.seasonal_amplitude * math.sin(
            2.0 * math.pi * month / 12.0 + spec.seasonal_phase
        )
        if spec.noise_sigma > 0:
            img = img + rng.normal(0.0, spec.noise_sigma, size=(h, w, 3))
        if spec.change is not None:
            frac = spec.change.contribution(int(month))
            if frac > 0:
                ys, xs = spec.change.region.slices()
                img[ys, xs] = img[ys, xs] + frac * np.asarray(spec.change.delta)
        if rng.random() < spec.cloud_probability:
            mask = _cloud_mask(rng, h, w)
            img[mask] += _CLOUD_BRIGHTNESS
            masks[j] = mask
        images[j] = np.clip(img, 0.0, 1.0)

    if series_id is None:
        series_id = f"scene-{spec.seed:08x}"
    return TimeSeries(id=series_id, images=images, timestamps=months, cloud_masks=masks)


def cloud_fraction(series: TimeSeries, index: int) -> float:
    """Fraction of pixels covered by the recorded cloud mask of image `index`.

    Raises when the series carries no masks: absence of ground truth is never
    reported as zero cover.
    """
    if series.cloud_masks is None:
        raise ValueError(f"series {series.id!r} has no recorded cloud masks")
    mask = series.cloud_masks[index]
    return float(mask.sum()) / mask.size


def cloud_fractions(series: TimeSeries) -> np.ndarray:
    if series.cloud_masks is None:
        raise ValueError(f"series {series.id!r} has no recorded cloud masks")
    n = len(series)
    return series.cloud_masks.reshape(n, -1).mean(axis=1)


def filter_series(series: TimeSeries, max_cloud: float = 0.2, min_length: int = 2) -> TimeSeries:
    """Drop images whose ground-truth cloud cover exceeds max_cloud.

    Timestamps and masks are filtered in lockstep; order preserved. Rejects the
    result when fewer than min_length images survive.
    """
    if not 0.0 <= max_cloud <= 1.0:
        raise ValueError("max_cloud must lie in [0, 1]")
    keep = cloud_fractions(series) <= max_cloud
    kept = int(keep.sum())
    if kept < min_length:
        raise ValueError(
            f"series {series.id!r}: only {kept} of {len(series)} images at "
            f"cloud cover <= {max_cloud}, need at least {min_length}"
        )
    return TimeSeries(
        id=series.id,
        images=series.images[keep],
        timestamps=series.timestamps[keep],
        cloud_masks=series.cloud_masks[keep],
    )


def patch_id(parent_id: str, row: int, col: int) -> str:
    return f"{parent_id}__p{row}_{col}"


def split_patches(series: TimeSeries, patch_edge: int) -> list[TimeSeries]:
    """Crop every image at a (H/edge) x (W/edge) grid; returns row-major patch series."""
    h, w = series.height, series.width
    if h % patch_edge or w % patch_edge:
        raise ValueError(f"dimensions {h}x{w} not divisible by patch edge {patch_edge}")
    patches = []
    for r in range(h // patch_edge):
        for c in range(w // patch_edge):
            ys = slice(r * patch_edge, (r + 1) * patch_edge)
            xs = slice(c * patch_edge, (c + 1) * patch_edge)
            patches.append(
                TimeSeries(
                    id=patch_id(series.id, r, c),
                    images=series.images[:, ys, xs].copy(),
                    timestamps=series.timestamps.copy(),
                    cloud_masks=None
                    if series.cloud_masks is None
                    else series.cloud_masks[:, ys, xs].copy(),
                )
            )
    return patches


def benchmark_specs(
    num_series: int,
    changed_fraction: float,
    seed: int,
    height: int = 64,
    width: int = 64,
    n_images: int = 32,
    span_months: int = 96,
    noise_sigma: float = 0.02,
    seasonal_amplitude: tuple[float, float] = (0.05, 0.15),
    cloud_probability: float = 0.15,
    ramp_fraction: float = 0.2,
) -> list[SceneSpec]:
    """Randomized scene specs for a benchmark dataset.

    Each series draws its own seasonal cycle; a Bernoulli(changed_fraction)
    coin decides whether it carries a persistent change event (step, or ramp
    with probability ramp_fraction among changed). Seasonal amplitudes default
    to at least the noise level so seasonality is the dominant confounder.
    """
    rng = np.random.default_rng(seed)
    onset_margin = max(1, min(12, span_months // 4))
    specs = []
    for _ in range(num_series):
        change = None
        if rng.random() < changed_fraction:
            onset = int(rng.integers(onset_margin, span_months - onset_margin))
            rh = int(rng.integers(max(4, height // 5), max(5, 2 * height // 3)))
            rw = int(rng.integers(max(4, width // 5), max(5, 2 * width // 3)))
            region = Rect(
                top=int(rng.integers(0, height - rh + 1)),
                left=int(rng.integers(0, width - rw + 1)),
                height=rh,
                width=rw,
            )
            magnitude = rng.uniform(0.15, 0.45, size=3)
            sign = rng.choice([-1.0, 1.0], size=3)
            kind = "ramp" if rng.random() < ramp_fraction else "step"
            change = ChangeEvent(
                kind=kind,
                onset_month=onset,
                region=region,
                delta=tuple(sign * magnitude),
                ramp_duration=int(rng.integers(4, 13)) if kind == "ramp" else 0,
            )
        specs.append(
            SceneSpec(
                height=height,
                width=width,
                n_images=n_images,
                span_months=span_months,
                seasonal_amplitude=float(rng.uniform(*seasonal_amplitude)),
                seasonal_phase=float(rng.uniform(0.0, 2.0 * math.pi)),
                noise_sigma=noise_sigma,
                cloud_probability=cloud_probability,
                change=change,
                seed=int(rng.integers(0, 2**63 - 1)),
            )
        )
    return specs


def generate_dataset(
    specs: list[SceneSpec], id_prefix: str = "series"
) -> tuple[list[TimeSeries], DatasetManifest]:
    """Render every spec and assemble the matching manifest."""
    series_list = []
    manifest = DatasetManifest()
    for i, spec in enumerate(specs):
        series = generate_scene(spec, series_id=f"{id_prefix}-{i:04d}")
        series_list.append(series)
        manifest.entries.append(series_entry(series, spec))
    return series_list, manifest


def manifest_labels(manifest: DatasetManifest) -> dict[str, int]:
    """Ground-truth binary labels for entries that record a changed flag."""
    labels = {}
    for entry in manifest.entries:
        if entry.changed is not None:
            labels[entry.id] = int(entry.changed)
    return labels


def manifest_events(manifest: DatasetManifest) -> dict[str, ChangeEvent | None]:
    return {
        e.id: (ChangeEvent.from_json(e.event) if e.event is not None else None)
        for e in manifest.entries
    }


# --- P6 / P4 portable pixmap I/O ------------------------------------------------


def write_ppm(path: Path, image: np.ndarray) -> None:
    """8-bit binary P6; byte = round(channel * 255)."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    h, w = img.shape[:2]
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def _read_pnm_tokens(f, count: int, path: Path) -> list[int]:
    """Read `count` whitespace-separated integer header tokens, honoring # comments."""
    tokens: list[int] = []
    current = b""
    in_comment = False
    while len(tokens) < count:
        ch = f.read(1)
        if not ch:
            raise ValueError(f"{path}: truncated pixmap header")
        if in_comment:
            if ch in b"\r\n":
                in_comment = False
            continue
        if ch == b"#":
            in_comment = True
            continue
        if ch.isspace():
            if current:
                tokens.append(int(current))
                current = b""
            continue
        if not ch.isdigit():
            raise ValueError(f"{path}: malformed pixmap header token {ch!r}")
        current += ch
    return tokens


def read_ppm(path: Path) -> np.ndarray:
    """Load a binary P6 pixmap as (H, W, 3) floats, channel = byte / 255."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P6":
            raise ValueError(f"{path}: not a binary P6 pixmap (magic {magic!r})")
        w, h, maxval = _read_pnm_tokens(f, 3, path)
        if maxval != 255:
            raise ValueError(f"{path}: unsupported maxval {maxval}, expected 255")
        raw = f.read(h * w * 3)
        if len(raw) != h * w * 3:
            raise ValueError(f"{path}: expected {h * w * 3} pixel bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).astype(np.float64) / 255.0


def write_pbm(path: Path, mask: np.ndarray) -> None:
    """Binary P4 bitmap; 1 bits mark cloud pixels."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    packed = np.packbits(mask, axis=1)
    with open(path, "wb") as f:
        f.write(f"P4\n{w} {h}\n".encode("ascii"))
        f.write(packed.tobytes())


def read_pbm(path: Path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P4":
            raise ValueError(f"{path}: not a binary P4 bitmap (magic {magic!r})")
        w, h = _read_pnm_tokens(f, 2, path)
        row_bytes = (w + 7) // 8
        raw = f.read(h * row_bytes)
        if len(raw) != h * row_bytes:
            raise ValueError(f"{path}: truncated bitmap data")
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(h, row_bytes)
    return np.unpackbits(rows, axis=1)[:, :w].astype(bool)


# --- Dataset persistence ---------------------------------------------------------


def save_dataset(series_list: list[TimeSeries], manifest: DatasetManifest, directory: Path) -> None:
    """Write `<dir>/manifest.json` plus one subdirectory of pixmaps per series."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_id = manifest.by_id()
    for series in series_list:
        entry = by_id.get(series.id)
        if entry is None:
            raise ValueError(f"series {series.id!r} missing from manifest")
        if entry.n != len(series):
            raise ValueError(f"manifest lists n={entry.n} for {series.id!r}, series has {len(series)}")
        sdir = directory / entry.directory
        sdir.mkdir(parents=True, exist_ok=True)
        for j in range(len(series)):
            write_ppm(sdir / f"{j:04d}.ppm", series.images[j])
        if series.cloud_masks is not None:
            cdir = sdir / CLOUD_DIR
            cdir.mkdir(exist_ok=True)
            for j in range(len(series)):
                write_pbm(cdir / f"{j:04d}.pbm", series.cloud_masks[j])
    with open(directory / MANIFEST_NAME, "w") as f:
        json.dump(manifest.to_json(), f, indent=1)


def load_manifest(directory: Path) -> DatasetManifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} under {directory}")
    with open(path) as f:
        return DatasetManifest.from_json(json.load(f))


def load_dataset(directory: Path) -> tuple[list[TimeSeries], DatasetManifest]:
    """Inverse of save_dataset; fails naming the offending path on any mismatch."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    series_list = []
    for entry in manifest.entries:
        sdir = directory / entry.directory
        paths = sorted(sdir.glob("*.ppm"))
        if len(paths) != entry.n:
            raise ValueError(f"{sdir}: manifest lists {entry.n} images, found {len(paths)}")
        images = np.stack([read_ppm(p) for p in paths]) if paths else np.zeros((0, 0, 0, 3))
        cdir = sdir / CLOUD_DIR
        masks = None
        if cdir.is_dir():
            mask_paths = sorted(cdir.glob("*.pbm"))
            if len(mask_paths) != entry.n:
                raise ValueError(
                    f"{cdir}: expected {entry.n} cloud masks, found {len(mask_paths)}"
                )
            masks = np.stack([read_pbm(p) for p in mask_paths])
        series_list.append(
            TimeSeries(
                id=entry.id,
                images=images,
                timestamps=np.asarray(entry.timestamps, dtype=np.int64),
                cloud_masks=masks,
            )
        )
    return series_list, manifest
