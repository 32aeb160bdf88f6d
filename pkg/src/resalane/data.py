"""Synthetic occluded-lane data, rasterization, and label file formats.

Scenes are grayscale-ish road images with 2..max_lanes lane markings
converging toward a vanishing point.  Difficulties:

    normal   fully visible markings
    crowded  opaque rectangles occlude 30..70% of the lane pixels
             (measured against the rasterized lane masks)
    noline   markings drawn with contrast below 0.1

Labels are per-lane polylines (x, y) ordered top to bottom, with
lane_index 0..n-1 ordered left to right at the image bottom.  Labels
describe the full lane geometry regardless of occlusion.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

DIFFICULTIES = ("normal", "crowded", "noline")

# lane stripe width scales with image width; 30 px at a 1640 px wide frame
REFERENCE_LANE_WIDTH = 30
REFERENCE_IMAGE_WIDTH = 1640


def default_line_width(image_width: int) -> int:
    return max(1, round(REFERENCE_LANE_WIDTH * image_width / REFERENCE_IMAGE_WIDTH))


@dataclass
class LaneLabel:
    lane_index: int
    points: list = field(default_factory=list)  # [(x, y), ...] y strictly increasing

    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=np.float64)

    def ys(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=np.float64)


@dataclass
class Sample:
    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    lanes: list
    difficulty: str
    occlusion_mask: np.ndarray  # (H, W) bool
    occluded_fraction: float


def lane_x_at(lane: LaneLabel, y: float) -> float | None:
    """Interpolated x position at row y, or None outside the lane's extent."""
    ys = lane.ys()
    if len(ys) < 2 or y < ys[0] or y > ys[-1]:
        return None
    return float(np.interp(y, ys, lane.xs()))


def rasterize_lane_mask(lane: LaneLabel, height: int, width: int,
                        line_width_px: int) -> np.ndarray:
    """Boolean stripe mask: per integer row, a horizontal span centered on
    the rounded lane position."""
    mask = np.zeros((height, width), dtype=bool)
    ys = lane.ys()
    if len(ys) < 2:
        return mask
    half = (line_width_px - 1) // 2
    y0 = max(0, int(math.ceil(ys[0])))
    y1 = min(height - 1, int(math.floor(ys[-1])))
    xs = lane.xs()
    for y in range(y0, y1 + 1):
        x = float(np.interp(y, ys, xs))
        left = int(round(x)) - half
        lo = max(0, left)
        hi = min(width, left + line_width_px)
        if lo < hi:
            mask[y, lo:hi] = True
    return mask


def rasterize_targets(lanes, height: int, width: int, num_lanes: int,
                      line_width_px: int | None = None) -> np.ndarray:
    """Integer class map: 0 background, lane i painted as class i + 1.
    Overlaps resolve to the lower lane index."""
    if line_width_px is None:
        line_width_px = default_line_width(width)
    seg = np.zeros((height, width), dtype=np.int64)
    for lane in sorted(lanes, key=lambda l: -l.lane_index):
        if not 0 <= lane.lane_index < num_lanes:
            raise ValueError(
                f"lane_index {lane.lane_index} out of range for {num_lanes} lanes"
            )
        mask = rasterize_lane_mask(lane, height, width, line_width_px)
        seg[mask] = lane.lane_index + 1
    return seg


def existence_vector(lanes, num_lanes: int) -> np.ndarray:
    exist = np.zeros(num_lanes, dtype=np.float32)
    for lane in lanes:
        if 0 <= lane.lane_index < num_lanes:
            exist[lane.lane_index] = 1.0
    return exist


# ---------------------------------------------------------------------------
# synthetic generation


def _lane_geometry(rng, height, width, max_lanes):
    vx = rng.uniform(0.35, 0.65) * width
    vy = rng.uniform(0.12, 0.30) * height
    n = int(rng.integers(2, max_lanes + 1))
    gap = rng.uniform(0.18, 0.27) * width
    center = width / 2 + rng.uniform(-0.08, 0.08) * width
    bottoms = [center + (i - (n - 1) / 2) * gap + rng.uniform(-0.03, 0.03) * width
               for i in range(n)]
    y_top = vy + 0.08 * height
    lanes = []
    for xb in bottoms:
        bend = rng.uniform(-0.10, 0.10) * width
        points = []
        for y in range(int(math.ceil(y_top)), height):
            u = (y - vy) / (height - 1 - vy)
            x = vx + (xb - vx) * u + bend * u * (1.0 - u)
            if 0.0 <= x <= width - 1:
                points.append((float(x), float(y)))
            elif points:
                break  # lane left the frame; truncate
        if len(points) >= 10:
            lanes.append(points)
    lanes.sort(key=lambda pts: pts[-1][0])
    return [LaneLabel(lane_index=i, points=pts) for i, pts in enumerate(lanes)]


def _background(rng, height, width):
    base = 0.32 + 0.05 * np.linspace(0.0, 1.0, height)[:, None]
    coarse = rng.normal(0.0, 1.0, (6, 10))
    img = Image.fromarray((coarse * 16 + 128).astype(np.uint8))
    texture = np.asarray(
        img.resize((width, height), Image.BILINEAR), dtype=np.float32
    )
    texture = (texture - 128.0) / 16.0 * 0.04
    noise = rng.normal(0.0, 0.02, (height, width))
    return np.clip(base + texture + noise, 0.0, 1.0).astype(np.float32)


def generate_sample(seed: int, difficulty: str = "normal", height: int = 96,
                    width: int = 160, max_lanes: int = 4) -> Sample:
    """Deterministic synthetic scene for one seed."""
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}, got {difficulty!r}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x1a5e]))
    lanes = _lane_geometry(rng, height, width, max_lanes)
    while not lanes:  # extremely unlikely; reroll deterministically
        lanes = _lane_geometry(rng, height, width, max_lanes)
    gray = _background(rng, height, width)
    line_width = default_line_width(width)

    lane_union = np.zeros((height, width), dtype=bool)
    for lane in lanes:
        mask = rasterize_lane_mask(lane, height, width, line_width)
        lane_union |= mask
        if difficulty == "noline":
            brightness = float(gray[mask].mean()) + rng.uniform(0.05, 0.08)
        else:
            brightness = rng.uniform(0.75, 0.95)
        gray[mask] = np.clip(
            brightness + rng.normal(0.0, 0.01, int(mask.sum())), 0.0, 1.0
        )

    occ = np.zeros((height, width), dtype=bool)
    frac = 0.0
    if difficulty == "crowded" and lane_union.any():
        target = rng.uniform(0.35, 0.60)
        total = int(lane_union.sum())
        for _ in range(80):
            lane = lanes[int(rng.integers(0, len(lanes)))]
            px, py = lane.points[int(rng.integers(0, len(lane.points)))]
            rw = int(rng.integers(10, 28))
            rh = int(rng.integers(6, 16))
            cx = int(px + rng.uniform(-4, 4))
            cy = int(py + rng.uniform(-3, 3))
            x0, x1 = max(0, cx - rw // 2), min(width, cx + rw - rw // 2)
            y0, y1 = max(0, cy - rh // 2), min(height, cy + rh - rh // 2)
            if x0 >= x1 or y0 >= y1:
                continue
            shade = rng.uniform(0.15, 0.55)
            gray[y0:y1, x0:x1] = np.clip(
                shade + rng.normal(0.0, 0.02, (y1 - y0, x1 - x0)), 0.0, 1.0
            )
            occ[y0:y1, x0:x1] = True
            frac = float((lane_union & occ).sum()) / total
            if frac >= target:
                break
        frac = float((lane_union & occ).sum()) / total

    tint = rng.uniform(-0.01, 0.01, 3)
    image = np.clip(gray[None, :, :] + tint[:, None, None], 0.0, 1.0).astype(np.float32)
    return Sample(image=image, lanes=lanes, difficulty=difficulty,
                  occlusion_mask=occ, occluded_fraction=frac)


# ---------------------------------------------------------------------------
# label file formats


def write_culane_lines(path, lanes) -> None:
    """One lane per line as 'x y' pairs with 6 decimals, lane_index order."""
    with open(path, "w", encoding="utf-8") as f:
        for lane in sorted(lanes, key=lambda l: l.lane_index):
            f.write(" ".join(f"{v:.6f}" for p in lane.points for v in p))
            f.write("\n")


def read_culane_lines(path) -> list[LaneLabel]:
    lanes = []
    with open(path, "r", encoding="utf-8") as f:
        for i, line in enumerate(f):
            vals = [float(v) for v in line.split()]
            if len(vals) % 2:
                raise ValueError(f"{path}: line {i + 1} has an odd number of values")
            points = [(vals[j], vals[j + 1]) for j in range(0, len(vals), 2)]
            if points:
                lanes.append(LaneLabel(lane_index=i, points=points))
    return lanes


def lanes_to_tusimple(lanes, h_samples) -> list[list[int]]:
    """Per-lane x at each sampled row; -2 where the lane is absent."""
    out = []
    for lane in sorted(lanes, key=lambda l: l.lane_index):
        xs = []
        for h in h_samples:
            x = lane_x_at(lane, float(h))
            xs.append(-2 if x is None else int(round(x)))
        out.append(xs)
    return out


def tusimple_to_lanes(lane_xs, h_samples) -> list[LaneLabel]:
    lanes = []
    for i, xs in enumerate(lane_xs):
        if len(xs) != len(h_samples):
            raise ValueError(
                f"lane {i}: {len(xs)} xs for {len(h_samples)} h_samples"
            )
        points = [(float(x), float(h)) for x, h in zip(xs, h_samples) if x >= 0]
        if points:
            lanes.append(LaneLabel(lane_index=i, points=points))
    return lanes


def write_tusimple_labels(path, records) -> None:
    """records: iterable of dicts with keys lanes, h_samples, raw_file."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps({"lanes": rec["lanes"],
                                "h_samples": rec["h_samples"],
                                "raw_file": rec["raw_file"]}))
            f.write("\n")


def read_tusimple_labels(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            for key in ("lanes", "h_samples", "raw_file"):
                if key not in rec:
                    raise ValueError(f"{path}: record {i + 1} missing key {key!r}")
            records.append(rec)
    return records


# ---------------------------------------------------------------------------
# image and dataset IO


def save_image_png(path, image: np.ndarray) -> None:
    """image (3, H, W) float in [0, 1] -> 8-bit RGB PNG."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"image must be (3, H, W), got {image.shape}")
    arr = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def load_image_png(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def generate_dataset(out_dir, count: int, difficulty: str, seed: int = 0,
                     height: int = 96, width: int = 160,
                     max_lanes: int = 4) -> list[str]:
    """Write images/, labels/, and manifest.txt; returns the sample names."""
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "labels"), exist_ok=True)
    names = []
    for i in range(count):
        sample = generate_sample(seed + i, difficulty, height, width, max_lanes)
        name = f"{difficulty}_{seed + i:06d}"
        save_image_png(os.path.join(out_dir, "images", name + ".png"), sample.image)
        write_culane_lines(os.path.join(out_dir, "labels", name + ".lines.txt"),
                           sample.lanes)
        names.append(name)
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as f:
        for name in names:
            f.write(f"images/{name}.png\n")
    return names


def read_manifest(data_dir) -> list[str]:
    path = os.path.join(data_dir, "manifest.txt")
    with open(path, "r", encoding="utf-8") as f:
        entries = [line.strip() for line in f if line.strip()]
    if not entries:
        raise ValueError(f"{path} lists no samples")
    return entries


def label_path_for(image_rel: str) -> str:
    if not image_rel.endswith(".png"):
        raise ValueError(f"expected a .png path, got {image_rel!r}")
    rel = image_rel[: -len(".png")] + ".lines.txt"
    return rel.replace("images/", "labels/", 1)


def load_entry(data_dir, image_rel: str):
    """Returns (image (3, H, W) float32, lanes, difficulty)."""
    image = load_image_png(os.path.join(data_dir, image_rel))
    lanes = read_culane_lines(os.path.join(data_dir, label_path_for(image_rel)))
    name = os.path.basename(image_rel)
    difficulty = name.split("_", 1)[0] if "_" in name else "normal"
    return image, lanes, difficulty


def load_dataset_arrays(data_dir):
    """All manifest entries as (images (N, 3, H, W) float32, lane lists)."""
    images = []
    lanes_lists = []
    for rel in read_manifest(data_dir):
        image, lanes, _ = load_entry(data_dir, rel)
        images.append(image)
        lanes_lists.append(lanes)
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ValueError(f"mixed image shapes in {data_dir}: {sorted(shapes)}")
    return np.stack(images), lanes_lists
