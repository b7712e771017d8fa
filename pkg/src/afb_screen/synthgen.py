"""Deterministic synthetic ZN-like fields of view with ground truth.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014), implemented
here so scenes are reproducible regardless of the numpy version. With seed
1234567 the first three outputs are 6457827717110365317,
3203168211198807973 and 9817491932198370423.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import PlacementFailure
from .imaging import RgbImage

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream. Output ``i`` depends only on ``seed + i * GAMMA``,
    which lets :meth:`u64_block` produce long runs with numpy."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def u64_block(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return z

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def normal_block(self, n: int, sigma: float = 1.0) -> np.ndarray:
        """``n`` normal deviates by the Box-Muller transform (both branches used)."""
        pairs = (n + 1) // 2
        raw = self.u64_block(2 * pairs)
        u = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(theta)
        out[1::2] = radius * np.sin(theta)
        return sigma * out[:n]


# --- geometry ---------------------------------------------------------------

def rasterize_capsule(center, length, thickness, angle) -> np.ndarray:
    """Pixels whose centres lie within ``thickness / 2`` of the capsule's spine.

    ``length`` is tip to tip, so the spine is ``length - thickness`` long and
    ``length == thickness`` gives a disk. Returns an ``(n, 2)`` array of
    ``(x, y)`` in raster order.
    """
    if thickness < 1 or length < thickness:
        raise ValueError("need thickness >= 1 and length >= thickness")
    cx, cy = center
    half_spine = (length - thickness) / 2.0
    r = thickness / 2.0
    ux, uy = math.cos(angle), math.sin(angle)
    reach = half_spine + r + 1
    xs = np.arange(math.floor(cx - reach), math.ceil(cx + reach) + 1)
    ys = np.arange(math.floor(cy - reach), math.ceil(cy + reach) + 1)
    gx, gy = np.meshgrid(xs, ys)
    dx, dy = gx - cx, gy - cy
    along = np.clip(dx * ux + dy * uy, -half_spine, half_spine)
    dist2 = (dx - along * ux) ** 2 + (dy - along * uy) ** 2
    # slack keeps the set stable under angle -> angle + pi rounding noise
    inside = dist2 <= (r + 1e-9) ** 2
    return np.column_stack([gx[inside], gy[inside]]).astype(np.int64)


class DebrisKind(str, Enum):
    ROUND_BLOB = "round_blob"
    WRONG_COLOR_ROD = "wrong_color_rod"
    SPECK = "speck"


@dataclass(frozen=True)
class Rod:
    center: tuple
    length: float
    thickness: float
    angle: float

    def silhouette(self):
        return rasterize_capsule(self.center, self.length, self.thickness, self.angle)


@dataclass(frozen=True)
class Debris:
    """A non-bacillus object. Round kinds use ``radius``; a wrong-colour rod
    has tip-to-tip length ``2 * radius`` plus ``thickness`` and ``angle``."""

    center: tuple
    radius: float
    kind: DebrisKind
    thickness: float = 0.0
    angle: float = 0.0

    def silhouette(self):
        if self.kind is DebrisKind.WRONG_COLOR_ROD:
            return rasterize_capsule(self.center, 2 * self.radius, self.thickness, self.angle)
        return rasterize_capsule(self.center, 2 * self.radius, 2 * self.radius, 0.0)


@dataclass(frozen=True)
class GeneratorParams:
    n_rods: int = 10
    n_debris: int = 5
    width: int = 256
    height: int = 256
    rod_length: tuple = (15.0, 60.0)
    rod_thickness: tuple = (4.0, 10.0)
    blob_radius: tuple = (10.0, 16.0)
    speck_radius: tuple = (0.5, 1.5)
    background: tuple = (150, 160, 210)
    rod_color: tuple = (170, 40, 90)
    wrong_color: tuple = (70, 90, 170)
    noise_sigma: float = 6.0
    seed: int = 0
    allow_touching: bool = False
    clearance: int = 3
    margin: int = 2
    max_attempts: int = 10_000

    def __post_init__(self):
        if self.n_rods < 0 or self.n_debris < 0:
            raise ValueError("object counts must be >= 0")
        for name in ("rod_length", "rod_thickness", "blob_radius", "speck_radius"):
            lo, hi = getattr(self, name)
            if lo > hi or lo <= 0:
                raise ValueError(f"{name} range must be positive and non-empty")
        if self.rod_thickness[0] < 1 or self.rod_length[0] < self.rod_thickness[1]:
            raise ValueError("rods need thickness >= 1 and length >= thickness")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def to_dict(self):
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass
class SyntheticScene:
    seed: int
    width: int
    height: int
    rods: list = field(default_factory=list)
    debris: list = field(default_factory=list)
    allow_touching: bool = False

    def to_dict(self):
        return {
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
            "allow_touching": self.allow_touching,
            "rods": [{"center": list(r.center), "length": r.length,
                      "thickness": r.thickness, "angle": r.angle} for r in self.rods],
            "debris": [{"center": list(d.center), "radius": d.radius, "kind": d.kind.value,
                        "thickness": d.thickness, "angle": d.angle} for d in self.debris],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            seed=int(d["seed"]), width=int(d["width"]), height=int(d["height"]),
            allow_touching=bool(d.get("allow_touching", False)),
            rods=[Rod(tuple(r["center"]), r["length"], r["thickness"], r["angle"]) for r in d["rods"]],
            debris=[Debris(tuple(x["center"]), x["radius"], DebrisKind(x["kind"]),
                           x.get("thickness", 0.0), x.get("angle", 0.0)) for x in d["debris"]],
        )


def _fits(px, width, height, margin):
    if len(px) == 0:
        return False
    return (px[:, 0].min() >= margin and px[:, 1].min() >= margin
            and px[:, 0].max() <= width - 1 - margin and px[:, 1].max() <= height - 1 - margin)


class _Placer:
    def __init__(self, params: GeneratorParams):
        self.p = params
        self.occupied = np.zeros((params.height, params.width), dtype=bool)
        self.attempts = 0

    def try_place(self, px):
        p = self.p
        self.attempts += 1
        if self.attempts > p.max_attempts:
            raise PlacementFailure(f"could not place all shapes within {p.max_attempts} attempts")
        if not _fits(px, p.width, p.height, p.margin):
            return False
        if p.allow_touching:
            return True
        if self.occupied[px[:, 1], px[:, 0]].any():
            return False
        c = p.clearance
        h, w = self.occupied.shape
        for dy in range(-c, c + 1):
            ys = np.clip(px[:, 1] + dy, 0, h - 1)
            for dx in range(-c, c + 1):
                self.occupied[ys, np.clip(px[:, 0] + dx, 0, w - 1)] = True
        return True


def _random_center(rng, params, reach):
    lo_x, hi_x = params.margin + reach, params.width - 1 - params.margin - reach
    lo_y, hi_y = params.margin + reach, params.height - 1 - params.margin - reach
    # oversized shapes still get a candidate; _fits rejects it
    x = rng.uniform(lo_x, hi_x) if hi_x > lo_x else params.width / 2
    y = rng.uniform(lo_y, hi_y) if hi_y > lo_y else params.height / 2
    return (x, y)


def sample_scene(params: GeneratorParams, rng: SplitMix64 | None = None) -> SyntheticScene:
    """Draw rod and debris geometry by rejection sampling."""
    rng = rng if rng is not None else SplitMix64(params.seed)
    placer = _Placer(params)
    scene = SyntheticScene(params.seed, params.width, params.height,
                           allow_touching=params.allow_touching)
    while len(scene.rods) < params.n_rods:
        length = rng.uniform(*params.rod_length)
        thickness = rng.uniform(*params.rod_thickness)
        angle = rng.uniform(0.0, math.pi)
        center = _random_center(rng, params, length / 2)
        rod = Rod(center, length, thickness, angle)
        if placer.try_place(rod.silhouette()):
            scene.rods.append(rod)
    kinds = list(DebrisKind)
    while len(scene.debris) < params.n_debris:
        kind = kinds[len(scene.debris) % len(kinds)]
        if kind is DebrisKind.WRONG_COLOR_ROD:
            length = rng.uniform(*params.rod_length)
            thickness = rng.uniform(*params.rod_thickness)
            angle = rng.uniform(0.0, math.pi)
            center = _random_center(rng, params, length / 2)
            item = Debris(center, length / 2, kind, thickness, angle)
        else:
            radius = rng.uniform(*(params.blob_radius if kind is DebrisKind.ROUND_BLOB
                                   else params.speck_radius))
            center = _random_center(rng, params, radius)
            if kind is DebrisKind.SPECK:
                # on-grid centre guarantees at least one pixel
                center = (float(round(center[0])), float(round(center[1])))
            item = Debris(center, radius, kind, 2 * radius, 0.0)
        if placer.try_place(item.silhouette()):
            scene.debris.append(item)
    return scene


def render_scene(scene: SyntheticScene, params: GeneratorParams, rng: SplitMix64 | None = None) -> RgbImage:
    """Paint the scene over the background and add per-pixel Gaussian noise."""
    rng = rng if rng is not None else SplitMix64(params.seed ^ 0x5DEECE66D)
    canvas = np.empty((scene.height, scene.width, 3), dtype=np.float64)
    canvas[:] = params.background
    for d in scene.debris:
        px = d.silhouette()
        color = params.wrong_color if d.kind is DebrisKind.WRONG_COLOR_ROD else params.rod_color
        canvas[px[:, 1], px[:, 0]] = color
    for r in scene.rods:
        px = r.silhouette()
        canvas[px[:, 1], px[:, 0]] = params.rod_color
    if params.noise_sigma > 0:
        canvas += rng.normal_block(canvas.size, params.noise_sigma).reshape(canvas.shape)
    return RgbImage(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8))


def generate_scene(params: GeneratorParams):
    """Sample and render one field of view; same params give identical output."""
    rng = SplitMix64(params.seed)
    scene = sample_scene(params, rng)
    image = render_scene(scene, params, rng)
    return image, scene


def scene_sidecar(scene: SyntheticScene, params: GeneratorParams) -> dict:
    out = scene.to_dict()
    out["params"] = params.to_dict()
    return out


def corpus_params(base: GeneratorParams, index: int) -> GeneratorParams:
    """Parameters for the ``index``-th image of a seeded corpus."""
    return replace(base, seed=_mix((base.seed + (index + 1) * GAMMA) & MASK64))
