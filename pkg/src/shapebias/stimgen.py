"""Procedural shape/colour/background stimuli and probe triples.

Shapes are drawn from a fixed library of 12 prototypes with small seeded
rotation/scale/translation jitter, rendered at 2x supersampling and
box-filtered.  A stimulus is a pure function of its :class:`StimulusSpec`.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .errors import ContractError

SHAPES = ("triangle", "square", "cross", "T", "L", "H", "disc", "ring", "star", "arrow", "U", "Z")
N_SHAPES = len(SHAPES)

PALETTE = np.array([
    (215, 40, 40),    # red
    (40, 160, 60),    # green
    (40, 80, 215),    # blue
    (240, 210, 30),   # yellow
    (200, 50, 190),   # magenta
    (40, 195, 205),   # cyan
    (245, 135, 30),   # orange
    (115, 45, 165),   # purple
], dtype=np.float64)
N_COLORS = len(PALETTE)
N_BACKGROUNDS = 5
BACKGROUND_GRAY = (180, 180, 180)
EXTERNAL = -1  # id sentinel for stimuli loaded from files

_SUPERSAMPLE = 2
_BASE_RADIUS = 0.36  # prototype unit radius as a fraction of the image side


def _rect(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def _star(points=5, outer=0.92, inner=0.4):
    verts = []
    for k in range(2 * points):
        r = outer if k % 2 == 0 else inner
        a = -math.pi / 2 + k * math.pi / points
        verts.append((r * math.cos(a), r * math.sin(a)))
    return verts


# unions of polygons in prototype space, y pointing down, roughly inside the unit disc
_POLYGONS = {
    "triangle": [[(0.0, -0.85), (0.9, 0.72), (-0.9, 0.72)]],
    "square": [_rect(-0.68, -0.68, 0.68, 0.68)],
    "cross": [_rect(-0.85, -0.26, 0.85, 0.26), _rect(-0.26, -0.85, 0.26, 0.85)],
    "T": [_rect(-0.85, -0.8, 0.85, -0.38), _rect(-0.22, -0.38, 0.22, 0.85)],
    "L": [_rect(-0.7, -0.85, -0.26, 0.85), _rect(-0.26, 0.42, 0.72, 0.85)],
    "H": [_rect(-0.8, -0.85, -0.4, 0.85), _rect(0.4, -0.85, 0.8, 0.85), _rect(-0.4, -0.2, 0.4, 0.2)],
    "star": [_star()],
    "arrow": [_rect(-0.85, -0.22, 0.1, 0.22), [(0.1, -0.65), (0.9, 0.0), (0.1, 0.65)]],
    "U": [_rect(-0.75, -0.85, -0.35, 0.85), _rect(0.35, -0.85, 0.75, 0.85), _rect(-0.35, 0.45, 0.35, 0.85)],
    "Z": [_rect(-0.8, -0.85, 0.8, -0.5), _rect(-0.8, 0.5, 0.8, 0.85),
          [(0.35, -0.5), (0.8, -0.5), (-0.35, 0.5), (-0.8, 0.5)]],
}


def _inside_polygon(px, py, verts):
    """Even-odd rule, vectorised over points."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for k in range(n):
        x0, y0 = verts[k]
        x1, y1 = verts[(k + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xcross)
    return inside


def _inside(name, px, py):
    if name == "disc":
        return px * px + py * py <= 0.8 ** 2
    if name == "ring":
        r2 = px * px + py * py
        return (r2 <= 0.86 ** 2) & (r2 >= 0.5 ** 2)
    mask = np.zeros(px.shape, dtype=bool)
    for verts in _POLYGONS[name]:
        mask |= _inside_polygon(px, py, verts)
    return mask


@dataclass(frozen=True)
class StimulusSpec:
    shape_id: int
    color_id: int
    background_id: int
    jitter_seed: int

    def validate(self):
        if not 0 <= self.shape_id < N_SHAPES:
            raise ContractError(f"shape_id {self.shape_id} outside [0, {N_SHAPES})")
        if not 0 <= self.color_id < N_COLORS:
            raise ContractError(f"color_id {self.color_id} outside [0, {N_COLORS})")
        if not 0 <= self.background_id < N_BACKGROUNDS:
            raise ContractError(f"background_id {self.background_id} outside [0, {N_BACKGROUNDS})")
        if self.jitter_seed < 0:
            raise ContractError("jitter_seed must be non-negative")

    @property
    def external(self):
        return self.shape_id == EXTERNAL


EXTERNAL_SPEC = StimulusSpec(EXTERNAL, EXTERNAL, EXTERNAL, 0)


@dataclass(frozen=True, eq=False)
class Stimulus:
    spec: StimulusSpec
    image: np.ndarray = field(repr=False)  # (H, W, 3) uint8
    source: str = ""  # file path for external stimuli

    def foreground_fraction(self):
        return float(coverage(self.spec, self.image.shape[0]).astype(bool).mean())


def background(background_id, size, seed):
    """(size, size, 3) float background; id 4 is a noise field seeded by ``seed``."""
    if background_id == 0:
        return np.full((size, size, 3), BACKGROUND_GRAY, dtype=np.float64)
    if background_id == 1:
        return np.full((size, size, 3), 105.0)
    ramp = np.linspace(90.0, 225.0, size)
    if background_id == 2:
        return np.broadcast_to(ramp[None, :, None], (size, size, 3)).copy()
    if background_id == 3:
        return np.broadcast_to(ramp[::-1, None, None], (size, size, 3)).copy()
    rng = seeding.generator(seed, "noise")
    gray = np.clip(rng.normal(160.0, 35.0, size=(size, size)), 0, 255)
    return np.repeat(gray[:, :, None], 3, axis=2)


def _jitter(jitter_seed):
    rng = seeding.generator(jitter_seed, "jitter")
    angle = rng.uniform(-20.0, 20.0) * math.pi / 180.0
    scale = rng.uniform(0.88, 1.1)
    shift = rng.uniform(-2.0, 2.0, size=2)
    return angle, scale, shift


def coverage(spec, size):
    """Fraction of each pixel covered by the shape (multiples of 1/4)."""
    spec.validate()
    angle, scale, shift = _jitter(spec.jitter_seed)
    n = size * _SUPERSAMPLE
    centers = (np.arange(n) + 0.5) / _SUPERSAMPLE
    yy, xx = np.meshgrid(centers, centers, indexing="ij")
    dx = xx - (size / 2 + shift[0])
    dy = yy - (size / 2 + shift[1])
    radius = _BASE_RADIUS * size * scale
    ca, sa = math.cos(angle), math.sin(angle)
    px = (ca * dx + sa * dy) / radius
    py = (-sa * dx + ca * dy) / radius
    hit = _inside(SHAPES[spec.shape_id], px, py).astype(np.float64)
    return hit.reshape(size, _SUPERSAMPLE, size, _SUPERSAMPLE).mean(axis=(1, 3))


def render_stimulus(spec, size=32):
    """Render ``spec`` to a (size, size, 3) uint8 image."""
    if size < 16:
        raise ContractError("size must be at least 16")
    alpha = coverage(spec, size)[:, :, None]
    bg = background(spec.background_id, size, spec.jitter_seed)
    img = alpha * PALETTE[spec.color_id] + (1.0 - alpha) * bg
    return Stimulus(spec, np.rint(img).astype(np.uint8))


@dataclass(frozen=True, eq=False)
class ProbeTriple:
    probe: Stimulus
    shape_match: Stimulus
    color_match: Stimulus
    triple_id: int
    background_id: int

    def validate(self):
        """Check id-level invariants; external triples carry no ids and always pass."""
        p, s, c = self.probe.spec, self.shape_match.spec, self.color_match.spec
        if p.external:
            return
        if s.shape_id != p.shape_id or s.color_id == p.color_id:
            raise ContractError(f"triple {self.triple_id}: shape match must share shape, not colour")
        if c.color_id != p.color_id or c.shape_id == p.shape_id:
            raise ContractError(f"triple {self.triple_id}: colour match must share colour, not shape")


def make_probe_triples(n=50, rng_seed=0, size=32, n_shapes=N_SHAPES, n_colors=N_COLORS):
    """``ceil(n / 5)`` probe identities, each shown on the backgrounds in turn.

    Triple ``t`` uses identity ``t // 5`` on background ``t % 5``; the three
    objects of an identity keep their jitter across backgrounds.
    """
    if n < 1:
        raise ContractError("need at least one triple")
    if not (2 <= n_shapes <= N_SHAPES and 2 <= n_colors <= N_COLORS):
        raise ContractError("need at least 2 shapes and 2 colours")
    rng = seeding.generator(rng_seed, "triples")
    n_ident = -(-n // N_BACKGROUNDS)
    pool = n_shapes * n_colors
    picks = rng.choice(pool, size=n_ident, replace=n_ident > pool)
    identities = []
    for pick in picks:
        shape, color = divmod(int(pick), n_colors)
        other_color = int((color + rng.integers(1, n_colors)) % n_colors)
        other_shape = int((shape + rng.integers(1, n_shapes)) % n_shapes)
        seeds = rng.integers(0, 2**31 - 1, size=3)
        identities.append(((shape, color, seeds[0]), (shape, other_color, seeds[1]), (other_shape, color, seeds[2])))

    triples = []
    for t in range(n):
        bg = t % N_BACKGROUNDS
        probe, smatch, cmatch = (
            render_stimulus(StimulusSpec(s, c, bg, int(j)), size) for s, c, j in identities[t // N_BACKGROUNDS]
        )
        triple = ProbeTriple(probe, smatch, cmatch, t, bg)
        triple.validate()
        triples.append(triple)
    return triples


class Mode(enum.Enum):
    BY_SHAPE = "by_shape"
    BY_COLOR = "by_color"
    CONJUNCTION = "conjunction"


@dataclass(eq=False)
class LabeledDataset:
    """Images with integer class labels, ordered by class."""

    mode: Mode
    specs: list
    images: np.ndarray  # (N, H, W, 3) uint8
    labels: np.ndarray  # (N,) int
    classes: tuple = ()

    def __post_init__(self):
        if not self.classes:
            self.classes = tuple(sorted({int(y) for y in self.labels}))

    def __len__(self):
        return len(self.labels)

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def items(self):
        return [(Stimulus(s, im), int(y)) for s, im, y in zip(self.specs, self.images, self.labels)]

    def subset_classes(self, classes):
        keep = np.isin(self.labels, list(classes))
        idx = np.flatnonzero(keep)
        return LabeledDataset(self.mode, [self.specs[i] for i in idx], self.images[idx], self.labels[idx],
                              tuple(sorted(int(c) for c in classes)))

    def split_classes(self, n_train):
        """Class-level split: the first ``n_train`` classes train, the rest are held out."""
        if not 0 < n_train < self.n_classes:
            raise ContractError("n_train must leave at least one class on each side")
        return self.subset_classes(self.classes[:n_train]), self.subset_classes(self.classes[n_train:])


def generate_dataset(mode, n_classes, n_per_class, rng_seed=0, size=32, split="train"):
    """A labeled world where class identity is carried by shape, colour, or both.

    ``split`` names an independent item stream over the same classes
    ("train", "test", ...), which gives item-level held-out sets.
    """
    mode = Mode(mode)
    limits = {Mode.BY_SHAPE: N_SHAPES, Mode.BY_COLOR: N_COLORS, Mode.CONJUNCTION: N_SHAPES * N_COLORS}
    if not 1 <= n_classes <= limits[mode]:
        raise ContractError(f"{mode.name} supports 1..{limits[mode]} classes, got {n_classes}")
    if n_per_class < 1:
        raise ContractError("n_per_class must be positive")
    rng = seeding.generator(rng_seed, "dataset", mode.value, split)
    pairs = seeding.generator(rng_seed, "conjunction-classes").permutation(N_SHAPES * N_COLORS)
    specs, labels = [], []
    for label in range(n_classes):
        for _ in range(n_per_class):
            if mode is Mode.BY_SHAPE:
                shape, color = label, int(rng.integers(N_COLORS))
            elif mode is Mode.BY_COLOR:
                shape, color = int(rng.integers(N_SHAPES)), label
            else:
                shape, color = divmod(int(pairs[label]), N_COLORS)
            bg = int(rng.integers(N_BACKGROUNDS))
            specs.append(StimulusSpec(shape, color, bg, int(rng.integers(0, 2**31 - 1))))
            labels.append(label)
    images = np.stack([render_stimulus(s, size).image for s in specs])
    return LabeledDataset(mode, specs, images, np.array(labels), tuple(range(n_classes)))
