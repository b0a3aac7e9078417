"""Synthetic corpus generation: seeded, watertight, multi-component models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import BrepModel, model_bbox, validate
from .primitives import box, l_bracket, merge_models, ngon_prism, seam_cylinder, through_hole_box

FAMILIES = ("box", "prism", "cylinder", "hole_box", "l_bracket")


class PlacementError(RuntimeError):
    """Component placement failed after the bounded retry budget."""


@dataclass
class CorpusSpec:
    counts: dict = field(default_factory=lambda: {"box": 4, "prism": 4, "cylinder": 4,
                                                  "hole_box": 4, "l_bracket": 4})
    components: tuple = (1, 5)       # inclusive range of components per model
    size_range: tuple = (0.6, 1.4)
    placement_extent: float = 4.0    # compact layouts keep features coarse
                                     # after unit-box normalization
    placement_gap: float = 0.05
    max_retries: int = 100
    seed: int = 0

    def __post_init__(self):
        unknown = set(self.counts) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown primitive families: {sorted(unknown)}")
        lo, hi = self.components
        if not (1 <= lo <= hi <= 5):
            raise ValueError("component range must lie within 1..5")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("family counts must be non-negative")
        if self.size_range[0] <= 0 or self.size_range[0] > self.size_range[1]:
            raise ValueError("size range must be positive and ordered")


def _make_primitive(family: str, rng: np.random.Generator, spec: CorpusSpec,
                    at) -> BrepModel:
    lo, hi = spec.size_range
    if family == "box":
        return box(size=rng.uniform(lo, hi, 3), at=at)
    if family == "prism":
        n = int(rng.integers(3, 9))
        return ngon_prism(n=n, radius=0.5 * rng.uniform(lo, hi),
                          height=rng.uniform(lo, hi), at=at,
                          phase=rng.uniform(0.0, np.pi / n))
    if family == "cylinder":
        return seam_cylinder(radius=0.5 * rng.uniform(lo, hi),
                             height=rng.uniform(lo, hi), at=at)
    if family == "hole_box":
        size = rng.uniform(lo, hi, 3)
        f0 = rng.uniform(0.2, 0.35, 2)
        f1 = rng.uniform(0.65, 0.8, 2)
        return through_hole_box(size=size, hole_lo=size[:2] * f0,
                                hole_hi=size[:2] * f1, at=at)
    if family == "l_bracket":
        w, d, h = rng.uniform(lo, hi, 3)
        return l_bracket(width=w, depth=d, height=h,
                         leg_x=w * rng.uniform(0.3, 0.5),
                         leg_y=d * rng.uniform(0.3, 0.5), at=at)
    raise ValueError(f"unknown family {family!r}")


def _disjoint(bb, placed, gap):
    lo, hi = bb
    for plo, phi in placed:
        if np.all(hi + gap > plo) and np.all(plo - gap < hi) and \
           np.all(lo - gap < phi) and np.all(phi + gap > lo):
            return False
    return True


def synth_model(primary: str, rng: np.random.Generator, spec: CorpusSpec) -> BrepModel:
    """One model: a primary-family component plus 0..4 random companions."""
    k = int(rng.integers(spec.components[0], spec.components[1] + 1))
    families = [primary] + [FAMILIES[int(rng.integers(0, len(FAMILIES)))]
                            for _ in range(k - 1)]
    parts = []
    placed = []
    for fam in families:
        for attempt in range(spec.max_retries):
            at = rng.uniform(0.0, spec.placement_extent, 3)
            part = _make_primitive(fam, rng, spec, at)
            bb = model_bbox(part)
            if _disjoint(bb, placed, spec.placement_gap):
                parts.append(part)
                placed.append(bb)
                break
        else:
            raise PlacementError(f"could not place component {fam!r} after "
                                 f"{spec.max_retries} retries")
    return parts[0] if len(parts) == 1 else merge_models(parts)


def synth_corpus(spec: CorpusSpec):
    """Generate the corpus deterministically; every model is watertight.

    Returns a list of (name, model) pairs in a fixed family order.
    """
    rng = np.random.default_rng(spec.seed)
    out = []
    for family in FAMILIES:
        for i in range(spec.counts.get(family, 0)):
            model = synth_model(family, rng, spec)
            report = validate(model)
            if not report.watertight:
                raise RuntimeError(
                    f"generator produced a non-watertight model ({family} #{i}): "
                    f"{report.defects[:3]}"
                )
            out.append((f"{family}_{i:04d}", model))
    return out
