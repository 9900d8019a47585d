"""Toy fidelity and adherence scores over world geometry.

Identity similarity is a Gaussian kernel on the distance to the
reference center, with its length scale tied to half the minimum
inter-center distance so "same identity" vs "different identity" is
scale-free across worlds.  Attribute adherence is the fraction of the
requested offset displacement actually realized, clamped to [0, 1];
components orthogonal to the offset are ignored.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .pipeline import LatentSample
from .world import SyntheticWorld


def _as_vector(x) -> np.ndarray:
    if isinstance(x, LatentSample):
        x = x.x
    return np.asarray(x, dtype=np.float64)


def id_similarity(x, center: np.ndarray, world: SyntheticWorld) -> float:
    """exp(-||x - c||^2 / (2 s^2)) with s = half the min center distance."""
    if world.n_identities < 2:
        raise ValidationError("id_similarity needs a world with at least two identities")
    xv = _as_vector(x)
    s = 0.5 * world.min_center_distance()
    d2 = float(np.sum((xv - center) ** 2))
    return float(np.exp(-d2 / (2.0 * s * s)))


def attr_adherence(x, center: np.ndarray, offset: np.ndarray) -> float:
    """clamp(((x - c) . o) / ||o||^2, 0, 1): realized offset fraction."""
    xv = _as_vector(x)
    o = np.asarray(offset, dtype=np.float64)
    norm2 = float(o @ o)
    if norm2 <= 0.0:
        raise ValidationError("attribute offset must be non-zero")
    frac = float((xv - center) @ o) / norm2
    return float(min(1.0, max(0.0, frac)))
