"""Synthetic identity world.

Identities are well-separated Gaussian-cluster centers in R^d; prompt
edits are attribute offsets orthogonal to the span of all centers (and
to each other), so identity error and attribute displacement decompose
cleanly.  Attribute condition tokens are 1-based: token 0 means "no
attribute requested", token a in 1..A names offset a-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .intent import Prompt
from .rng import RngStream

_SEPARATION_FACTOR = 4.0


@dataclass(frozen=True)
class WorldConfig:
    dim: int = 8
    n_identities: int = 4
    n_attributes: int = 2
    noise_sigma: float = 0.1
    attribute_magnitude: float = 1.0
    attribute_names: tuple[str, ...] = ("smiling", "running")
    seed: int = 7

    def validate(self) -> "WorldConfig":
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2, got {self.dim}")
        if self.n_identities < 1:
            raise ConfigError(f"n_identities must be >= 1, got {self.n_identities}")
        if self.n_attributes < 1:
            raise ConfigError(f"n_attributes must be >= 1, got {self.n_attributes}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.attribute_magnitude < 0:
            raise ConfigError("attribute_magnitude must be >= 0")
        if len(self.attribute_names) != self.n_attributes:
            raise ConfigError(
                f"need {self.n_attributes} attribute names, got {len(self.attribute_names)}")
        return self


@dataclass(frozen=True)
class SyntheticWorld:
    config: WorldConfig
    centers: np.ndarray   # (K, d)
    offsets: np.ndarray   # (A, d), orthonormal * magnitude, orthogonal to centers

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def n_identities(self) -> int:
        return self.config.n_identities

    @property
    def n_attributes(self) -> int:
        return self.config.n_attributes

    def min_center_distance(self) -> float:
        k = self.centers.shape[0]
        if k < 2:
            raise ValidationError("min_center_distance needs at least two identities")
        dists = [
            float(np.linalg.norm(self.centers[i] - self.centers[j]))
            for i in range(k) for j in range(i + 1, k)
        ]
        return min(dists)


def make_world(cfg: WorldConfig) -> SyntheticWorld:
    """Draw centers and attribute offsets deterministically from cfg.seed.

    Centers are repelled until every pair is at least 4*noise_sigma
    apart; offsets are orthogonalized against the center span and each
    other, then scaled to the configured magnitude.
    """
    cfg.validate()
    rng = RngStream(cfg.seed, "world")
    centers = rng.child("centers").normal((cfg.n_identities, cfg.dim))
    min_sep = _SEPARATION_FACTOR * cfg.noise_sigma
    centers = _repel(centers, min_sep)

    rank = np.linalg.matrix_rank(centers) if cfg.n_identities > 0 else 0
    if rank + cfg.n_attributes > cfg.dim:
        raise ConfigError(
            f"cannot fit {cfg.n_attributes} offsets orthogonal to a rank-{rank} "
            f"center span in {cfg.dim} dimensions")

    raw = rng.child("offsets").normal((cfg.n_attributes, cfg.dim))
    basis = _orthonormal_rows(centers)
    offsets = np.zeros_like(raw)
    for a in range(cfg.n_attributes):
        v = raw[a].copy()
        for b in basis:
            v -= (v @ b) * b
        for b in offsets[:a]:
            norm = np.linalg.norm(b)
            if norm > 0:
                v -= (v @ b) * b / (norm * norm)
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            raise ConfigError("degenerate attribute offset; increase dim or reseed")
        offsets[a] = v / norm * cfg.attribute_magnitude
    return SyntheticWorld(config=cfg, centers=centers, offsets=offsets)


def _orthonormal_rows(rows: np.ndarray) -> list[np.ndarray]:
    basis: list[np.ndarray] = []
    for r in rows:
        v = r.copy()
        for b in basis:
            v -= (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            basis.append(v / norm)
    return basis


def _repel(centers: np.ndarray, min_sep: float, max_iters: int = 1000) -> np.ndarray:
    """Push center pairs apart until all pairwise distances meet min_sep."""
    k = centers.shape[0]
    if k < 2 or min_sep <= 0:
        return centers
    centers = centers.copy()
    for _ in range(max_iters):
        worst = None
        for i in range(k):
            for j in range(i + 1, k):
                d = np.linalg.norm(centers[i] - centers[j])
                if d < min_sep and (worst is None or d < worst[0]):
                    worst = (d, i, j)
        if worst is None:
            return centers
        d, i, j = worst
        if d < 1e-12:
            direction = np.zeros(centers.shape[1])
            direction[(i + j) % centers.shape[1]] = 1.0
        else:
            direction = (centers[i] - centers[j]) / d
        push = 0.5 * (min_sep * 1.05 - d)
        centers[i] += push * direction
        centers[j] -= push * direction
    raise ConfigError(
        f"could not separate {k} centers by {min_sep:g}; reduce noise_sigma or identities")


def sample_dataset(world: SyntheticWorld, n: int, rng: RngStream,
                   identities: list[int] | None = None):
    """Draw n world samples: x0 = center[i] + offset[a-1]*b + sigma*noise.

    Returns (x0 array (n, d), identity tokens (n,), attribute tokens (n,)).
    The attribute token is a*b with 1-based attribute index a, so 0
    encodes "attribute absent".
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    cfg = world.config
    pool = np.arange(cfg.n_identities) if identities is None else np.asarray(identities)
    if pool.size == 0:
        raise ValidationError("identity pool is empty")
    if pool.min() < 0 or pool.max() >= cfg.n_identities:
        raise ValidationError(f"identity pool {pool.tolist()} out of range")
    ident = pool[rng.integers(0, pool.size, (n,))]
    attr = rng.integers(1, cfg.n_attributes + 1, (n,))
    present = rng.integers(0, 2, (n,))
    attr_tok = attr * present
    noise = rng.normal((n, cfg.dim))
    x0 = world.centers[ident] + world.offsets[attr - 1] * present[:, None] + cfg.noise_sigma * noise
    return x0, ident, attr_tok


def clean_appearance(world: SyntheticWorld, identity: int, attr_token: int) -> np.ndarray:
    """Noise-free state of an identity with an attribute applied (or not)."""
    x = world.centers[identity].copy()
    if attr_token > 0:
        x += world.offsets[attr_token - 1]
    return x


def attribute_from_prompt(world: SyntheticWorld, prompt: Prompt) -> int:
    """Map a prompt to an attribute token; first matching token wins, 0 if none."""
    names = [n.casefold() for n in world.config.attribute_names]
    for tok in prompt.tokens:
        for a, name in enumerate(names, start=1):
            if tok == name or tok.startswith(name):
                return a
    return 0
