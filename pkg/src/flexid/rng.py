"""Deterministic, labelled random streams.

Every stochastic consumer in the package draws from its own named
sub-stream, derived from a 64-bit root seed plus a label path.  Streams
are backed by the counter-based Philox generator, so two streams with
the same (seed, label) produce identical values on every platform, and
adding a new consumer never perturbs an existing stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ValidationError

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class RngStream:
    """A named Philox stream with derivable child streams."""

    def __init__(self, seed: int, label: str = "root"):
        if not isinstance(seed, int) or not (0 <= seed <= _MASK64):
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
        self.seed = seed
        self.label = label
        seq = np.random.SeedSequence([seed, _label_key(label)])
        self._gen = np.random.Generator(np.random.Philox(seq))

    def child(self, label: str) -> "RngStream":
        """Derive an independent stream for a sub-purpose."""
        return RngStream(self.seed, f"{self.label}/{label}")

    def normal(self, shape=()) -> np.ndarray:
        return self._gen.standard_normal(size=shape, dtype=np.float64)

    def uniform(self, shape=()) -> np.ndarray:
        return self._gen.random(size=shape, dtype=np.float64)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Uniform integers in [low, high)."""
        return self._gen.integers(low, high, size=shape)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"
