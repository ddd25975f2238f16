"""Detector and matcher configuration, with a canonical text form.

The text form (one ``key=value`` per line, keys in field order) is the
interchange format for configs: the CLI accepts it as a file, and its
64-bit digest identifies which detector settings produced a gallery.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields


@dataclass(frozen=True)
class DetectorConfig:
    """Keypoint detector parameters.

    Defaults follow the common SIFT baseline: 3 scales per octave,
    base sigma 1.6, one initial doubling of the input, contrast
    threshold 0.03 on [0,1] intensities, edge ratio 10, 36 orientation
    bins with the 80% secondary-peak rule, and a 4x4 descriptor grid of
    8 orientation planes (16x16 sample window).
    """

    scales_per_octave: int = 3
    base_sigma: float = 1.6
    assumed_blur: float = 0.5
    double_input: bool = True
    max_octaves: int = 0  # 0 = derive from image size
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    orientation_bins: int = 36
    peak_ratio: float = 0.8
    descriptor_grid: int = 4
    descriptor_bins: int = 8
    descriptor_clamp: float = 0.2

    def __post_init__(self):
        if self.scales_per_octave < 1:
            raise ValueError("scales_per_octave must be >= 1")
        if self.base_sigma <= 0:
            raise ValueError("base_sigma must be positive")
        if not 0 < self.contrast_threshold < 1:
            raise ValueError("contrast_threshold must be in (0, 1)")
        if self.edge_ratio < 1:
            raise ValueError("edge_ratio must be >= 1")
        if self.orientation_bins < 4:
            raise ValueError("orientation_bins must be >= 4")
        if not 0 < self.peak_ratio <= 1:
            raise ValueError("peak_ratio must be in (0, 1]")
        if self.descriptor_grid < 1 or self.descriptor_bins < 2:
            raise ValueError("descriptor grid/bins out of range")
        if not 0 < self.descriptor_clamp <= 1:
            raise ValueError("descriptor_clamp must be in (0, 1]")

    @property
    def descriptor_length(self) -> int:
        return self.descriptor_grid * self.descriptor_grid * self.descriptor_bins

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DetectorConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = _parse_value(value)
        return cls(**kwargs)

    def digest(self) -> int:
        """64-bit digest of the canonical text form."""
        h = hashlib.blake2b(self.to_text().encode("utf-8"), digest_size=8)
        return int.from_bytes(h.digest(), "little")


def _parse_value(value: str):
    if value == "true":
        return True
    if value == "false":
        return False
    try:
        return int(value)
    except ValueError:
        return float(value)


@dataclass(frozen=True)
class MatchConfig:
    """Graph matching and score weighting parameters.

    ``ratio`` is the nearest/second-nearest acceptance ratio for
    correspondences; ``multipliers`` are the weights for distances
    falling within 1, 2 and 3 standard deviations of the pair-distance
    mean; ``blend`` mixes the weighted vertex and edge scores
    (0.5 = plain average); ``edge_weights`` scale the three edge
    attribute components (length, orientation delta, log-scale delta)
    inside the edge distance.
    """

    ratio: float = 0.8
    multipliers: tuple[float, float, float] = (0.075, 0.05, 0.025)
    blend: float = 0.5
    edge_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not 0 < self.ratio <= 1:
            raise ValueError("ratio must be in (0, 1]")
        if len(self.multipliers) != 3 or any(m < 0 for m in self.multipliers):
            raise ValueError("multipliers must be three non-negative reals")
        if not 0 <= self.blend <= 1:
            raise ValueError("blend must be in [0, 1]")
        if len(self.edge_weights) != 3 or any(w < 0 for w in self.edge_weights):
            raise ValueError("edge_weights must be three non-negative reals")
