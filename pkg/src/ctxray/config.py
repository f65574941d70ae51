"""Pipeline configuration: one JSON document covering every stage."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ArgumentError
from .imgops import GhtParams
from .projection import ProjectionConfig
from .regions import RegionRuleConfig


@dataclass(frozen=True)
class QaConfig:
    z_max: float = 3.0
    min_rib_pairs: int = 9
    fail_on_class_deviation: bool = False

    def __post_init__(self):
        if self.z_max <= 0:
            raise ArgumentError("z_max must be positive")
        if self.min_rib_pairs < 0:
            raise ArgumentError("min_rib_pairs must be >= 0")


@dataclass(frozen=True)
class PipelineConfig:
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    regions: RegionRuleConfig = field(default_factory=RegionRuleConfig)
    qa: QaConfig = field(default_factory=QaConfig)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        proj = dict(data.get("projection", {}))
        if "ght" in proj:
            proj["ght"] = GhtParams(**proj["ght"])
        for key in ("output_size", "clahe_tiles", "hu_window"):
            if key in proj:
                proj[key] = tuple(proj[key])
        reg = dict(data.get("regions", {}))
        if "lung_zone_fractions" in reg:
            reg["lung_zone_fractions"] = tuple(reg["lung_zone_fractions"])
        return cls(
            projection=ProjectionConfig(**proj),
            regions=RegionRuleConfig(**reg),
            qa=QaConfig(**data.get("qa", {})),
        )

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        """Stable hash of the resolved configuration."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]
