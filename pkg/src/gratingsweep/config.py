"""Run configuration, stored as a flat JSON document.

Example
-------
>>> cfg = RunConfig.from_dict({"geometry": {"L": 4.0, "scatterers": []}})
>>> RunConfig.from_json(cfg.to_json()) == cfg
True
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .bem import ScattererSpec, build_mesh
from .greens import EwaldConfig, LatticeParams
from .reference import ReferenceConfig
from .sweep import SweepConfig


class ConfigError(ValueError):
    pass


@dataclass
class Scatterer:
    cx: float
    cy: float
    r: float
    elements: int = 120


@dataclass
class Geometry:
    L: float = 4.0
    c: float = 1.0
    theta_degrees: float = 90.0
    scatterers: list = field(default_factory=list)


@dataclass
class Band:
    omega_min: float = 0.0
    omega_max: float = 2.0


@dataclass
class PadeSection:
    M: int = 3
    N: int = 3
    eps_T: float = 1e-3
    Imin_factor: float = 1e-3
    Imax_factor: float = 1e-2


@dataclass
class EwaldSection:
    mode: str = "adaptive"
    trunc_rel_tol: float = 1e-7
    H: float = 9.0
    K: int = 13
    eps: float = 1e-16


@dataclass
class ReferenceSection:
    panels: int = 200
    points_per_panel: int = 10


@dataclass
class OutputSection:
    csv_path: str | None = None
    json_path: str | None = None
    grid_points: int = 200


_SECTIONS = {"geometry": Geometry, "band": Band, "pade": PadeSection, "ewald": EwaldSection,
             "reference": ReferenceSection, "output": OutputSection}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad section {where!r}: {exc}") from exc


@dataclass
class RunConfig:
    geometry: Geometry = field(default_factory=Geometry)
    band: Band = field(default_factory=Band)
    pade: PadeSection = field(default_factory=PadeSection)
    ewald: EwaldSection = field(default_factory=EwaldSection)
    reference: ReferenceSection = field(default_factory=ReferenceSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown sections: {sorted(unknown)}")
        parts = {k: _build(c, data.get(k, {}), k) for k, c in _SECTIONS.items()}
        geo = parts["geometry"]
        geo.scatterers = [s if isinstance(s, Scatterer) else _build(Scatterer, s, "scatterer")
                          for s in geo.scatterers]
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc

    # -- checks and derived objects ---------------------------------------

    def validate(self):
        g = self.geometry
        for name in ("L", "c"):
            if not getattr(g, name) > 0:
                raise ConfigError(f"geometry.{name} must be positive")
        if not (0 < g.theta_degrees <= 90):
            raise ConfigError("geometry.theta_degrees must lie in (0, 90]")
        for s in g.scatterers:
            if not s.r > 0 or s.elements < 8:
                raise ConfigError("each scatterer needs r > 0 and at least 8 elements")
        b = self.band
        if not (0 <= b.omega_min < b.omega_max):
            raise ConfigError("band needs 0 <= omega_min < omega_max")
        p = self.pade
        if p.M < 1 or p.N < 0 or not p.eps_T > 0:
            raise ConfigError("pade needs M >= 1, N >= 0, eps_T > 0")
        if not (0 < p.Imin_factor < p.Imax_factor):
            raise ConfigError("pade needs 0 < Imin_factor < Imax_factor")
        e = self.ewald
        if e.mode not in ("optimal", "adaptive"):
            raise ConfigError("ewald.mode must be 'optimal' or 'adaptive'")
        if not (0 < e.trunc_rel_tol < 1) or not e.H > 0 or e.K < 1 or not e.eps > 0:
            raise ConfigError("ewald parameters out of range")
        r = self.reference
        if r.panels < 1 or r.points_per_panel < 2:
            raise ConfigError("reference needs panels >= 1 and points_per_panel >= 2")
        if self.output.grid_points < 0:
            raise ConfigError("output.grid_points must be nonnegative")

    def lattice(self) -> LatticeParams:
        g = self.geometry
        return LatticeParams(g.L, g.c, math.radians(g.theta_degrees))

    def ewald_config(self) -> EwaldConfig:
        e = self.ewald
        return EwaldConfig(mode=e.mode, trunc_rel_tol=e.trunc_rel_tol, H_cap=e.H, K_terms=e.K,
                           eps_breakdown=e.eps)

    def sweep_config(self) -> SweepConfig:
        p = self.pade
        K2 = (p.M + p.N) ** 2
        return SweepConfig(p.M, p.N, p.eps_T, p.Imin_factor * K2, p.Imax_factor * K2)

    def reference_config(self) -> ReferenceConfig:
        return ReferenceConfig(self.reference.panels, self.reference.points_per_panel)

    def mesh(self):
        specs = [ScattererSpec((s.cx, s.cy), s.r, s.elements) for s in self.geometry.scatterers]
        return build_mesh(specs, self.geometry.L)

    @property
    def band_tuple(self) -> tuple:
        return (self.band.omega_min, self.band.omega_max)


def grating_config(elements: int = 120, theta_degrees: float = 90.0, **kw) -> RunConfig:
    """The five-layer grating of circles (radius 0.75, period 4) used in the experiments."""
    scat = [Scatterer(2.0, 4.0 * i, 0.75, elements) for i in range(5)]
    cfg = RunConfig(geometry=Geometry(4.0, 1.0, theta_degrees, scat), **kw)
    cfg.validate()
    return cfg
