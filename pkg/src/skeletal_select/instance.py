"""Instance files: pydantic schema and conversion into domains, covers and mappings."""

from __future__ import annotations

import json
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .covers import Cover, CoverError
from .domain import Domain, DomainError
from .fillers import FillerOracle
from .moduli import Modulus, ModulusError
from .regions import Region, RegionError, SetValuedMap, o_map
from .scenarios import arc_family, cross_family

TASKS = ("nerve", "canonical", "skeletal", "select-eps", "select", "michael")


class InstanceError(ValueError):
    """Schema or consistency problem, located by a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"
        self.message = message


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- regions -----------------------------------------------------------------


class BallSpec(Strict):
    c: list[float] = Field(min_length=1)
    r: float = Field(ge=0)


class BoxSpec(Strict):
    lo: list[float] = Field(min_length=1)
    hi: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _order(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi differ in length")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box with hi < lo")
        return self


class PolySpec(Strict):
    verts: list[list[float]] = Field(min_length=1)


class MaskSpec(Strict):
    origin: list[float] = Field(min_length=1)
    step: float = Field(gt=0)
    bits: list


class DilateSpec(Strict):
    r: float = Field(ge=0)
    of: ShapeSpec


class ShapeSpec(Strict):
    ball: Optional[BallSpec] = None
    box: Optional[BoxSpec] = None
    poly: Optional[PolySpec] = None
    mask: Optional[MaskSpec] = None
    inter: Optional[list[ShapeSpec]] = Field(default=None, min_length=1)
    dilate: Optional[DilateSpec] = None
    pad: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _one(self):
        keys = [k for k in ("ball", "box", "poly", "mask", "inter", "dilate") if getattr(self, k) is not None]
        if len(keys) != 1:
            raise ValueError(f"shape needs exactly one of ball/box/poly/mask/inter/dilate, got {keys}")
        return self


DilateSpec.model_rebuild()


class RegionSpec(Strict):
    union: list[ShapeSpec] = Field(min_length=1)
    open: bool = False
    star_center: Optional[list[float]] = None


# -- mappings, covers, domains ------------------------------------------------


class FamilySpec(Strict):
    kind: Literal["arcs", "crosses"]
    n_cells: int = Field(default=10, ge=1)
    step_deg: float = 2.0
    span_deg: float = Field(default=120.0, gt=0, lt=360)
    base_deg: float = 60.0
    block: int = Field(default=5, ge=1)
    drift: float = 0.04
    arm_growth: float = 0.02
    half_len: float = Field(default=0.28, gt=0)
    half_width: float = Field(default=0.06, gt=0)


class MappingSpec(Strict):
    cells: Optional[list[int]] = None
    values: Optional[list[RegionSpec]] = Field(default=None, min_length=1)
    constant: Optional[RegionSpec] = None
    family: Optional[FamilySpec] = None
    neighborhood: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one(self):
        forms = [self.values is not None, self.constant is not None, self.family is not None]
        if sum(forms) != 1:
            raise ValueError("mapping needs exactly one of values/constant/family")
        if self.cells is not None and self.values is None:
            raise ValueError("cells only go with values")
        return self


class CoverBall(Strict):
    center: list[float] = Field(min_length=1)
    radius: float = Field(gt=0)


class CoverShape(Strict):
    ball: Optional[CoverBall] = None
    box: Optional[BoxSpec] = None
    points: Optional[list[int]] = Field(default=None, min_length=1)

    @model_validator(mode="after")
    def _one(self):
        if sum(getattr(self, k) is not None for k in ("ball", "box", "points")) != 1:
            raise ValueError("cover shape needs exactly one of ball/box/points")
        return self


class CoverMember(Strict):
    label: str
    shape: CoverShape


class DomainSpec(Strict):
    lo: Optional[list[float]] = None
    hi: Optional[list[float]] = None
    shape: Optional[list[int]] = None
    points: Optional[list[list[float]]] = None
    edges: Optional[list[list[int]]] = None

    @model_validator(mode="after")
    def _form(self):
        grid = self.lo is not None or self.hi is not None or self.shape is not None
        if grid == (self.points is not None):
            raise ValueError("domain needs either lo/hi/shape or points")
        if grid and (self.lo is None or self.hi is None or self.shape is None):
            raise ValueError("grid domain needs lo, hi and shape")
        return self


class ModulusSpec(Strict):
    linear: Optional[dict[Literal["c"], float]] = None
    table: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def _one(self):
        if (self.linear is None) == (self.table is None):
            raise ValueError("modulus needs exactly one of linear/table")
        return self


class OracleSpec(Strict):
    strategy: Literal["auto", "path-bfs", "star-cone", "convex-linear"] = "auto"
    star_center: Optional[list[float]] = None
    grid_step: Optional[float] = Field(default=None, gt=0)


class Params(Strict):
    eps: Optional[float] = Field(default=None, gt=0)
    n: Optional[int] = Field(default=None, ge=0)
    tol: float = Field(default=1e-6, gt=0)
    depth: int = Field(default=3, ge=1, le=6)
    seed: int = 0
    perturb: float = Field(default=0.0, ge=0)
    max_jump: Optional[float] = Field(default=None, gt=0)


class InstanceSpec(Strict):
    task: Literal["nerve", "canonical", "skeletal", "select-eps", "select", "michael"]
    domain: DomainSpec
    cover: Optional[list[CoverMember]] = Field(default=None, min_length=1)
    mapping: Optional[MappingSpec] = None
    mappings: Optional[list[MappingSpec]] = Field(default=None, min_length=1)
    modulus: Optional[ModulusSpec] = None
    moduli: Optional[list[ModulusSpec]] = None
    oracle: OracleSpec = OracleSpec()
    params: Params = Params()

    @model_validator(mode="after")
    def _task_fields(self):
        need = {
            "nerve": ["cover"],
            "canonical": ["cover"],
            "skeletal": ["mappings"],
            "select": ["mappings"],
            "select-eps": ["mappings"],
            "michael": ["mapping", "modulus"],
        }[self.task]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"task {self.task!r} needs {missing}")
        if self.task in ("select-eps", "michael") and self.params.eps is None:
            raise ValueError(f"task {self.task!r} needs params.eps")
        if self.task == "michael" and self.params.n is None:
            raise ValueError("task 'michael' needs params.n")
        if self.task == "select-eps" and self.modulus is None and self.moduli is None:
            raise ValueError("task 'select-eps' needs modulus or moduli")
        return self


# -- conversion --------------------------------------------------------------


def _pointer(loc) -> str:
    return "".join(f"/{p}" for p in loc)


def _shape_dict(s: ShapeSpec) -> dict:
    out = s.model_dump(exclude_none=True, exclude={"pad", "inter", "dilate"})
    if s.inter is not None:
        out["inter"] = [_shape_dict(x) for x in s.inter]
    if s.dilate is not None:
        out["dilate"] = {"r": s.dilate.r, "of": _shape_dict(s.dilate.of)}
    if s.pad:
        out["pad"] = s.pad
    return out


def _region(spec: RegionSpec, where: str) -> Region:
    d = {"union": [_shape_dict(s) for s in spec.union], "open": spec.open}
    if spec.star_center is not None:
        d["star_center"] = spec.star_center
    try:
        return Region.from_dict(d)
    except (RegionError, ValueError) as e:
        raise InstanceError(where, str(e)) from e


class Instance:
    """Validated instance with its domain and data structures built."""

    def __init__(self, spec: InstanceSpec, raw: dict | None = None):
        self.spec = spec
        self.raw = raw
        self.task = spec.task
        self.params = spec.params
        self.domain = self._domain()
        self.cover = self._cover() if spec.cover is not None else None
        self.mapping = self._mapping(spec.mapping, "/mapping") if spec.mapping is not None else None
        self.mappings = ([self._mapping(m, f"/mappings/{i}") for i, m in enumerate(spec.mappings)]
                         if spec.mappings is not None else None)
        self.modulus = self._modulus(spec.modulus, "/modulus") if spec.modulus is not None else None
        self.moduli = ([self._modulus(m, f"/moduli/{i}") for i, m in enumerate(spec.moduli)]
                       if spec.moduli is not None else None)
        o = spec.oracle
        self.oracle = FillerOracle(o.strategy, None if o.star_center is None else tuple(o.star_center), o.grid_step)
        self._check_dims()

    @classmethod
    def from_dict(cls, d) -> Instance:
        try:
            spec = InstanceSpec.model_validate(d)
        except ValidationError as e:
            err = e.errors()[0]
            raise InstanceError(_pointer(err["loc"]), err["msg"]) from None
        return cls(spec, d)

    @classmethod
    def from_json(cls, text: str) -> Instance:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise InstanceError("/", f"invalid JSON: {e}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> Instance:
        with open(path) as fh:
            return cls.from_json(fh.read())

    def _domain(self) -> Domain:
        d = self.spec.domain
        try:
            if d.points is not None:
                return Domain.from_points(d.points, d.edges or ())
            return Domain.grid(d.lo, d.hi, d.shape)
        except (DomainError, ValueError) as e:
            raise InstanceError("/domain", str(e)) from e

    def _cover(self) -> Cover:
        items = [{"label": m.label, "shape": m.shape.model_dump(exclude_none=True)} for m in self.spec.cover]
        for i, it in enumerate(items):
            sh = it["shape"]
            dim = len(next(iter(sh.get("ball", sh.get("box", {"center": [0] * self.domain.d})).values())))
            if "points" not in sh and dim != self.domain.d:
                raise InstanceError(f"/cover/{i}/shape", f"dimension {dim} differs from domain dimension")
            if "points" in sh and max(sh["points"]) >= self.domain.n:
                raise InstanceError(f"/cover/{i}/shape/points", "point index outside the domain")
        try:
            return Cover.from_shapes(self.domain, items)
        except CoverError as e:
            raise InstanceError("/cover", str(e)) from e

    def _mapping(self, m: MappingSpec, where: str) -> SetValuedMap:
        phi = self._base_mapping(m, where)
        return phi if m.neighborhood is None else o_map(phi, m.neighborhood)

    def _base_mapping(self, m: MappingSpec, where: str) -> SetValuedMap:
        n = self.domain.n
        if m.constant is not None:
            return SetValuedMap.constant(_region(m.constant, f"{where}/constant"), n)
        if m.family is not None:
            f = m.family
            try:
                if f.kind == "arcs":
                    if self.domain.d != 1:
                        raise ValueError("arc family needs a 1-D domain")
                    return arc_family(self.domain, f.n_cells, f.step_deg, f.span_deg, f.base_deg)
                return cross_family(self.domain, f.block, f.drift, f.arm_growth, f.half_len, f.half_width)
            except ValueError as e:
                raise InstanceError(f"{where}/family", str(e)) from e
        vals = [_region(v, f"{where}/values/{i}") for i, v in enumerate(m.values)]
        if m.cells is None:
            if len(vals) != n:
                raise InstanceError(f"{where}/values", f"per-point values need {n} entries, got {len(vals)}")
            cells = np.arange(n)
        else:
            if len(m.cells) != n:
                raise InstanceError(f"{where}/cells", f"need {n} cell ids, got {len(m.cells)}")
            cells = np.asarray(m.cells, dtype=int)
            bad = np.flatnonzero((cells < 0) | (cells >= len(vals)))
            if len(bad):
                raise InstanceError(f"{where}/cells/{int(bad[0])}", "cell id has no value")
        ms = {v.m for v in vals}
        if len(ms) != 1:
            raise InstanceError(f"{where}/values", "values live in different dimensions")
        return SetValuedMap(cells, vals)

    @staticmethod
    def _modulus(m: ModulusSpec, where: str) -> Modulus:
        try:
            return Modulus.from_dict(m.model_dump(exclude_none=True))
        except ModulusError as e:
            raise InstanceError(where, str(e)) from e

    def _check_dims(self):
        maps = self.mappings or ([self.mapping] if self.mapping is not None else [])
        if len({m.m for m in maps}) > 1:
            raise InstanceError("/mappings", "mappings live in different value dimensions")
        d, n = self.domain.d, self.params.n
        if self.task in ("skeletal", "select") and d > len(self.mappings) - 1:
            raise InstanceError("/mappings", f"domain dimension {d} needs at least {d + 1} mappings")
        if self.task == "select-eps":
            top = len(self.mappings) - 1
            if d > top:
                raise InstanceError("/mappings", f"domain dimension {d} needs at least {d + 1} mappings")
            if self.moduli is not None and len(self.moduli) != top:
                raise InstanceError("/moduli", f"need one modulus per level 0..{top - 1}")
        if self.task == "michael" and d > n + 1:
            raise InstanceError("/params/n", f"domain dimension {d} needs n >= {d - 1}")

    @property
    def value_resolution(self) -> float:
        """Coarsest mask step among the target values (0 without masks)."""
        maps = self.mappings or ([self.mapping] if self.mapping is not None else [])
        res = 0.0
        for m in maps:
            for v in m.values:
                res = max(res, _mask_step(v.to_dict()))
        return res


def _mask_step(d) -> float:
    if isinstance(d, dict):
        out = float(d["step"]) if "bits" in d and "step" in d else 0.0
        return max([out] + [_mask_step(v) for v in d.values()])
    if isinstance(d, list):
        return max([0.0] + [_mask_step(v) for v in d])
    return 0.0
