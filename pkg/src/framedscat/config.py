"""Sweep configuration: JSON schema, validation and model construction."""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .models import DELTA_EDGE, FiniteHermitian, Frame, FreeJacobi, MultiplicationGrid, Perturbation


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"config error at {path or '<root>'}: {message}")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ComplexMatrix(_Strict):
    re: list[list[float]]
    im: Optional[list[list[float]]] = None

    def array(self) -> np.ndarray:
        A = np.asarray(self.re, dtype=float)
        if self.im is not None:
            B = np.asarray(self.im, dtype=float)
            if B.shape != A.shape:
                raise ValueError("re and im parts differ in shape")
            return A + 1j * B
        return A.astype(complex)


MatrixLike = Union[list[list[float]], ComplexMatrix]


def _matrix(m: MatrixLike) -> np.ndarray:
    if isinstance(m, ComplexMatrix):
        return m.array()
    return np.asarray(m, dtype=float).astype(complex)


class FreeJacobiSpec(_Strict):
    type: Literal["free_jacobi"] = "free_jacobi"
    edge_guard: float = Field(DELTA_EDGE, gt=0, lt=1)


class RandomHermitianSpec(_Strict):
    dim: int = Field(30, ge=1, le=2000)
    seed: Optional[int] = None
    scale: float = Field(1.0, gt=0)


class FiniteHermitianSpec(_Strict):
    type: Literal["finite_hermitian"] = "finite_hermitian"
    H: Optional[MatrixLike] = None
    random: Optional[RandomHermitianSpec] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.H is None) == (self.random is None):
            raise ValueError("give exactly one of 'H' or 'random'")
        return self


class AtomSpec(_Strict):
    energy: float
    vector: list[float]


class MultiplicationGridSpec(_Strict):
    type: Literal["multiplication_grid"] = "multiplication_grid"
    interval: tuple[float, float] = (-1.0, 1.0)
    nodes: int = Field(24, ge=2, le=400)
    channels: int = Field(1, ge=1)
    degree: int = Field(3, ge=0)
    seed: Optional[int] = None
    atoms: list[AtomSpec] = []

    @field_validator("interval")
    @classmethod
    def _ordered(cls, v):
        if not v[1] > v[0]:
            raise ValueError("interval must satisfy a < b")
        return v


ModelSpec = Annotated[
    Union[FreeJacobiSpec, FiniteHermitianSpec, MultiplicationGridSpec], Field(discriminator="type")
]


class FrameSpec(_Strict):
    law: Literal["geometric", "constant", "explicit"] = "geometric"
    n: int = Field(200, ge=1, le=2000)
    ratio: float = Field(2.0**-0.5, gt=0, lt=1)
    value: float = Field(1.0, gt=0)
    weights: Optional[list[float]] = None
    tail_bound: float = Field(0.0, ge=0)


class PerturbationSpec(_Strict):
    type: Literal["random_lowrank", "dense", "zero"] = "random_lowrank"
    rank: int = Field(2, ge=0)
    seed: Optional[int] = None
    support: Optional[int] = Field(8, ge=1)
    norm: float = Field(1.0, gt=0)
    values: Optional[MatrixLike] = None
    as_potential: bool = False

    @model_validator(mode="after")
    def _dense_needs_values(self):
        if self.type == "dense" and self.values is None:
            raise ValueError("type 'dense' needs 'values'")
        return self


class LambdaGrid(_Strict):
    min: float = -1.9
    max: float = 1.9
    count: int = Field(21, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.max < self.min:
            raise ValueError("max must be >= min")
        if self.count == 1 and self.max != self.min:
            raise ValueError("a one-point grid needs min == max")
        return self

    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


class Tolerances(_Strict):
    unitary: float = Field(1e-6, gt=0)
    wave: float = Field(1e-6, gt=0)
    multiplicativity: float = Field(1e-6, gt=0)
    route: float = Field(1e-4, gt=0)
    det: float = Field(1e-6, gt=0)
    xi_route: float = Field(1e-4, gt=0)
    int_dist: float = Field(1e-3, gt=0)
    aronszajn: float = Field(1e-10, gt=0)
    im_sandwich: float = Field(1e-9, gt=0)
    gram: float = Field(1e-10, gt=0)
    eps_res: float = Field(1e-7, gt=0)
    eps_ode: float = Field(1e-8, gt=0)
    finite_xi: float = Field(1e-2, gt=0)
    finite_xi_a: float = Field(1e-6, gt=0)
    krein: float = Field(1e-3, gt=0)
    texp_det: float = Field(1e-8, gt=0)
    texp_semigroup: float = Field(1e-9, gt=0)
    example_pi: float = Field(1e-3, gt=0)
    runtime_s: float = Field(60.0, gt=0)

    def scaled(self, factor: float) -> "Tolerances":
        return Tolerances(**{k: v * factor for k, v in self.model_dump().items()})


class MuSpec(_Strict):
    r_steps: int = Field(512, ge=1)
    theta_points: int = Field(64, ge=1)
    logdet_steps: int = Field(256, ge=1)


class FiniteCheckSpec(_Strict):
    """Setup of the finite-model ground-truth checks."""

    dim: int = Field(30, ge=2, le=400)
    rank: int = Field(3, ge=0)
    seed: int = 11
    margin: float = Field(0.05, gt=0)
    lambda_points: int = Field(161, ge=1)


class TexpSuiteSpec(_Strict):
    paths: int = Field(20, ge=1)
    dim: int = Field(6, ge=1)
    seed: int = 5


class OutputSpec(_Strict):
    dir: str = "out"


class SweepConfig(_Strict):
    model: ModelSpec = FreeJacobiSpec()
    frame: FrameSpec = FrameSpec()
    perturbation: PerturbationSpec = PerturbationSpec()
    lambda_grid: LambdaGrid = LambdaGrid()
    r_values: list[float] = [0.3, 0.7, 1.0]
    r_window: tuple[float, float] = (-5.0, 5.0)
    resonance_samples: int = Field(400, ge=3)
    routes: list[Literal["wave_product", "stationary", "texp"]] = ["wave_product", "stationary", "texp"]
    tolerances: Tolerances = Tolerances()
    mu: MuSpec = MuSpec()
    finite_check: FiniteCheckSpec = FiniteCheckSpec()
    texp_suite: TexpSuiteSpec = TexpSuiteSpec()
    example_n: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)
    output: OutputSpec = OutputSpec()

    @field_validator("r_values")
    @classmethod
    def _finite_r(cls, v):
        if not v:
            raise ValueError("at least one coupling value is required")
        if not all(np.isfinite(x) for x in v):
            raise ValueError("coupling values must be finite")
        return sorted(set(float(x) for x in v))

    @model_validator(mode="after")
    def _consistency(self):
        m = self.model
        if isinstance(m, FreeJacobiSpec):
            lo, hi = -2.0 + m.edge_guard, 2.0 - m.edge_guard
            g = self.lambda_grid
            if g.min < lo or g.max > hi:
                raise ValueError(
                    f"@lambda_grid: [{g.min}, {g.max}] outside the admissible window [{lo:g}, {hi:g}]"
                )
        n = self.model_dim()
        if n is not None and n != self.frame.n and self.frame.law != "explicit":
            raise ValueError(f"@frame.n: {self.frame.n} does not match the model dimension {n}")
        if self.frame.law == "explicit":
            if not self.frame.weights:
                raise ValueError("@frame.weights: frame law 'explicit' needs 'weights'")
        return self

    def model_dim(self) -> Optional[int]:
        m = self.model
        if isinstance(m, FiniteHermitianSpec):
            return len(m.H.re if isinstance(m.H, ComplexMatrix) else m.H) if m.H is not None else m.random.dim
        return None

    # ------------------------------------------------------------------ builders
    def derived_seed(self, local: Optional[int], offset: int) -> int:
        return int(local) if local is not None else (self.seed + offset) % 2**63

    def build_frame(self) -> Frame:
        f = self.frame
        if f.law == "geometric":
            return Frame.geometric(f.n, f.ratio)
        if f.law == "constant":
            return Frame.constant(f.n, f.value)
        return Frame(np.asarray(f.weights, float), f.tail_bound)

    def build_model(self, frame: Frame):
        m = self.model
        if isinstance(m, FreeJacobiSpec):
            return FreeJacobi(edge_guard=m.edge_guard)
        if isinstance(m, FiniteHermitianSpec):
            if m.H is not None:
                return FiniteHermitian(_matrix(m.H))
            return FiniteHermitian(random_hermitian(m.random.dim, self.derived_seed(m.random.seed, 1), m.random.scale))
        grid = MultiplicationGrid.random(m.interval, frame.n, m.channels, m.degree,
                                         self.derived_seed(m.seed, 2), K=m.nodes)
        atoms = tuple((a.energy, np.asarray(a.vector, float)) for a in m.atoms)
        return MultiplicationGrid(grid.interval, grid.amplitudes, atoms)

    def build_perturbation(self, frame: Frame) -> Perturbation:
        p = self.perturbation
        if p.type == "zero":
            return Perturbation.zero(frame.n)
        if p.type == "dense":
            A = _matrix(p.values)
            if A.shape != (frame.n, frame.n):
                raise ConfigError("perturbation.values", f"shape {A.shape} does not match frame size {frame.n}")
            return Perturbation.from_potential(A, frame) if p.as_potential else Perturbation(A)
        return Perturbation.random_lowrank(frame.n, p.rank, self.derived_seed(p.seed, 3),
                                           support=p.support, norm=p.norm)

    def build(self):
        frame = self.build_frame()
        return self.build_model(frame), frame, self.build_perturbation(frame)

    def normalized(self) -> dict:
        return self.model_dump(mode="json")


def random_hermitian(dim: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """GUE-like matrix with spectrum roughly in ``[-2 scale, 2 scale]``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (A + A.conj().T) / np.sqrt(8.0 * dim)


def _path(loc) -> str:
    parts = []
    for x in loc:
        if isinstance(x, int):
            parts.append(f"[{x}]")
        elif x in ("free_jacobi", "finite_hermitian", "multiplication_grid"):
            continue
        else:
            parts.append(("." if parts else "") + str(x))
    return "".join(parts)


def parse_config(data: dict) -> SweepConfig:
    """Validate a configuration mapping; raises :class:`ConfigError`."""
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a JSON object")
    try:
        cfg = SweepConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        path, msg = _path(err["loc"]), err["msg"]
        # cross-field checks name their field as "@path: message"
        m = re.match(r"^Value error, @([\w.\[\]]+): (.*)$", msg, re.S)
        if m:
            path = ".".join(p for p in (path, m.group(1)) if p)
            msg = m.group(2)
        raise ConfigError(path, msg) from None
    try:
        cfg.build()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    return cfg


def load_config(path) -> SweepConfig:
    """Read and validate a JSON configuration file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {p}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(data)


def dump_config(cfg: SweepConfig) -> str:
    return json.dumps(cfg.normalized(), indent=2, sort_keys=True)
