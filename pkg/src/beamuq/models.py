"""Analytic wave-speed fields and high-frequency initial data.

Every model returns exact values together with exact first and second spatial
derivatives, evaluated elementwise over batched inputs: positions have shape
(..., n) and random parameters (..., N), with matching batch dimensions.

Model parameters are bound either to literal numbers or to coordinates of the
random vector through :class:`ParamRef`, so one catalog entry covers both the
deterministic and the stochastic variants of a model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, PhaseSingularityError
from .stochastic_space import RandomSpace

__all__ = [
    "ParamRef",
    "SpeedField",
    "PhaseModel",
    "GaussianPulse",
    "InitialWaveData",
    "build_speed",
    "build_phase",
    "build_initial_data",
    "check_speed_positivity",
]

_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class ParamRef:
    """A model parameter: a literal value or a (possibly negated) y-coordinate."""

    value: float | None = None
    y_index: int | None = None
    negate: bool = False

    @staticmethod
    def parse(raw) -> "ParamRef":
        if isinstance(raw, ParamRef):
            return raw
        if isinstance(raw, (int, float)):
            return ParamRef(value=float(raw))
        if isinstance(raw, dict):
            if "y" in raw:
                return ParamRef(y_index=int(raw["y"]))
            if "neg_y" in raw:
                return ParamRef(y_index=int(raw["neg_y"]), negate=True)
        raise ConfigurationError(f"cannot parse parameter reference {raw!r}")

    def resolve(self, y: np.ndarray) -> np.ndarray:
        """Value as an array broadcasting with y's batch dimensions."""
        if self.y_index is None:
            return np.asarray(self.value)
        v = np.asarray(y)[..., self.y_index]
        return -v if self.negate else v

    def bounds(self, space: RandomSpace) -> tuple[float, float]:
        """Range of the parameter as y varies over the random domain."""
        if self.y_index is None:
            return (self.value, self.value)
        lo, hi = space.bounds[self.y_index]
        return (-hi, -lo) if self.negate else (lo, hi)


def _resolve_vector(refs: Sequence[ParamRef], y: np.ndarray) -> np.ndarray:
    return np.stack([np.broadcast_to(r.resolve(y), np.asarray(y).shape[:-1])
                     for r in refs], axis=-1)


# ---------------------------------------------------------------------------
# wave-speed catalog


class SpeedField:
    """Wave speed c(x, y) with exact gradient and Hessian."""

    dim: int

    def eval(self, x: np.ndarray, y: np.ndarray):
        """Return (c, grad, hess) with shapes (...,), (..., n), (..., n, n)."""
        raise NotImplementedError

    def kernel_spec(self, y_rows: np.ndarray):
        """(kernel id, packed parameter rows) for the compiled propagation path,
        or None when only the generic numpy path applies."""
        return None


@dataclass(frozen=True)
class ConstantSpeed(SpeedField):
    """Spatially constant speed, possibly random."""

    value: ParamRef
    dim: int = 1

    def eval(self, x, y):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        c = np.broadcast_to(self.value.resolve(y), batch).astype(float)
        n = x.shape[-1]
        return c, np.zeros(batch + (n,)), np.zeros(batch + (n, n))

    def kernel_spec(self, y_rows):
        vals = np.broadcast_to(self.value.resolve(y_rows), (len(y_rows),))
        return 0, np.ascontiguousarray(vals[:, None], dtype=float)


@dataclass(frozen=True)
class DoubleBumpSpeed(SpeedField):
    """1D speed 1 + (exp(-(x-1)^2) + b*exp(-(x+1)^2))/2 with random right-bump size b."""

    second_bump: ParamRef
    dim: int = 1

    def eval(self, x, y):
        x = np.asarray(x, dtype=float)
        x0 = x[..., 0]
        b = self.second_bump.resolve(y)
        e1 = np.exp(-((x0 - 1.0) ** 2))
        e2 = np.exp(-((x0 + 1.0) ** 2))
        c = 1.0 + 0.5 * (e1 + b * e2)
        dc = 0.5 * (-2.0 * (x0 - 1.0) * e1 - 2.0 * b * (x0 + 1.0) * e2)
        d2c = 0.5 * ((4.0 * (x0 - 1.0) ** 2 - 2.0) * e1
                     + b * (4.0 * (x0 + 1.0) ** 2 - 2.0) * e2)
        return c, dc[..., None], d2c[..., None, None]

    def kernel_spec(self, y_rows):
        vals = np.broadcast_to(self.second_bump.resolve(y_rows), (len(y_rows),))
        return 1, np.ascontiguousarray(vals[:, None], dtype=float)


@dataclass(frozen=True)
class LensSpeed(SpeedField):
    """2D lens c = 1 - a*exp(-(b*x1^2 - g*x2^2)).

    The exponent keeps the sign structure of the catalog definition: the speed
    dips along the x1 axis and decreases with |x2|, so it is positive only on
    a bounded corridor around the axis.  Positivity on the declared domain is
    checked at construction time via :func:`check_speed_positivity`.
    """

    strength: ParamRef
    width_x1: ParamRef
    width_x2: ParamRef
    dim: int = 2

    def eval(self, x, y):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        a = self.strength.resolve(y)
        b = self.width_x1.resolve(y)
        g = self.width_x2.resolve(y)
        e = np.exp(-(b * x1**2 - g * x2**2))
        c = 1.0 - a * e
        d1 = a * 2.0 * b * x1 * e          # -a * dE/dx1
        d2 = -a * 2.0 * g * x2 * e         # -a * dE/dx2
        h11 = -a * (4.0 * b**2 * x1**2 - 2.0 * b) * e
        h22 = -a * (4.0 * g**2 * x2**2 + 2.0 * g) * e
        h12 = a * 4.0 * b * g * x1 * x2 * e
        grad = np.stack([d1, d2], axis=-1)
        hess = np.stack([np.stack([h11, h12], axis=-1),
                         np.stack([h12, h22], axis=-1)], axis=-2)
        return c, grad, hess

    def kernel_spec(self, y_rows):
        B = len(y_rows)
        cols = [np.broadcast_to(r.resolve(y_rows), (B,))
                for r in (self.strength, self.width_x1, self.width_x2)]
        return 2, np.ascontiguousarray(np.stack(cols, axis=-1), dtype=float)


def check_speed_positivity(field: SpeedField, domain_box, space: RandomSpace,
                           samples_per_dim: int = 13) -> float:
    """Coarsely sample c over domain_box x Gamma; raise if any value <= 0.

    Returns the smallest sampled speed.
    """
    axes = [np.linspace(lo, hi, samples_per_dim) for lo, hi in domain_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=-1)
    y_axes = [np.linspace(lo, hi, 5) for lo, hi in space.bounds]
    cmin = np.inf
    for y in np.stack(np.meshgrid(*y_axes, indexing="ij"), axis=-1).reshape(-1, space.dim):
        c, _, _ = field.eval(xs, np.broadcast_to(y, (len(xs), space.dim)))
        cmin = min(cmin, float(np.min(c)))
    if cmin <= 0.0:
        raise ConfigurationError(
            f"speed field is not positive on the declared domain (min sampled c = {cmin:g})"
        )
    return cmin


# ---------------------------------------------------------------------------
# initial-phase catalog


class PhaseModel:
    """Initial phase with exact gradient and Hessian; may have a singular set."""

    dim: int

    def eval(self, x: np.ndarray):
        raise NotImplementedError

    def singular_mask(self, x: np.ndarray) -> np.ndarray:
        """True where the phase is not differentiable."""
        return np.zeros(np.asarray(x).shape[:-1], dtype=bool)

    def eval_checked(self, x: np.ndarray):
        if np.any(self.singular_mask(x)):
            raise PhaseSingularityError("phase evaluated on its singular set")
        return self.eval(x)


@dataclass(frozen=True)
class SquarePhase(PhaseModel):
    """1D phase x^2."""

    dim: int = 1

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        x0 = x[..., 0]
        phi = x0**2
        grad = 2.0 * x[..., :1]
        hess = np.full(x.shape[:-1] + (1, 1), 2.0)
        return phi, grad, hess


@dataclass(frozen=True)
class AbsPhase(PhaseModel):
    """|x1|; kinked on the hyperplane x1 = 0."""

    dim: int = 1

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        batch = x.shape[:-1]
        phi = np.abs(x[..., 0])
        grad = np.zeros(batch + (n,))
        grad[..., 0] = np.sign(x[..., 0])
        return phi, grad, np.zeros(batch + (n, n))

    def singular_mask(self, x):
        return np.abs(np.asarray(x)[..., 0]) < _SINGULAR_TOL


@dataclass(frozen=True)
class AbsPlusSquarePhase(PhaseModel):
    """2D phase |x1| + x2^2; kinked on x1 = 0."""

    dim: int = 2

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        phi = np.abs(x[..., 0]) + x[..., 1] ** 2
        grad = np.stack([np.sign(x[..., 0]), 2.0 * x[..., 1]], axis=-1)
        hess = np.zeros(batch + (2, 2))
        hess[..., 1, 1] = 2.0
        return phi, grad, hess

    def singular_mask(self, x):
        return np.abs(np.asarray(x)[..., 0]) < _SINGULAR_TOL


@dataclass(frozen=True)
class LinearPhase(PhaseModel):
    """-x1 in any dimension."""

    dim: int = 1

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        batch = x.shape[:-1]
        phi = -x[..., 0]
        grad = np.zeros(batch + (n,))
        grad[..., 0] = -1.0
        return phi, grad, np.zeros(batch + (n, n))


# ---------------------------------------------------------------------------
# initial amplitude


@dataclass(frozen=True)
class GaussianPulse:
    """Anisotropic Gaussian amplitude exp(-sum d_i (x_i - s_i)^2).

    Shape components must be nonnegative; a zero component means the pulse
    does not decay along that axis (a plane-wave sheet), in which case its
    launch box must be declared explicitly.
    """

    center: tuple[ParamRef, ...]
    shape: tuple[ParamRef, ...]
    mode: int = -1
    launch_box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        for s in self.shape:
            if s.y_index is None and s.value < 0.0:
                raise ConfigurationError("pulse shape components must be >= 0")
        if self.mode not in (-1, 1):
            raise ConfigurationError(f"pulse mode must be +1 or -1, got {self.mode}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def amplitude(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = _resolve_vector(self.center, y)
        d = _resolve_vector(self.shape, y)
        return np.exp(-np.sum(d * (x - s) ** 2, axis=-1))

    def worst_case_box(self, space: RandomSpace, amp_tol: float):
        """Axis-aligned box outside which the amplitude stays below amp_tol
        for every y in the random domain; None when the pulse has a
        non-decaying axis and no declared launch box."""
        if self.launch_box is not None:
            return tuple((float(lo), float(hi)) for lo, hi in self.launch_box)
        box = []
        for sc, sh in zip(self.center, self.shape):
            d_lo, _ = sh.bounds(space)
            if d_lo <= 0.0:
                return None
            half = np.sqrt(np.log(1.0 / amp_tol) / d_lo)
            c_lo, c_hi = sc.bounds(space)
            box.append((c_lo - half, c_hi + half))
        return tuple(box)


@dataclass(frozen=True)
class InitialWaveData:
    """High-frequency initial data: pulse-sum amplitude and a catalog phase."""

    pulses: tuple[GaussianPulse, ...]
    phase: PhaseModel

    @property
    def dim(self) -> int:
        return self.pulses[0].dim

    def amplitude(self, x, y) -> np.ndarray:
        total = self.pulses[0].amplitude(x, y)
        for pulse in self.pulses[1:]:
            total = total + pulse.amplitude(x, y)
        return total

    def phase_eval(self, x, y=None):
        """(phi0, grad, hess) at x; raises on the phase's singular set."""
        return self.phase.eval_checked(x)

    def launch_boxes(self, space: RandomSpace, amp_tol: float):
        boxes = []
        for i, pulse in enumerate(self.pulses):
            box = pulse.worst_case_box(space, amp_tol)
            if box is None:
                raise ConfigurationError(
                    f"pulse {i} has a non-decaying axis; declare its launch_box"
                )
            boxes.append(box)
        return boxes


# ---------------------------------------------------------------------------
# catalog factories

SPEED_MODELS = ("constant-speed", "example2-speed", "lens-speed")
PHASE_MODELS = ("phase-square", "phase-abs", "phase-abs-plus-square", "phase-linear")


def build_speed(config: dict) -> SpeedField:
    model = config.get("model")
    params = config.get("params", {})
    if model == "constant-speed":
        return ConstantSpeed(value=ParamRef.parse(params["value"]),
                             dim=int(config.get("dimension", 1)))
    if model == "example2-speed":
        return DoubleBumpSpeed(second_bump=ParamRef.parse(params["second_bump"]))
    if model == "lens-speed":
        return LensSpeed(
            strength=ParamRef.parse(params["strength"]),
            width_x1=ParamRef.parse(params["width_x1"]),
            width_x2=ParamRef.parse(params["width_x2"]),
        )
    raise ConfigurationError(f"unknown speed model {model!r}")


def build_phase(config: dict) -> PhaseModel:
    model = config.get("model") if isinstance(config, dict) else config
    if model == "phase-square":
        return SquarePhase()
    if model == "phase-abs":
        return AbsPhase(dim=int(config.get("dimension", 1)) if isinstance(config, dict) else 1)
    if model == "phase-abs-plus-square":
        return AbsPlusSquarePhase()
    if model == "phase-linear":
        return LinearPhase(dim=int(config.get("dimension", 1)) if isinstance(config, dict) else 1)
    raise ConfigurationError(f"unknown phase model {model!r}")


def build_initial_data(config: dict, dimension: int) -> InitialWaveData:
    phase_cfg = config["phase"]
    if isinstance(phase_cfg, dict):
        phase_cfg = dict(phase_cfg, dimension=dimension)
    phase = build_phase(phase_cfg)
    pulses = []
    for raw in config["pulses"]:
        center = tuple(ParamRef.parse(v) for v in raw["center"])
        shape = tuple(ParamRef.parse(v) for v in raw["shape"])
        if len(center) != dimension or len(shape) != dimension:
            raise ConfigurationError("pulse center/shape dimension mismatch")
        box = raw.get("launch_box")
        mode_raw = raw.get("mode", "auto")
        # "auto" is resolved by the study loader once the random space is known
        mode = -1 if mode_raw == "auto" else int(mode_raw)
        pulses.append(GaussianPulse(
            center=center, shape=shape, mode=mode,
            launch_box=tuple(tuple(b) for b in box) if box else None,
        ))
    return InitialWaveData(pulses=tuple(pulses), phase=phase)
