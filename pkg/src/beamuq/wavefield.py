"""Beam ensembles and wavefield evaluation.

An ensemble launches one beam per lattice cell of each pulse's launch box,
with lattice spacing sqrt(epsilon) and cell-centered nodes (which also keeps
lattice points off the phase kinks).  The field is the trapezoidal
superposition of all beams with the (2*pi*eps)^(-n/2) normalization.  The
constant-speed 1D traveling-wave solution is provided as an exact oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .beam_propagator import BeamBatch, BeamState, propagate_batch
from .errors import ConfigurationError, IntegrationFailureError
from .models import ConstantSpeed, GaussianPulse, InitialWaveData, SpeedField
from .stochastic_space import RandomSpace

__all__ = [
    "WaveConfig",
    "BeamEnsemble",
    "launch_lattice",
    "launch_ensemble",
    "beam_value",
    "superpose",
    "field_on_grid",
    "exact_dalembert",
    "resolve_mode",
]

# Beam contributions with Gaussian factor below exp(-_TRUNC_LOG) are skipped.
_TRUNC_LOG = float(np.log(1e12))
_PAIR_BUDGET = 20_000_000


@dataclass(frozen=True)
class WaveConfig:
    """Wavelength parameter and spatial dimension."""

    epsilon: float
    dimension: int

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ConfigurationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.dimension not in (1, 2):
            raise ConfigurationError(f"dimension must be 1 or 2, got {self.dimension}")

    @property
    def lattice_spacing(self) -> float:
        return float(np.sqrt(self.epsilon))


@dataclass
class BeamEnsemble:
    """Propagated beams launched from a lattice over the initial support."""

    batch: BeamBatch
    z: np.ndarray            # (B, n) launch points
    dz: float
    epsilon: float
    boxes: tuple            # per-pulse launch boxes
    pulse_of: np.ndarray     # (B,) pulse index per beam

    @property
    def size(self) -> int:
        return self.batch.size

    @property
    def dim(self) -> int:
        return self.batch.dim

    @property
    def final_time(self) -> float:
        return self.batch.t


def launch_lattice(box, dz: float) -> np.ndarray:
    """Cell-centered uniform lattice of spacing dz covering the box."""
    axes = []
    for lo, hi in box:
        count = int(np.floor((hi - lo) / dz + 0.5))
        if count < 1:
            raise ConfigurationError(f"launch box [{lo}, {hi}] shorter than one lattice cell")
        axes.append(lo + (np.arange(count) + 0.5) * dz)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def resolve_mode(pulse: GaussianPulse, data: InitialWaveData, space: RandomSpace | None):
    """Propagation branch moving the pulse toward the domain origin."""
    y_mid = 0.5 * (space.lower + space.upper) if space is not None else np.zeros(1)
    center = np.array([r.resolve(y_mid) for r in pulse.center], dtype=float)
    if np.any(data.phase.singular_mask(center[None, :])):
        return -1
    _, grad, _ = data.phase.eval(center[None, :])
    heading = float(np.sum(grad[0] * center))
    return -1 if heading >= 0.0 else 1


def _dodge_singular(z: np.ndarray, data: InitialWaveData, dz: float) -> np.ndarray:
    mask = data.phase.singular_mask(z)
    if np.any(mask):
        z = z.copy()
        z[mask, 0] += 0.5 * dz
        if np.any(data.phase.singular_mask(z)):
            raise ConfigurationError("lattice point stuck on the phase singular set")
    return z


def launch_ensemble(
    data: InitialWaveData,
    y,
    speed: SpeedField,
    wave: WaveConfig,
    config,
    space: RandomSpace | None = None,
    amp_threshold: float = 1e-8,
    box_amp_tol: float = 1e-8,
) -> BeamEnsemble:
    """Launch, initialize and propagate beams for all pulses of the data.

    Each pulse gets its own lattice over its launch box and its own
    propagation mode; the launch threshold drops lattice points whose pulse
    amplitude is negligible.  Every beam carries its pulse's amplitude only,
    so the ensemble superposition approximates the summed initial data.
    """
    y = np.asarray(y, dtype=float)
    dz = wave.lattice_spacing
    boxes = data.launch_boxes(space, box_amp_tol) if space is not None else \
        data.launch_boxes(None, box_amp_tol)

    zs, a0s, modes, pulse_ids = [], [], [], []
    for i, (pulse, box) in enumerate(zip(data.pulses, boxes)):
        z = _dodge_singular(launch_lattice(box, dz), data, dz)
        amp = pulse.amplitude(z, np.broadcast_to(y, (len(z), len(y))))
        keep = np.abs(amp) >= amp_threshold if amp_threshold > 0.0 else slice(None)
        z, amp = z[keep], amp[keep]
        zs.append(z)
        a0s.append(amp)
        modes.append(np.full(len(z), float(pulse.mode)))
        pulse_ids.append(np.full(len(z), i, dtype=int))

    z = np.concatenate(zs, axis=0)
    if len(z) == 0:
        raise ConfigurationError("no beams launched: empty lattice or all below threshold")
    phi, grad, hess = data.phase_eval(z)
    n = z.shape[1]
    batch = BeamBatch(
        t=0.0,
        q=z.copy(),
        p=grad,
        M=hess + 1j * np.eye(n),
        phi0=phi,
        a0=np.concatenate(a0s).astype(complex),
        mode=np.concatenate(modes),
        y=np.broadcast_to(y, (len(z), len(y))).copy(),
    )
    try:
        batch, _ = propagate_batch(batch, speed, config.dt, config.T)
    except IntegrationFailureError as err:
        raise IntegrationFailureError(f"{err} (check launch lattice near the failing beam)") from err
    return BeamEnsemble(batch=batch, z=z, dz=dz, epsilon=wave.epsilon,
                        boxes=tuple(boxes), pulse_of=np.concatenate(pulse_ids))


def beam_value(beam: BeamState, x, epsilon: float) -> np.ndarray:
    """Value of one beam at x: a0 * exp(i*(phi0 + d.p + d.M d/2)/eps), d = x - q."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    d = x - beam.q
    quad = beam.phi0 + d @ beam.p + 0.5 * np.einsum("pi,ij,pj->p", d, beam.M, d)
    val = beam.a0 * np.exp(1j * quad / epsilon)
    return val[0] if squeeze else val


def _superpose_points(ensemble: BeamEnsemble, x: np.ndarray,
                      truncate: bool = True) -> np.ndarray:
    """Superposition at a flat (P, n) array of points; returns (P,) complex."""
    b = ensemble.batch
    n = ensemble.dim
    eps = ensemble.epsilon
    prefactor = ensemble.dz**n / (2.0 * np.pi * eps) ** (n / 2.0)
    if b.size == 0:
        return np.zeros(len(x), dtype=complex)

    if _kernels.HAVE_NUMBA:
        pts = np.ascontiguousarray(x, dtype=float)
        q = np.ascontiguousarray(b.q, dtype=float)
        p = np.ascontiguousarray(b.p, dtype=float)
        phi0 = np.ascontiguousarray(b.phi0, dtype=float)
        a0 = np.ascontiguousarray(b.a0, dtype=complex)
        if n == 1:
            m = np.ascontiguousarray(b.M[:, 0, 0], dtype=complex)
            return _kernels.superpose_1d(pts, q, p, m, phi0, a0, eps, prefactor,
                                         _TRUNC_LOG, truncate)
        m00 = np.ascontiguousarray(b.M[:, 0, 0], dtype=complex)
        m01 = np.ascontiguousarray(b.M[:, 0, 1], dtype=complex)
        m11 = np.ascontiguousarray(b.M[:, 1, 1], dtype=complex)
        return _kernels.superpose_2d(pts, q, p, m00, m01, m11, phi0, a0, eps,
                                     prefactor, _TRUNC_LOG, truncate)

    out = np.empty(len(x), dtype=complex)
    chunk = max(1, _PAIR_BUDGET // max(b.size, 1))
    mr, mi = b.M.real, b.M.imag
    for start in range(0, len(x), chunk):
        xs = x[start:start + chunk]
        d = xs[:, None, :] - b.q[None, :, :]                       # (P, B, n)
        lin = np.einsum("pbi,bi->pb", d, b.p)
        quad_re = 0.5 * np.einsum("pbi,bij,pbj->pb", d, mr, d)
        quad_im = 0.5 * np.einsum("pbi,bij,pbj->pb", d, mi, d)
        gauss = np.exp(-quad_im / eps)
        if truncate:
            gauss = np.where(quad_im / eps > _TRUNC_LOG, 0.0, gauss)
        vals = b.a0[None, :] * gauss * np.exp(1j * (b.phi0[None, :] + lin + quad_re) / eps)
        out[start:start + chunk] = prefactor * np.sum(vals, axis=1)
    return out


def superpose(ensemble: BeamEnsemble, x, truncate: bool = True) -> np.ndarray:
    """Normalized trapezoidal beam superposition at x ((..., n) or (n,))."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    flat = x.reshape(-1, ensemble.dim) if not squeeze else x[None, :]
    vals = _superpose_points(ensemble, flat, truncate=truncate)
    if squeeze:
        return complex(vals[0])
    return vals.reshape(x.shape[:-1])


def field_on_grid(ensemble: BeamEnsemble, axes) -> np.ndarray:
    """Superposition on the tensor grid spanned by the per-dimension axes."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    if len(axes) != ensemble.dim:
        raise ConfigurationError("grid dimension does not match the ensemble")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = _superpose_points(ensemble, pts)
    return vals.reshape([len(a) for a in axes])


def exact_dalembert(data: InitialWaveData, speed: ConstantSpeed, y, t: float,
                    x, epsilon: float) -> np.ndarray:
    """Exact 1D constant-speed solution: each pulse translates rigidly with its
    branch velocity, amplitude and phase alike."""
    if data.dim != 1:
        raise ConfigurationError("exact solution is one-dimensional")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    pts = np.atleast_1d(x).reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    c = float(speed.value.resolve(y))

    total = np.zeros(len(pts), dtype=complex)
    for pulse in data.pulses:
        center = np.array([r.resolve(y) for r in pulse.center], dtype=float)
        _, grad, _ = data.phase.eval(center[None, :])
        v = pulse.mode * c * float(np.sign(grad[0, 0]))
        shifted = pts - v * t
        amp = pulse.amplitude(shifted, np.broadcast_to(y, (len(pts), len(y))))
        phi, _, _ = data.phase.eval(shifted)
        total = total + amp * np.exp(1j * phi / epsilon)
    return complex(total[0]) if scalar else total
