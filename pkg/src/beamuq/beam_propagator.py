"""First-order Gaussian-beam coefficient integration.

A beam is carried by a ray (q, p) of the Hamiltonian c(q)|p| and transports a
phase constant phi0, a complex symmetric phase Hessian M solving a matrix
Riccati equation, and a complex amplitude a0.  All five components are stepped
together with classical fixed-step RK4.  The propagation mode sigma = +/-1
multiplies every right-hand side jointly, selecting the wave branch moving
with or against the slowness direction.

The module exposes a single-beam API (BeamState) and a batched engine
(BeamBatch) that steps many beams, possibly at many different random
parameter values, in one vectorized loop.  Row arithmetic is elementwise, so
batch results are bitwise identical to single-beam results.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DegenerateSlownessError, IntegrationFailureError
from .models import SpeedField

__all__ = [
    "BeamState",
    "BeamBatch",
    "BeamDerivs",
    "RiccatiCoefficients",
    "PropagationConfig",
    "default_dt",
    "init_beam",
    "beam_rhs",
    "riccati_coefficients",
    "rk4_step",
    "propagate",
    "propagate_batch",
    "hamiltonian",
]

_DEGENERATE_REL = 1e-12
_MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class BeamState:
    """One beam's ray position, slowness, phase Hessian, phase constant and amplitude."""

    t: float
    q: np.ndarray            # (n,)
    p: np.ndarray            # (n,)
    M: np.ndarray            # (n, n) complex, symmetric, Im M > 0
    phi0: float
    a0: complex

    @property
    def dim(self) -> int:
        return len(self.q)


class BeamDerivs(NamedTuple):
    dq: np.ndarray
    dp: np.ndarray
    dM: np.ndarray
    dphi0: np.ndarray
    da0: np.ndarray


@dataclass(frozen=True)
class RiccatiCoefficients:
    """Coefficient matrices of dM/dt = D + B^T M + M B + M C M."""

    D: np.ndarray
    B: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class PropagationConfig:
    dt: float
    T: float
    mode: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if self.T < 0.0:
            raise ConfigurationError(f"final time must be >= 0, got {self.T}")
        if self.mode not in (-1, 1):
            raise ConfigurationError(f"mode must be +1 or -1, got {self.mode}")


def default_dt(T: float) -> float:
    """Fixed step keeping ODE error negligible against collocation error."""
    return min(1e-3, T / 1000.0) if T > 0.0 else 1e-3


@dataclass
class BeamBatch:
    """Arrays of beam components sharing a common time; rows are independent beams."""

    t: float
    q: np.ndarray           # (B, n)
    p: np.ndarray           # (B, n)
    M: np.ndarray           # (B, n, n) complex
    phi0: np.ndarray        # (B,)
    a0: np.ndarray          # (B,) complex
    mode: np.ndarray        # (B,) +/-1
    y: np.ndarray           # (B, N)

    @property
    def size(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[1]


def init_beam(z, y, speed: SpeedField, data, mode: int) -> BeamState:
    """Beam initial values at the launch point z: q=z, p=grad(phase),
    M=hess(phase)+iI, phi0=phase, a0=amplitude."""
    z = np.asarray(z, dtype=float)
    phi, grad, hess = data.phase_eval(z[None, :])
    n = len(z)
    amp = data.amplitude(z[None, :], np.asarray(y, dtype=float)[None, :])
    return BeamState(
        t=0.0,
        q=z.copy(),
        p=grad[0],
        M=hess[0] + 1j * np.eye(n),
        phi0=float(phi[0]),
        a0=complex(amp[0]),
    )


def riccati_coefficients(state: BeamState, y, speed: SpeedField) -> RiccatiCoefficients:
    """Coefficient matrices at the current ray point."""
    c, grad, hess = _speed_at(state, y, speed)
    pn = float(np.linalg.norm(state.p))
    D = pn * hess
    B = np.outer(state.p, grad) / pn
    C = (c / pn) * np.eye(state.dim) - (c / pn**3) * np.outer(state.p, state.p)
    return RiccatiCoefficients(D=D, B=B, C=C)


def _speed_at(state: BeamState, y, speed: SpeedField):
    y = np.asarray(y, dtype=float)
    c, grad, hess = speed.eval(state.q[None, :], y[None, :])
    return float(c[0]), grad[0], hess[0]


def hamiltonian(state: BeamState, y, speed: SpeedField) -> float:
    """Ray Hamiltonian c(q, y) * |p|, a first integral of the ray system."""
    c, _, _ = _speed_at(state, y, speed)
    return c * float(np.linalg.norm(state.p))


def beam_rhs(state: BeamState, y, speed: SpeedField, mode: int = 1) -> BeamDerivs:
    """Time derivatives of (q, p, M, phi0, a0); mode flips all signs jointly."""
    batch = _batch_from_state(state, y, mode)
    dq, dp, dM, dphi0, da0 = _rhs(batch, speed, np.array([_DEGENERATE_REL]))
    return BeamDerivs(dq=dq[0], dp=dp[0], dM=dM[0], dphi0=dphi0[0], da0=da0[0])


def _batch_from_state(state: BeamState, y, mode: int) -> BeamBatch:
    return BeamBatch(
        t=state.t,
        q=state.q[None, :].astype(float),
        p=state.p[None, :].astype(float),
        M=state.M[None, :, :].astype(complex),
        phi0=np.array([state.phi0], dtype=float),
        a0=np.array([state.a0], dtype=complex),
        mode=np.array([float(mode)]),
        y=np.asarray(y, dtype=float)[None, :],
    )


def _state_from_batch(batch: BeamBatch) -> BeamState:
    return BeamState(t=batch.t, q=batch.q[0], p=batch.p[0], M=batch.M[0],
                     phi0=float(batch.phi0[0]), a0=complex(batch.a0[0]))


def _matvec_sym(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """M @ v for stacked 1x1 or 2x2 matrices, elementwise (no BLAS dispatch)."""
    if M.shape[-1] == 1:
        return M[..., 0, 0][..., None] * v
    out = np.empty(v.shape, dtype=np.result_type(M, v))
    out[..., 0] = M[..., 0, 0] * v[..., 0] + M[..., 0, 1] * v[..., 1]
    out[..., 1] = M[..., 1, 0] * v[..., 0] + M[..., 1, 1] * v[..., 1]
    return out


def _matsq(M: np.ndarray) -> np.ndarray:
    """M @ M for stacked 1x1 or 2x2 matrices."""
    if M.shape[-1] == 1:
        return M * M
    out = np.empty_like(M)
    m00, m01 = M[..., 0, 0], M[..., 0, 1]
    m10, m11 = M[..., 1, 0], M[..., 1, 1]
    out[..., 0, 0] = m00 * m00 + m01 * m10
    out[..., 0, 1] = m00 * m01 + m01 * m11
    out[..., 1, 0] = m10 * m00 + m11 * m10
    out[..., 1, 1] = m10 * m01 + m11 * m11
    return out


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


def _rhs(batch: BeamBatch, speed: SpeedField, p_floor: np.ndarray):
    q, p, M = batch.q, batch.p, batch.M
    pn = np.sqrt(np.sum(p * p, axis=-1))
    if np.any(pn < p_floor):
        bad = int(np.argmax(pn < p_floor))
        raise DegenerateSlownessError(
            f"slowness magnitude {pn[bad]:.3e} below threshold at beam row {bad}"
        )
    c, grad, hess = speed.eval(q, batch.y)
    inv = 1.0 / pn
    sigma = batch.mode

    dq = (sigma * c * inv)[:, None] * p
    dp = (-sigma * pn)[:, None] * grad

    # With M symmetric: B^T M + M B = (grad x Mp + Mp x grad)/|p| and
    # M C M = (c/|p|) M^2 - (c/|p|^3) (Mp x Mp), so no stacked matmul is needed.
    Mp = _matvec_sym(M, p.astype(complex))
    D = pn[:, None, None] * hess
    cross = (_outer(grad.astype(complex), Mp) + _outer(Mp, grad.astype(complex))) \
        * inv[:, None, None]
    riccati = (c * inv)[:, None, None] * _matsq(M) \
        - (c * inv**3)[:, None, None] * _outer(Mp, Mp)
    dM = sigma[:, None, None] * (D + cross + riccati)

    trM = M[..., 0, 0] + M[..., 1, 1] if batch.dim == 2 else M[..., 0, 0]
    pMp = np.sum(p * Mp, axis=-1)
    da0 = sigma * (0.5 * inv) * (c * trM - np.sum(grad * p, axis=-1)
                                 - c * pMp * inv**2) * batch.a0
    dphi0 = np.zeros_like(batch.phi0)
    return dq, dp, dM, dphi0, da0


def _shifted(batch: BeamBatch, scale: float, k) -> BeamBatch:
    dq, dp, dM, dphi0, da0 = k
    return BeamBatch(
        t=batch.t + scale,
        q=batch.q + scale * dq,
        p=batch.p + scale * dp,
        M=batch.M + scale * dM,
        phi0=batch.phi0 + scale * dphi0,
        a0=batch.a0 + scale * da0,
        mode=batch.mode,
        y=batch.y,
    )


def _rk4_batch_step(batch: BeamBatch, dt: float, speed: SpeedField,
                    p_floor: np.ndarray) -> BeamBatch:
    k1 = _rhs(batch, speed, p_floor)
    k2 = _rhs(_shifted(batch, 0.5 * dt, k1), speed, p_floor)
    k3 = _rhs(_shifted(batch, 0.5 * dt, k2), speed, p_floor)
    k4 = _rhs(_shifted(batch, dt, k3), speed, p_floor)
    combo = tuple((a + 2.0 * b + 2.0 * c + d) / 6.0
                  for a, b, c, d in zip(k1, k2, k3, k4))
    out = _shifted(batch, dt, combo)
    # Riccati flow preserves symmetry analytically; remove roundoff drift.
    M = 0.5 * (out.M + np.swapaxes(out.M, -1, -2))
    return replace(out, t=batch.t + dt, M=M)


def rk4_step(state: BeamState, dt: float, rhs: Callable[[BeamState], BeamDerivs]) -> BeamState:
    """One classical RK4 update of all beam components; M re-symmetrized."""
    if not dt > 0.0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")

    def shift(s: float, k: BeamDerivs) -> BeamState:
        return BeamState(t=state.t + s, q=state.q + s * k.dq, p=state.p + s * k.dp,
                         M=state.M + s * k.dM, phi0=state.phi0 + s * float(k.dphi0),
                         a0=state.a0 + s * complex(k.da0))

    k1 = rhs(state)
    k2 = rhs(shift(0.5 * dt, k1))
    k3 = rhs(shift(0.5 * dt, k2))
    k4 = rhs(shift(dt, k3))
    combo = BeamDerivs(*((a + 2.0 * b + 2.0 * c + d) / 6.0
                         for a, b, c, d in zip(k1, k2, k3, k4)))
    out = shift(dt, combo)
    return replace(out, M=0.5 * (out.M + out.M.T))


def _im_eig_min(M: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of Im M for stacked 1x1 or 2x2 symmetric matrices."""
    im = M.imag
    if M.shape[-1] == 1:
        return im[..., 0, 0]
    half_tr = 0.5 * (im[..., 0, 0] + im[..., 1, 1])
    radius = np.sqrt((0.5 * (im[..., 0, 0] - im[..., 1, 1])) ** 2 + im[..., 0, 1] ** 2)
    return half_tr - radius


def _step_sizes(T: float, dt: float) -> np.ndarray:
    if T == 0.0:
        return np.empty(0)
    n = int(np.ceil(T / dt - 1e-12))
    if n > _MAX_STEPS:
        raise ConfigurationError(f"step budget exceeded: {n} steps requested")
    sizes = np.full(n, dt)
    sizes[-1] = T - (n - 1) * dt
    return sizes


def propagate_batch(batch: BeamBatch, speed: SpeedField, dt: float, T: float,
                    track_drift: bool = False):
    """Integrate all beams to time T.

    Returns (final batch, diagnostics).  Diagnostics carry the minimum
    Im M eigenvalue seen over all accepted steps and, when track_drift is
    set, the maximum relative Hamiltonian drift per beam.

    Catalog speed models run through the compiled per-row kernels; other
    fields use the stacked numpy path with identical formulas.
    """
    if batch.size == 0:
        return batch, {"min_im_eig": np.inf, "max_rel_drift": np.zeros(0)}
    p_floor = _DEGENERATE_REL * np.sqrt(np.sum(batch.p**2, axis=-1))
    spec = speed.kernel_spec(batch.y) if _kernels.HAVE_NUMBA else None
    if spec is not None:
        return _propagate_kernel(batch, spec, dt, T, p_floor, track_drift)

    min_eig = float(np.min(_im_eig_min(batch.M)))
    if track_drift:
        h0 = _hamiltonian_batch(batch, speed)
        drift = np.zeros(batch.size)
    for h in _step_sizes(T, dt):
        batch = _rk4_batch_step(batch, float(h), speed, p_floor)
        eig = _im_eig_min(batch.M)
        step_min = float(np.min(eig))
        min_eig = min(min_eig, step_min)
        if step_min <= 0.0:
            bad = int(np.argmin(eig))
            raise IntegrationFailureError(
                f"Im M lost positive-definiteness at t={batch.t:.6g} "
                f"(beam row {bad}); try a smaller dt"
            )
        if track_drift:
            drift = np.maximum(drift, np.abs(_hamiltonian_batch(batch, speed) - h0) / np.abs(h0))
    diag = {"min_im_eig": min_eig}
    diag["max_rel_drift"] = drift if track_drift else None
    return batch, diag


def _propagate_kernel(batch: BeamBatch, spec, dt: float, T: float,
                      p_floor: np.ndarray, track_drift: bool):
    model_id, params = spec
    dts = _step_sizes(T, dt)
    q = np.ascontiguousarray(batch.q, dtype=float)
    p = np.ascontiguousarray(batch.p, dtype=float)
    a0 = np.ascontiguousarray(batch.a0, dtype=complex)
    mode = np.ascontiguousarray(batch.mode, dtype=float)
    if batch.dim == 1:
        m = np.ascontiguousarray(batch.M[:, 0, 0], dtype=complex)
        min_im, drift, fail, row = _kernels.rk4_1d(
            model_id, params, q, p, m, a0, mode, dts, p_floor, track_drift)
        M = m[:, None, None]
    else:
        m00 = np.ascontiguousarray(batch.M[:, 0, 0], dtype=complex)
        m01 = np.ascontiguousarray(0.5 * (batch.M[:, 0, 1] + batch.M[:, 1, 0]),
                                   dtype=complex)
        m11 = np.ascontiguousarray(batch.M[:, 1, 1], dtype=complex)
        min_im, drift, fail, row = _kernels.rk4_2d(
            model_id, params, q, p, m00, m01, m11, a0, mode, dts, p_floor, track_drift)
        M = np.empty((batch.size, 2, 2), dtype=complex)
        M[:, 0, 0] = m00
        M[:, 0, 1] = m01
        M[:, 1, 0] = m01
        M[:, 1, 1] = m11
    if fail == 1:
        raise DegenerateSlownessError(
            f"slowness magnitude below threshold at beam row {row}")
    if fail == 2:
        raise IntegrationFailureError(
            f"Im M lost positive-definiteness (beam row {row}); try a smaller dt")
    out = BeamBatch(t=batch.t + T, q=q, p=p, M=M, phi0=batch.phi0.copy(),
                    a0=a0, mode=batch.mode, y=batch.y)
    diag = {"min_im_eig": float(np.min(min_im)) if batch.size else np.inf,
            "max_rel_drift": drift if track_drift else None}
    return out, diag


def _hamiltonian_batch(batch: BeamBatch, speed: SpeedField) -> np.ndarray:
    c, _, _ = speed.eval(batch.q, batch.y)
    return c * np.sqrt(np.sum(batch.p**2, axis=-1))


def propagate(beam: BeamState, config: PropagationConfig, y, speed: SpeedField,
              track_drift: bool = False):
    """Propagate a single beam to t = T; the phase constant is exactly conserved."""
    batch = _batch_from_state(beam, y, config.mode)
    out, diag = propagate_batch(batch, speed, config.dt, config.T, track_drift=track_drift)
    state = _state_from_batch(out)
    if track_drift:
        return state, float(diag["max_rel_drift"][0])
    return state
