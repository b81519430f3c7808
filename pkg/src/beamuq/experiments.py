"""Study drivers: collocation convergence, regularity sweeps, Monte Carlo baselines.

A study is described by a JSON config (random space, model catalog keys and
parameter bindings, test function, wavelengths, collocation rule, budgets).
Each driver returns plain row tables and can emit them as CSV, one file per
(study, wavelength).

The quantity of interest is evaluated through :class:`QoIEvaluator`, which
propagates the beams of many random points in one vectorized batch.  Row
arithmetic is elementwise, so results are bitwise identical to the one-point
API and independent of batch chunking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .beam_propagator import BeamBatch, default_dt, propagate_batch
from .errors import ConfigurationError, DataError
from .models import (
    ConstantSpeed,
    InitialWaveData,
    SpeedField,
    build_initial_data,
    build_speed,
    check_speed_positivity,
)
from .montecarlo import McStudy, mc_prefix_means, regression_rate
from .qoi import QoIConfig, TestFunction, qoi_grid
from .sparse_grid import SparseRule, assemble_rule
from .stochastic_space import RandomSpace, make_generator
from .wavefield import (
    BeamEnsemble,
    WaveConfig,
    _superpose_points,
    exact_dalembert,
    launch_lattice,
    resolve_mode,
)

__all__ = [
    "StudyConfig",
    "QoIEvaluator",
    "load_study",
    "run_convergence_study",
    "run_mc_study",
    "run_regularity_sweep",
    "write_csv",
]

_ROW_BUDGET = 200_000


@dataclass
class StudyConfig:
    """A fully built study description."""

    name: str
    study: str
    space: RandomSpace
    dimension: int
    epsilons: tuple[float, ...]
    epsilons_full: tuple[float, ...]
    source: str                      # beam | exact | surrogate-exp
    speed: SpeedField | None
    data: InitialWaveData | None
    psi: TestFunction | None
    final_time: float
    points_per_wavelength: int
    dt: float | None
    collocation: dict
    mc: McStudy | None
    line_offset: np.ndarray | None
    line_direction: np.ndarray | None
    r_interval: tuple[float, float] | None
    r_count: int
    fd_step: float | None
    fd_step_epsilon_factor: float | None
    amp_threshold: float
    box_amp_tol: float
    seed: int

    def wave(self, epsilon: float) -> WaveConfig:
        return WaveConfig(epsilon=epsilon, dimension=self.dimension)

    def qoi_config(self) -> QoIConfig:
        return QoIConfig(final_time=self.final_time,
                         points_per_wavelength=self.points_per_wavelength)

    def step_size(self) -> float:
        return self.dt if self.dt is not None else default_dt(self.final_time)

    def fd_step_for(self, epsilon: float) -> float:
        if self.fd_step_epsilon_factor is not None:
            return self.fd_step_epsilon_factor * epsilon
        return self.fd_step if self.fd_step is not None else 1e-2

    def line(self, r: float) -> np.ndarray:
        return self.line_offset + r * self.line_direction


def load_study(source) -> StudyConfig:
    """Build a study from a JSON path or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = dict(source)

    space = RandomSpace(bounds=tuple(tuple(b) for b in raw["space"]))
    dimension = int(raw.get("dimension", 1))
    src = raw.get("field_source", "beam")

    speed = None
    data = None
    if src in ("beam", "exact"):
        speed_cfg = dict(raw["speed"])
        speed_cfg.setdefault("dimension", dimension)
        speed = build_speed(speed_cfg)
        data = build_initial_data(raw["initial_data"], dimension)
        # per-pulse modes: explicit sign or the "toward the origin" default
        pulses = []
        for pulse, raw_pulse in zip(data.pulses, raw["initial_data"]["pulses"]):
            if raw_pulse.get("mode", "auto") == "auto":
                pulses.append(replace(pulse, mode=resolve_mode(pulse, data, space)))
            else:
                pulses.append(pulse)
        data = replace(data, pulses=tuple(pulses))
        if "domain" in raw:
            check_speed_positivity(speed, raw["domain"], space)
        if src == "exact" and not isinstance(speed, ConstantSpeed):
            raise ConfigurationError("exact field source requires the constant speed model")

    psi = None
    if "qoi" in raw:
        tf = raw["qoi"]["test_function"]
        psi = TestFunction(kind=tf["kind"], scale=tuple(tf["scale"]),
                           shift=tuple(tf.get("shift", (0.0,) * dimension)))

    mc = None
    if "mc" in raw:
        mc = McStudy(budgets=tuple(raw["mc"]["budgets"]),
                     repetitions=int(raw["mc"].get("repetitions", 10)),
                     seed=int(raw["mc"].get("seed", raw.get("seed", 0))))

    line = raw.get("line", {})
    fd_raw = raw.get("fd_step", None)
    fd_step, fd_factor = None, None
    if isinstance(fd_raw, dict):
        fd_factor = float(fd_raw["epsilon_factor"])
    elif fd_raw is not None:
        fd_step = float(fd_raw)

    return StudyConfig(
        name=raw.get("name", "study"),
        study=raw.get("study", "convergence"),
        space=space,
        dimension=dimension,
        epsilons=tuple(float(e) for e in raw.get("epsilon", [0.05])),
        epsilons_full=tuple(float(e) for e in raw.get("epsilon_full", [])),
        source=src,
        speed=speed,
        data=data,
        psi=psi,
        final_time=float(raw.get("qoi", {}).get("final_time", 1.0)),
        points_per_wavelength=int(raw.get("qoi", {}).get("points_per_wavelength", 10)),
        dt=float(raw["propagation"]["dt"]) if "propagation" in raw else None,
        collocation=dict(raw.get("collocation", {})),
        mc=mc,
        line_offset=np.array(line["offset"], dtype=float) if line else None,
        line_direction=np.array(line["direction"], dtype=float) if line else None,
        r_interval=tuple(raw["r_interval"]) if "r_interval" in raw else None,
        r_count=int(raw.get("r_count", 101)),
        fd_step=fd_step,
        fd_step_epsilon_factor=fd_factor,
        amp_threshold=float(raw.get("launch_threshold", 1e-8)),
        box_amp_tol=float(raw.get("launch_box_amplitude", 1e-8)),
        seed=int(raw.get("seed", 0)),
    )


class QoIEvaluator:
    """Batched Q(y) evaluation for one study at one wavelength.

    The launch lattice is fixed per pulse (worst case over the random domain),
    so the beam set does not depend on y and Q inherits the models' smoothness.
    """

    def __init__(self, cfg: StudyConfig, epsilon: float):
        self.cfg = cfg
        self.epsilon = float(epsilon)
        self.n_evals = 0
        if cfg.source == "surrogate-exp":
            return

        wave = cfg.wave(epsilon)
        self.grid_pts, grid_w = qoi_grid(cfg.psi, cfg.qoi_config(), wave)
        self.grid_wpsi = grid_w * cfg.psi.eval(self.grid_pts)

        if cfg.source == "beam":
            self._setup_lattice(wave)

    def _setup_lattice(self, wave: WaveConfig):
        cfg = self.cfg
        dz = wave.lattice_spacing
        boxes = cfg.data.launch_boxes(cfg.space, cfg.box_amp_tol)
        zs, modes, pulse_ids = [], [], []
        for i, (pulse, box) in enumerate(zip(cfg.data.pulses, boxes)):
            z = launch_lattice(box, dz)
            mask = cfg.data.phase.singular_mask(z)
            if np.any(mask):
                z = z.copy()
                z[mask, 0] += 0.5 * dz
            zs.append(z)
            modes.append(np.full(len(z), float(pulse.mode)))
            pulse_ids.append(np.full(len(z), i, dtype=int))
        self.z = np.concatenate(zs, axis=0)
        self.modes = np.concatenate(modes)
        self.pulse_of = np.concatenate(pulse_ids)
        self.boxes = tuple(boxes)
        self.dz = dz
        phi, grad, hess = cfg.data.phase_eval(self.z)
        self.phi0 = phi
        self.p0 = grad
        self.M0 = hess + 1j * np.eye(self.z.shape[1])

    def __call__(self, ys: np.ndarray) -> np.ndarray:
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        self.n_evals += len(ys)
        if self.cfg.source == "surrogate-exp":
            return np.exp(np.sum(ys, axis=-1))
        if self.cfg.source == "exact":
            return self._eval_exact(ys)
        return self._eval_beam(ys)

    def _eval_exact(self, ys: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        out = np.empty(len(ys))
        for i, y in enumerate(ys):
            u = exact_dalembert(cfg.data, cfg.speed, y, cfg.final_time,
                                self.grid_pts[:, 0], self.epsilon)
            out[i] = np.sum(self.grid_wpsi * np.abs(u) ** 2)
        return out

    def _eval_beam(self, ys: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        n_beams = len(self.z)
        chunk = max(1, _ROW_BUDGET // n_beams)
        out = np.empty(len(ys))
        for start in range(0, len(ys), chunk):
            ys_chunk = ys[start:start + chunk]
            out[start:start + chunk] = self._eval_beam_chunk(ys_chunk)
        return out

    def _eval_beam_chunk(self, ys: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        k = len(ys)
        B = len(self.z)
        n = self.z.shape[1]

        a0 = np.empty((k, B))
        y_bc = ys[:, None, :]
        for i, pulse in enumerate(cfg.data.pulses):
            sel = self.pulse_of == i
            a0[:, sel] = pulse.amplitude(self.z[sel][None, :, :], y_bc)
        if cfg.amp_threshold > 0.0:
            a0 = np.where(np.abs(a0) >= cfg.amp_threshold, a0, 0.0)

        batch = BeamBatch(
            t=0.0,
            q=np.tile(self.z, (k, 1)),
            p=np.tile(self.p0, (k, 1)),
            M=np.tile(self.M0, (k, 1, 1)),
            phi0=np.tile(self.phi0, k),
            a0=a0.reshape(-1).astype(complex),
            mode=np.tile(self.modes, k),
            y=np.repeat(ys, B, axis=0),
        )
        batch, _ = propagate_batch(batch, cfg.speed, cfg.step_size(), cfg.final_time)

        out = np.empty(k)
        for i in range(k):
            rows = slice(i * B, (i + 1) * B)
            node_batch = BeamBatch(
                t=batch.t, q=batch.q[rows], p=batch.p[rows], M=batch.M[rows],
                phi0=batch.phi0[rows], a0=batch.a0[rows], mode=batch.mode[rows],
                y=batch.y[rows],
            )
            ens = BeamEnsemble(batch=node_batch, z=self.z, dz=self.dz,
                               epsilon=self.epsilon, boxes=self.boxes,
                               pulse_of=self.pulse_of)
            u = _superpose_points(ens, self.grid_pts)
            out[i] = np.sum(self.grid_wpsi * np.abs(u) ** 2)
        return out


# ---------------------------------------------------------------------------
# studies


def _collocation_rules(cfg: StudyConfig):
    col = cfg.collocation
    kind = col.get("index_set", "total-degree")
    family = col.get("family", "clenshaw-curtis")
    growth = col.get("growth", "nested")
    levels = [int(l) for l in col["levels"]]
    ref_level = int(col["reference_level"])
    if ref_level <= max(levels):
        raise ConfigurationError("reference level must exceed every study level")
    rules = {l: assemble_rule(cfg.space, kind, l, family, growth) for l in levels}
    ref_rule = assemble_rule(cfg.space, kind, ref_level, family, growth)
    return rules, ref_rule


def _evaluate_rules(evaluator: QoIEvaluator, rules: dict[int, SparseRule],
                    ref_rule: SparseRule):
    """Evaluate Q once per distinct canonical node across all levels."""
    key_order = []
    seen = {}
    for rule in list(rules.values()) + [ref_rule]:
        for key, pt in zip(rule.keys, rule.points):
            if key not in seen:
                seen[key] = pt
                key_order.append(key)
    ys = np.array([seen[k] for k in key_order])
    values = evaluator(ys)
    cache = {k: v for k, v in zip(key_order, values)}

    def expectation(rule: SparseRule) -> float:
        vals = np.array([cache[k] for k in rule.keys])
        return float(np.sum(rule.weights * vals))

    return expectation, cache


def run_convergence_study(cfg: StudyConfig, full: bool = False):
    """Relative collocation error of E[Q] per level against a high-level reference.

    Returns a dict epsilon -> list of rows (epsilon, level, eta, expectation,
    relative_error), plus the reference expectation per epsilon.
    """
    rules, ref_rule = _collocation_rules(cfg)
    results = {}
    for eps in _epsilon_list(cfg, full):
        evaluator = QoIEvaluator(cfg, eps)
        expectation, cache = _evaluate_rules(evaluator, rules, ref_rule)
        e_ref = expectation(ref_rule)
        if abs(e_ref) < 1e-14:
            raise DataError("reference expectation is numerically zero")
        rows = []
        for level in sorted(rules):
            rule = rules[level]
            e_l = expectation(rule)
            rows.append((eps, level, rule.node_count, e_l, abs(e_ref - e_l) / abs(e_ref)))
        results[eps] = {
            "rows": rows,
            "reference": e_ref,
            "reference_eta": ref_rule.node_count,
            "n_evals": evaluator.n_evals,
            "distinct_nodes": len(cache),
        }
    return results


def run_mc_study(cfg: StudyConfig, full: bool = False, reference: dict | None = None):
    """Per-run Monte Carlo relative errors against the collocation reference.

    Returns a dict epsilon -> {rows, averaged, rate}; rows are
    (epsilon, eta, run, error) and averaged rows (epsilon, eta, mean_error).
    """
    if cfg.mc is None:
        raise ConfigurationError("study has no Monte Carlo section")
    _, ref_rule = _collocation_rules(cfg)
    results = {}
    for eps in _epsilon_list(cfg, full):
        evaluator = QoIEvaluator(cfg, eps)
        if reference is not None and eps in reference:
            e_ref = reference[eps]
        else:
            vals = evaluator(ref_rule.points)
            e_ref = float(np.sum(ref_rule.weights * vals))
        if abs(e_ref) < 1e-14:
            raise DataError("reference expectation is numerically zero")

        eta_max = cfg.mc.budgets[-1]
        rows = []
        errors = np.empty((cfg.mc.repetitions, len(cfg.mc.budgets)))
        for run in range(cfg.mc.repetitions):
            rng = make_generator(cfg.mc.run_seed(run))
            samples = cfg.space.sample_array(rng, eta_max)
            values = evaluator(samples)
            means = mc_prefix_means(values, cfg.mc.budgets)
            for j, (eta, mean) in enumerate(zip(cfg.mc.budgets, means)):
                err = abs(mean - e_ref) / abs(e_ref)
                errors[run, j] = err
                rows.append((eps, eta, run, err))
        mean_errors = errors.mean(axis=0)
        averaged = [(eps, eta, err) for eta, err in zip(cfg.mc.budgets, mean_errors)]
        rate = regression_rate(list(zip(cfg.mc.budgets, mean_errors)))
        results[eps] = {"rows": rows, "averaged": averaged, "rate": rate,
                        "reference": e_ref}
    return results


def run_regularity_sweep(cfg: StudyConfig, full: bool = False):
    """Q, dQ/dr and d2Q/dr2 along the configured line, one table per wavelength."""
    if cfg.line_offset is None or cfg.r_interval is None:
        raise ConfigurationError("study has no line/r_interval section")
    r_grid = np.linspace(cfg.r_interval[0], cfg.r_interval[1], cfg.r_count)
    results = {}
    for eps in _epsilon_list(cfg, full):
        evaluator = QoIEvaluator(cfg, eps)
        h = cfg.fd_step_for(eps)
        r_points = np.concatenate([r_grid - h, r_grid, r_grid + h])
        ys = cfg.line_offset[None, :] + r_points[:, None] * cfg.line_direction[None, :]
        q_all = evaluator(ys)
        m = len(r_grid)
        qm, q0, qp = q_all[:m], q_all[m:2 * m], q_all[2 * m:]
        dq = (qp - qm) / (2.0 * h)
        d2q = (qp - 2.0 * q0 + qm) / h**2
        rows = [(eps, r, q, d1, d2) for r, q, d1, d2 in zip(r_grid, q0, dq, d2q)]
        results[eps] = {"rows": rows, "fd_step": h}
    return results


def _epsilon_list(cfg: StudyConfig, full: bool):
    eps = list(cfg.epsilons)
    if full:
        eps += [e for e in cfg.epsilons_full if e not in eps]
    return eps


# ---------------------------------------------------------------------------
# CSV output


def write_csv(path, header, rows):
    """Write rows with repr-exact floats so repeated runs are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def eps_label(eps: float) -> str:
    return f"{eps:g}"
