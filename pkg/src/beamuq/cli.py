"""Command-line driver.

Subcommands:
  propagate   integrate a single beam and dump its trajectory
  field       wavefield magnitudes on a grid as CSV
  qoi         one quantity-of-interest value
  sweep       regularity sweep along the configured line (CSV per wavelength)
  grid        sparse-rule nodes and weights as CSV
  converge    collocation convergence study (CSV per wavelength)
  mc          Monte Carlo baseline study (CSV per wavelength)
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .beam_propagator import PropagationConfig, hamiltonian, init_beam, propagate
from .experiments import (
    QoIEvaluator,
    eps_label,
    load_study,
    run_convergence_study,
    run_mc_study,
    run_regularity_sweep,
    write_csv,
)
from .sparse_grid import assemble_rule, format_key
from .wavefield import WaveConfig, field_on_grid, launch_ensemble


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="study config (JSON)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="override the config wavelength list with one value")
    p.add_argument("--dt", type=float, default=None, help="override the ODE step")
    p.add_argument("--seed", type=int, default=None, help="override the base seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--full", action="store_true",
                   help="include the full (slow) wavelength set")


def _load(args):
    cfg = load_study(args.config)
    if args.epsilon is not None:
        cfg.epsilons = (args.epsilon,)
        cfg.epsilons_full = ()
    if args.dt is not None:
        cfg.dt = args.dt
    if args.seed is not None:
        cfg.seed = args.seed
        if cfg.mc is not None:
            from .montecarlo import McStudy

            cfg.mc = McStudy(budgets=cfg.mc.budgets, repetitions=cfg.mc.repetitions,
                             seed=args.seed)
    return cfg


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def cmd_propagate(args):
    cfg = _load(args)
    z = _parse_vector(args.z)
    y = _parse_vector(args.y)
    eps = args.epsilon or cfg.epsilons[0]
    dt = cfg.dt if cfg.dt is not None else min(1e-3, cfg.final_time / 1000)
    mode = cfg.data.pulses[0].mode
    beam = init_beam(z, y, cfg.speed, cfg.data, mode)
    rows = []
    n_save = 51
    times = np.linspace(0.0, cfg.final_time, n_save)
    state = beam
    for t_prev, t_next in zip(times[:-1], times[1:]):
        rows.append(_state_row(state, y, cfg))
        state = propagate(state, PropagationConfig(dt=dt, T=t_next - t_prev, mode=mode),
                          y, cfg.speed)
        state = _retime(state, t_next)
    rows.append(_state_row(state, y, cfg))
    header = (["t"] + [f"q{i+1}" for i in range(len(z))] + [f"p{i+1}" for i in range(len(z))]
              + ["phi0", "re_a0", "im_a0", "hamiltonian"])
    path = write_csv(Path(args.out) / f"{cfg.name}_trajectory.csv", header, rows)
    print(f"wrote {path}")


def _retime(state, t):
    from dataclasses import replace

    return replace(state, t=float(t))


def _state_row(state, y, cfg):
    return ([state.t] + list(state.q) + list(state.p)
            + [state.phi0, state.a0.real, state.a0.imag,
               hamiltonian(state, y, cfg.speed)])


def cmd_field(args):
    cfg = _load(args)
    y = _parse_vector(args.y)
    eps = args.epsilon or cfg.epsilons[0]
    wave = WaveConfig(epsilon=eps, dimension=cfg.dimension)
    dt = cfg.dt if cfg.dt is not None else min(1e-3, cfg.final_time / 1000)
    ens = launch_ensemble(cfg.data, y, cfg.speed, wave,
                          PropagationConfig(dt=dt, T=cfg.final_time, mode=1),
                          space=cfg.space, amp_threshold=cfg.amp_threshold,
                          box_amp_tol=cfg.box_amp_tol)
    box = cfg.psi.support_box()
    dx = 2.0 * np.pi * eps / cfg.points_per_wavelength
    axes = [np.arange(lo, hi + dx, dx) for lo, hi in box]
    u = field_on_grid(ens, axes)
    rows = []
    if cfg.dimension == 1:
        for x, v in zip(axes[0], np.abs(u)):
            rows.append((x, v))
        header = ["x1", "abs_u"]
    else:
        for i, x1 in enumerate(axes[0]):
            for j, x2 in enumerate(axes[1]):
                rows.append((x1, x2, abs(u[i, j])))
        header = ["x1", "x2", "abs_u"]
    path = write_csv(Path(args.out) / f"{cfg.name}_field_eps{eps_label(eps)}.csv",
                     header, rows)
    print(f"wrote {path}")


def cmd_qoi(args):
    cfg = _load(args)
    y = _parse_vector(args.y)
    eps = args.epsilon or cfg.epsilons[0]
    value = QoIEvaluator(cfg, eps)(y[None, :])[0]
    print(f"Q({', '.join(f'{v:g}' for v in y)}) = {value!r}")


def cmd_sweep(args):
    cfg = _load(args)
    results = run_regularity_sweep(cfg, full=args.full)
    for eps, res in results.items():
        rows = [(r, q, dq, d2q, e) for e, r, q, dq, d2q in res["rows"]]
        path = write_csv(Path(args.out) / f"{cfg.name}_sweep_eps{eps_label(eps)}.csv",
                         ["r", "Q", "dQ", "d2Q", "epsilon"], rows)
        print(f"wrote {path}")


def cmd_grid(args):
    cfg = _load(args)
    col = cfg.collocation
    level = args.level if args.level is not None else max(col.get("levels", [1]))
    rule = assemble_rule(cfg.space, col.get("index_set", "total-degree"), level,
                         col.get("family", "clenshaw-curtis"), col.get("growth", "nested"))
    rows = []
    for key, pt, w in zip(rule.keys, rule.points, rule.weights):
        rows.append([format_key(key)] + list(pt) + [w])
    header = ["key"] + [f"y{i+1}" for i in range(cfg.space.dim)] + ["theta"]
    path = write_csv(Path(args.out) / f"{cfg.name}_grid_level{level}.csv", header, rows)
    print(f"wrote {path} ({rule.node_count} nodes)")


def cmd_converge(args):
    cfg = _load(args)
    results = run_convergence_study(cfg, full=args.full)
    for eps, res in results.items():
        rows = [(e, l, eta, q, res["reference"], err)
                for e, l, eta, q, err in res["rows"]]
        path = write_csv(
            Path(args.out) / f"{cfg.name}_converge_eps{eps_label(eps)}.csv",
            ["epsilon", "level", "eta", "expectation", "ref_expectation", "rel_error"],
            rows)
        print(f"wrote {path} (reference E = {res['reference']!r}, "
              f"{res['distinct_nodes']} distinct nodes)")


def cmd_mc(args):
    cfg = _load(args)
    results = run_mc_study(cfg, full=args.full)
    for eps, res in results.items():
        path = write_csv(Path(args.out) / f"{cfg.name}_mc_eps{eps_label(eps)}.csv",
                         ["eta", "run", "error"],
                         [(eta, run, err) for _, eta, run, err in res["rows"]])
        avg_path = write_csv(
            Path(args.out) / f"{cfg.name}_mc_avg_eps{eps_label(eps)}.csv",
            ["eta", "mean_error"],
            [(eta, err) for _, eta, err in res["averaged"]])
        print(f"wrote {path} and {avg_path} (fitted rate {res['rate']:.3f})")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="beamuq", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="single-beam trajectory")
    _add_common(p)
    p.add_argument("--z", required=True, help="launch point, comma separated")
    p.add_argument("--y", required=True, help="random point, comma separated")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("field", help="wavefield magnitude grid")
    _add_common(p)
    p.add_argument("--y", required=True, help="random point, comma separated")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("qoi", help="one QoI value")
    _add_common(p)
    p.add_argument("--y", required=True, help="random point, comma separated")
    p.set_defaults(func=cmd_qoi)

    p = sub.add_parser("sweep", help="regularity sweep")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("grid", help="dump sparse-rule nodes and weights")
    _add_common(p)
    p.add_argument("--level", type=int, default=None)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("converge", help="collocation convergence study")
    _add_common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("mc", help="Monte Carlo baseline study")
    _add_common(p)
    p.set_defaults(func=cmd_mc)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
