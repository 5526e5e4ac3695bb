"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 partial
sweep failure.  Every output starts with ``# schema=1`` and an echo of
the effective configuration (CSV) or carries both as keys (JSON).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import geometry as geo
from .drive import BesselBeam, SingularDriveError, scattering_cross_section_sweep
from .emcore import DomainError
from .farfield import COINCIDENT, POLAR_FIXED, g2_map, radiation_pattern
from .hybrid import ConstructionError, build_b1_states, label_hybrid_states
from .manifolds import brillouin_zone, count_states
from .spectra import ClassificationError, ConvergenceError, solve
from .sweeps import SweepSpec, Target, optimize_b1, run_sweep

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4
_NOT_ECHOED = {"func", "output", "config", "command"}
DETECTOR_CONFIGS = (COINCIDENT, POLAR_FIXED)


class UsageError(Exception):
    pass


def _num(x) -> str:
    return repr(float(x))


def _geometry(args) -> geo.EmitterArray:
    if args.geometry == "single":
        return geo.build_points([[0.0, 0.0, 0.0]])
    if args.a is None:
        raise UsageError("--a is required")
    if args.geometry == geo.RING:
        return geo.build_ring(args.nd, args.a)
    if args.geometry == geo.RING_CENTER:
        return geo.build_ring_plus_center(args.nd, args.a)
    if args.b_over_a is None:
        raise UsageError("--b-over-a is required for the double ring")
    return geo.build_double_ring(args.nd, args.a, args.b_over_a, np.radians(args.twist))


def _effective_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _emit_csv(args, header: list, rows, extra: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}\n")
    buf.write(f"# command={args.command}\n")
    buf.write("# config=" + json.dumps(_effective_config(args), sort_keys=True) + "\n")
    for k, v in (extra or {}).items():
        buf.write(f"# {k}={json.dumps(v, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _emit_json(args, data, extra: dict | None = None) -> str:
    doc = {"schema": SCHEMA, "command": args.command, "config": _effective_config(args), "data": data}
    doc.update(extra or {})
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _write(args, text: str):
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_spectrum(args) -> int:
    g = _geometry(args)
    if args.excitations == 2 and g.n_total < 2:
        raise UsageError("the double-excitation manifold needs at least two emitters")
    states = solve(g, args.excitations)
    if args.excitations == 1 and g.tag in (geo.RING_CENTER, geo.DOUBLE_RING):
        label_hybrid_states(states, g)
    if args.m is not None:
        states = [s for s in states if s.m == args.m]
    if args.out == "json":
        _write(args, _emit_json(args, [s.to_dict() for s in states]))
    else:
        head = ["index", "m", "irrep", "hybrid_tag", "re_energy", "im_energy",
                "gamma_over_gamma0", "lifetime_enhancement", "near_defective"]
        rows = [[i, "" if s.m is None else s.m, s.irrep or "", s.hybrid_tag or "", _num(s.energy.real),
                 _num(s.energy.imag), _num(s.gamma), _num(s.lifetime_enhancement), int(s.near_defective)]
                for i, s in enumerate(states)]
        _write(args, _emit_csv(args, head, rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    ratio = None
    if args.geometry == geo.DOUBLE_RING:
        ratio = (args.ratio_min, args.ratio_max, args.ratio_steps)
    spec = SweepSpec(args.geometry, args.nd, (args.a_min, args.a_max, args.a_steps), ratio,
                     np.radians(args.twist), Target(args.target))
    table = run_sweep(spec, args.workers)
    if args.out == "json":
        _write(args, _emit_json(args, table.rows))
    else:
        rows = [[_fmt(r.get(c, "")) for c in table.columns] for r in table.rows]
        _write(args, _emit_csv(args, table.columns, rows))
    if table.n_failed == len(table.rows):
        return EXIT_NUMERIC
    return EXIT_PARTIAL if table.n_failed else EXIT_OK


def _fmt(v):
    return _num(v) if isinstance(v, (float, np.floating)) else v


def _detuning_grid(args) -> np.ndarray:
    if args.detuning_steps < 2 or not args.detuning_max > args.detuning_min:
        raise UsageError("detuning grid needs max > min and at least 2 steps")
    return np.linspace(args.detuning_min, args.detuning_max, args.detuning_steps)


def cmd_scs(args) -> int:
    g = _geometry(args)
    beam = BesselBeam(args.beam_ell, args.beam_spin, np.radians(args.cone_deg))
    res = scattering_cross_section_sweep(g, beam, _detuning_grid(args), args.theta_nodes, args.phi_nodes)
    if args.out == "json":
        data = [{"detuning_over_gamma0": float(d), "scs_normalized": None if e else float(s), "error": e}
                for d, s, e in zip(res.detuning, res.scs, res.error)]
        _write(args, _emit_json(args, data, {"beam": {"ell": beam.oam_ell, "spin": beam.spin_s,
                                                     "cone_half_angle": beam.cone_half_angle},
                                            "geometry": g.to_dict()}))
    else:
        rows = [[_num(d), "" if e else _num(s), e] for d, s, e in zip(res.detuning, res.scs, res.error)]
        _write(args, _emit_csv(args, ["detuning_over_gamma0", "scs_normalized", "error"], rows))
    if res.n_failed == len(res.detuning):
        return EXIT_NUMERIC
    return EXIT_PARTIAL if res.n_failed else EXIT_OK


def _pick_single_state(args, g):
    """Most subradiant state, optionally restricted to a sector and hybrid branch."""
    if g.n_total == 1:
        return np.array([1.0 + 0j]), {"gamma_over_gamma0": 1.0}
    states = solve(g, 1)
    if g.tag in (geo.RING_CENTER, geo.DOUBLE_RING):
        label_hybrid_states(states, g)
    if args.m is not None:
        states = [s for s in states if s.m == args.m]
    if args.hybrid:
        states = [s for s in states if s.hybrid_tag == args.hybrid]
    if not states:
        raise UsageError("no eigenstate matches the requested --m/--hybrid")
    st = min(states, key=lambda s: s.gamma)
    return st.amplitudes, {"m": st.m, "hybrid_tag": st.hybrid_tag, "energy": [st.energy.real, st.energy.imag],
                           "gamma_over_gamma0": st.gamma}


def _map_output(args, fmap, extra):
    if args.out == "json":
        _write(args, _emit_json(args, fmap.to_dict(), extra))
    else:
        rows = [[_num(t), _num(p), "" if v is None else _num(v), int(m)] for t, p, v, m in fmap.rows()]
        _write(args, _emit_csv(args, ["theta", "phi", "value", "mask"], rows, extra))


def cmd_pattern(args) -> int:
    g = _geometry(args)
    amps, info = _pick_single_state(args, g)
    fmap = radiation_pattern(amps, g, args.theta_nodes, args.phi_nodes)
    info["total_power_over_p_single"] = fmap.integrate() / 0.25
    _map_output(args, fmap, {"state": info})
    return EXIT_OK


def _pick_double_state(args, g):
    if g.tag == geo.DOUBLE_RING and g.n_d == 6 and args.state_index is None:
        key = tuple(args.b1)
        st = build_b1_states(6, g.a, g.b_over_a, g.twist)[key]
        return st, {"b1": args.b1}
    states = solve(g, 2)
    idx = args.state_index if args.state_index is not None else int(np.argmin([s.gamma for s in states]))
    if not 0 <= idx < len(states):
        raise UsageError(f"--state-index must lie in [0, {len(states) - 1}]")
    return states[idx], {"state_index": idx}


def cmd_g2(args) -> int:
    g = _geometry(args)
    if g.n_total < 2:
        raise UsageError("g2 needs at least two emitters")
    st, info = _pick_double_state(args, g)
    info.update(energy=[st.energy.real, st.energy.imag], m=st.m)
    theta = phi = None
    if args.theta_deg_step:
        theta = np.radians(np.arange(0.0, 180.0 + 1e-9, args.theta_deg_step))
        phi = np.radians(np.arange(0.0, 360.0 - 1e-9, args.phi_deg_step))
    kw = dict(theta=theta, phi=phi, theta_nodes=args.theta_nodes, phi_nodes=args.phi_nodes,
              detector_theta=np.radians(args.detector_theta_deg), detector_phi=np.radians(args.detector_phi_deg))
    fmap = g2_map(st, g, args.detectors, **kw)
    extra = {"state": info, "masked_points": int(fmap.mask.sum())}
    code = EXIT_OK
    if args.self_test:
        extra["self_test"] = _g2_self_test(st, g, args, fmap, kw)
        code = EXIT_OK if extra["self_test"]["passed"] else EXIT_NUMERIC
    _map_output(args, fmap, extra)
    return code


def _g2_self_test(st, g, args, fmap, kw) -> dict:
    """Compare the map with itself rotated by 2 pi / n_d in azimuth."""
    n_d = g.n_d or 1
    shifted = dict(kw, phi=fmap.phi + 2.0 * np.pi / n_d, theta=fmap.theta)
    if args.detectors == POLAR_FIXED:
        shifted["detector_phi"] = kw["detector_phi"] + 2.0 * np.pi / n_d
    other = g2_map(st, g, args.detectors, **shifted)
    both = ~fmap.mask & ~other.mask
    dev = float(np.max(np.abs(fmap.values[both] - other.values[both]))) if both.any() else 0.0
    return {"check": f"phi -> phi + 2pi/{n_d}", "max_deviation": dev, "tolerance": 1e-8,
            "passed": bool(dev <= 1e-8)}


def cmd_optimize(args) -> int:
    if args.nd != 6:
        raise UsageError("the B1 optimization is defined for --nd 6")
    res = optimize_b1((args.a_min, args.a_max), (args.ratio_min, args.ratio_max),
                      args.a_steps, args.ratio_steps, 6, args.refine)
    extra = {"best_point": list(res.best_point), "best_lifetime_enhancement": res.best_lifetime_enhancement}
    if res.refined_point is not None:
        extra.update(refined_point=list(res.refined_point),
                     refined_lifetime_enhancement=res.refined_lifetime_enhancement)
    if args.out == "json":
        surface = [[None if np.isnan(v) else float(v) for v in row] for row in res.grid_surface]
        _write(args, _emit_json(args, {"a_grid": res.a_grid.tolist(), "ratio_grid": res.ratio_grid.tolist(),
                                       "surface": surface}, extra))
    else:
        rows = [[_num(a), _num(r), "" if np.isnan(res.grid_surface[i, j]) else _num(res.grid_surface[i, j])]
                for i, a in enumerate(res.a_grid) for j, r in enumerate(res.ratio_grid)]
        _write(args, _emit_csv(args, ["a_over_lambda0", "b_over_a", "lifetime_enhancement"], rows, extra))
    return EXIT_PARTIAL if res.n_failed else EXIT_OK


def cmd_count(args) -> int:
    zone = brillouin_zone(args.nd)
    per_m = {m: count_states(args.nd, args.nr, m) for m in zone}
    even = per_m[0]
    odd = per_m[1] if 1 in per_m else per_m[0]
    total = sum(per_m.values())
    if args.out == "json":
        _write(args, _emit_json(args, {"per_m": {str(m): c for m, c in per_m.items()},
                                       "even_m": even, "odd_m": odd, "total": total}))
    else:
        _write(args, _emit_csv(args, ["n_d", "n_r", "even_m", "odd_m", "total"],
                               [[args.nd, args.nr, even, odd, total]]))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_geometry(p, default="ring"):
    p.add_argument("--geometry", choices=["ring", "ring-center", "double-ring", "single"], default=default)
    p.add_argument("--nd", type=int, default=6)
    p.add_argument("--a", type=float, default=None, help="nearest-neighbour spacing in lambda0")
    p.add_argument("--b-over-a", type=float, default=None)
    p.add_argument("--twist", type=float, default=0.0, help="outer-ring rotation in degrees")


def _add_output(p):
    p.add_argument("--out", choices=["csv", "json"], default="csv")
    p.add_argument("--output", default=None, help="write to this path instead of stdout")
    p.add_argument("--config", default=None, help="JSON file of defaults; flags override it")


def _add_grid(p):
    p.add_argument("--theta-nodes", type=int, default=64)
    p.add_argument("--phi-nodes", type=int, default=128)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oligomer", description="Collective emission of emitter oligomers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="eigenstates of H1 or H2")
    _add_geometry(p)
    p.add_argument("--excitations", type=int, choices=[1, 2], default=1)
    p.add_argument("--m", type=int, default=None, help="keep only this quasi-momentum")
    _add_output(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="observables over a/lambda0 (and b/a)")
    p.add_argument("--geometry", choices=["ring", "ring-center", "double-ring"], default="ring")
    p.add_argument("--nd", type=int, default=6)
    p.add_argument("--twist", type=float, default=0.0)
    p.add_argument("--target", choices=[t.value for t in Target], default=Target.SINGLE_SPECTRUM.value)
    p.add_argument("--a-min", type=float, default=0.02)
    p.add_argument("--a-max", type=float, default=0.25)
    p.add_argument("--a-steps", type=int, default=24)
    p.add_argument("--ratio-min", type=float, default=1.5)
    p.add_argument("--ratio-max", type=float, default=3.0)
    p.add_argument("--ratio-steps", type=int, default=16)
    p.add_argument("--workers", type=int, default=1)
    _add_output(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scs", help="scattering cross section under a Bessel beam")
    _add_geometry(p, "ring-center")
    p.add_argument("--beam-ell", type=int, default=1)
    p.add_argument("--beam-spin", type=int, choices=[-1, 0, 1], default=-1)
    p.add_argument("--cone-deg", type=float, default=60.0)
    p.add_argument("--detuning-min", type=float, default=-5.0)
    p.add_argument("--detuning-max", type=float, default=5.0)
    p.add_argument("--detuning-steps", type=int, default=1001)
    _add_grid(p)
    _add_output(p)
    p.set_defaults(func=cmd_scs)

    p = sub.add_parser("pattern", help="radiation pattern of a singly excited eigenstate")
    _add_geometry(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--hybrid", choices=["symmetric", "antisymmetric"], default=None)
    _add_grid(p)
    _add_output(p)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("g2", help="photon-pair correlation map of a doubly excited state")
    _add_geometry(p, "double-ring")
    p.add_argument("--detectors", choices=DETECTOR_CONFIGS, default=COINCIDENT)
    p.add_argument("--b1", choices=["++", "+-", "-+", "--"], default="--")
    p.add_argument("--state-index", type=int, default=None)
    p.add_argument("--detector-theta-deg", type=float, default=0.0)
    p.add_argument("--detector-phi-deg", type=float, default=0.0)
    p.add_argument("--theta-deg-step", type=float, default=None, help="uniform grid instead of quadrature nodes")
    p.add_argument("--phi-deg-step", type=float, default=1.0)
    p.add_argument("--self-test", action="store_true")
    _add_grid(p)
    _add_output(p)
    p.set_defaults(func=cmd_g2)

    p = sub.add_parser("optimize", help="grid search of the B1 lifetime enhancement")
    p.add_argument("--nd", type=int, default=6)
    p.add_argument("--a-min", type=float, default=0.05)
    p.add_argument("--a-max", type=float, default=0.25)
    p.add_argument("--a-steps", type=int, default=41)
    p.add_argument("--ratio-min", type=float, default=1.5)
    p.add_argument("--ratio-max", type=float, default=3.0)
    p.add_argument("--ratio-steps", type=int, default=31)
    p.add_argument("--refine", action="store_true")
    _add_output(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("count", help="doubly excited states per quasi-momentum")
    p.add_argument("--nd", type=int, required=True)
    p.add_argument("--nr", type=int, default=1)
    _add_output(p)
    p.set_defaults(func=cmd_count)
    return parser


def _split_config(argv: list) -> list:
    # on g2, "--config coincident|polar-fixed" names the detector layout
    out = list(argv)
    if out and out[0] == "g2":
        for i, tok in enumerate(out[:-1]):
            if tok == "--config" and out[i + 1] in DETECTOR_CONFIGS:
                out[i], out[i + 1] = "--detectors", out[i + 1]
    return out


def parse_args(argv=None) -> argparse.Namespace:
    argv = _split_config(sys.argv[1:] if argv is None else list(argv))
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(defaults, dict):
            parser.error("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(defaults) - known
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); nothing left to report
        sys.stderr.close()
        return EXIT_OK
    except (UsageError, DomainError) as exc:
        sys.stderr.write(f"oligomer: error: {exc}\n")
        return EXIT_USAGE
    except (ConvergenceError, ClassificationError, ConstructionError, SingularDriveError,
            np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"oligomer: numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
