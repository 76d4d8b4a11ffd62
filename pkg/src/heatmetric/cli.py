"""Command line: tabulations, distances, Heisenberg checks and the acceptance suite.

Exit codes: 0 ok, 1 usage error, 2 numerical failure (with a JSON error report
on stderr).
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import acceptance, cone, geodesics, heisenberg as hz, transport
from .config import COMMANDS, ConfigError, RunConfig
from .measures import ConePoint


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    ap = _Parser(prog="heatmetric", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    ap.add_argument("--k", type=int, choices=(2, 4))
    ap.add_argument("--t", type=float, nargs="+")
    ap.add_argument("--rmin", type=float)
    ap.add_argument("--rmax", type=float)
    ap.add_argument("--rn", type=int)
    ap.add_argument("--degree", type=int)
    ap.add_argument("--degrees", type=int, nargs="+")
    ap.add_argument("--out")
    ap.add_argument("--json", action="store_true", default=None)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--p", type=float, nargs=2, metavar=("R", "ALPHA"))
    ap.add_argument("--q", type=float, nargs=2, metavar=("R", "ALPHA"))
    ap.add_argument("--N", type=int)
    ap.add_argument("--scaling", action="store_true", default=None)
    ap.add_argument("--kernel", type=float, nargs=3, metavar=("X", "Y", "U"))
    ap.add_argument("--constants", action="store_true", default=None)
    ap.add_argument("--heis-degrees", dest="heis_degrees", type=int, nargs="+")
    ap.add_argument("--upper-degree", dest="upper_degree", type=int)
    ap.add_argument("--only", type=int, nargs="+", help="acceptance criteria to run")
    ap.add_argument("--dump-config", action="store_true", help="print the merged config and exit")
    return ap


def load_config(argv):
    ns = build_parser().parse_args(argv)
    base = RunConfig(command=ns.command)
    if ns.config:
        try:
            with open(ns.config) as fh:
                base = RunConfig.from_json(fh.read())
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
    over = {k: v for k, v in vars(ns).items() if k not in ("config", "dump_config")}
    cfg = base.merged(over)
    return cfg.validate(), ns.dump_config


def _metric(cfg):
    return cone.tabulate(cfg.k, cfg.rmin, cfg.rmax, cfg.rn, cfg.degree)


def _emit(text, cfg):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def cmd_cone_metric(cfg):
    m = _metric(cfg)
    if cfg.json:
        reps = []
        for t in cfg.t:
            ang = cone.apex_angle(cfg.k, t, m)
            reps.append({"k": cfg.k, "t": t, "apex_angle": ang.limit,
                         "infinity_angle": cone.ratio_at(cfg.rmax * 0.999 * math.sqrt(t), t, m),
                         "fit_residual": ang.fit_residual, "saturated": m.saturated,
                         "provenance": "cone.apex_angle, cone.ratio_at"})
        _emit(_dump(reps if len(reps) > 1 else reps[0]), cfg)
        return 0
    _emit(cone.metric_csv(m, cfg.t[0]) if len(cfg.t) == 1 else _with_t_column(cfg.t, m), cfg)
    return 0


def _with_t_column(ts, m):
    lines = ["t,r,R,A,rho,ell,ratio"]
    for t in ts:
        for row in cone.metric_rows(m, t):
            lines.append(",".join([f"{t:.12e}"] + [f"{v:.12e}" for v in row]))
    return "\n".join(lines) + "\n"


def cmd_cone_angle(cfg):
    m = _metric(cfg)
    out = []
    for t in cfg.t:
        rep = cone.apex_angle(cfg.k, t, m).to_dict()
        rep["infinity_ratio"] = cone.ratio_at(min(50.0, cfg.rmax * 0.999) * math.sqrt(t), t, m)
        rep["provenance"] = "cone.apex_angle"
        out.append(rep)
    _emit(_dump(out if len(out) > 1 else out[0]), cfg)
    return 0


def cmd_geodesic(cfg):
    if cfg.p is None or cfg.q is None:
        raise ConfigError("geodesic needs --p r alpha and --q r alpha")
    m = _metric(cfg)
    p, q = ConePoint(*cfg.p, cfg.k), ConePoint(*cfg.q, cfg.k)
    out = []
    for t in cfg.t:
        res = geodesics.distance(p, q, m, t, cfg.N)
        d = res.to_dict()
        d["provenance"] = "geodesics.distance"
        if cfg.scaling:
            d["scaling_error"] = geodesics.scaling_check(p, q, t, m, cfg.N)
        out.append(d)
    _emit(_dump(out if len(out) > 1 else out[0]), cfg)
    return 0


def cmd_transport_validate(cfg):
    ctx = acceptance.Context(seed=cfg.seed)
    res = acceptance.run_one(9, ctx)
    rep = {"transport_oracles": res.to_dict(), "provenance": "transport.w2_sinkhorn, transport.w2_exact"}
    if cfg.p is not None and cfg.q is not None:
        p, q = ConePoint(*cfg.p, cfg.k), ConePoint(*cfg.q, cfg.k)
        rep["chord"] = [dict(transport.chord_distance(p, q, t).to_dict(), t=t) for t in cfg.t]
    _emit(_dump(rep), cfg)
    return 0 if res.passed else 2


def cmd_heis(cfg):
    if cfg.kernel is not None:
        x, y, u = cfg.kernel
        out = []
        for t in cfg.t:
            ev = hz.gaveau_kernel(x, y, u, t)
            out.append({"x": x, "y": y, "u": u, "t": t, "value": ev.value, "X_log": ev.X_log,
                        "Y_log": ev.Y_log, "U_log": ev.U_log, "provenance": "heisenberg.gaveau_kernel"})
        _emit(_dump(out if len(out) > 1 else out[0]), cfg)
        return 0
    rep = hz.estimate_constants(cfg.heis_degrees, cfg.upper_degree, with_upper=bool(cfg.constants))
    rng = np.random.default_rng(cfg.seed)
    viol = 0
    for _ in range(50):
        p = hz.HeisenbergPoint(*(rng.normal(size=3) * (2, 2, 5)))
        dc, dr = hz.d_cc(p), hz.d_riem(p, 1.0)
        viol += not (dr <= dc * (1 + 1e-12) and dc <= dr + 4 * math.pi)
    out = {"K_lower": rep.K_lower, "Kk_ratio": rep.Kk_ratio, "sandwich_violations": viol,
           "constants": rep.to_dict(), "identities": [],
           "provenance": "heisenberg.estimate_constants, grad_log_identity, elevator_norm, d_cc, d_riem"}
    for t in cfg.t:
        ident = hz.grad_log_identity(t)
        out["identities"].append({"t": t, "horizontal_identity": ident.horizontal,
                                  "elevator_norm": hz.elevator_norm(t), "mass": ident.mass})
    _emit(_dump(out), cfg)
    return 0


def cmd_accept(cfg):
    tol = dict(acceptance.TOL)
    tol.update(cfg.tolerances)
    ctx = acceptance.Context(seed=cfg.seed, degrees=tuple(cfg.degrees),
                             heis_degrees=tuple(cfg.heis_degrees), upper_degree=cfg.upper_degree, tol=tol)
    echo = None if cfg.json else (lambda s: print(s, flush=True))
    results = acceptance.run_all(ctx, cfg.only, echo)
    ok = all(r.passed for r in results)
    if cfg.json:
        _emit(_dump({"passed": ok, "criteria": [r.to_dict() for r in results]}), cfg)
    else:
        n = sum(r.passed for r in results)
        print(f"{n}/{len(results)} criteria passed")
    return 0 if ok else 2


HANDLERS = {
    "cone-metric": cmd_cone_metric,
    "cone-angle": cmd_cone_angle,
    "geodesic": cmd_geodesic,
    "transport-validate": cmd_transport_validate,
    "heis": cmd_heis,
    "accept": cmd_accept,
}


def _error(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg, dump = load_config(argv)
        if dump:
            sys.stdout.write(cfg.to_json() + "\n")
            return 0
        return HANDLERS[cfg.command](cfg)
    except (UsageError, ConfigError) as e:
        _error("usage", str(e))
        return 1
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as e:
        _error("numerical", f"{type(e).__name__}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
