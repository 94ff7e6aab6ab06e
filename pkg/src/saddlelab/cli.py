"""Command-line experiment runner.

Every subcommand reads a JSON config (``--config``) whose keys can also be
given as flags (``--max-depth 14`` sets ``max_depth``).  Explicit flags win
over the file, the file wins over the defaults.  The fully resolved config is
written next to the results as ``config.json`` and can be fed back with
``--config`` to reproduce the run.

Exit codes: 0 success, 2 config error, 3 runtime error.  The certify
subcommands return 0 Certified, 1 Falsified, 2 Unknown; ``report`` returns 1
when any acceptance criterion fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .errors import ConfigError, SaddleLabError

THREADS_ENV = "SADDLELAB_THREADS"
GENERIC_TURNS = 0.2718281828  # conic angle (in turns) of the default generic starting point


# --- value parsers --------------------------------------------------------------
# Each parser accepts either a flag string or a JSON value and returns the canonical JSON form.


def _float(v):
    if isinstance(v, bool):
        raise ValueError("expected a number")
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("expected a finite number")
    return x


def _int(v):
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError("expected an integer")
    return int(v)


def _bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false", "1", "0", "yes", "no"):
        return v.lower() in ("true", "1", "yes")
    raise ValueError("expected true or false")


def _range(v):
    """``"1..8"``, ``"1,2,5"``, an integer or a list of integers."""
    if isinstance(v, str):
        v = v.strip()
        if ".." in v:
            a, b = v.split("..")
            out = list(range(int(a), int(b) + 1))
        else:
            out = [int(s) for s in v.split(",") if s.strip()]
    elif isinstance(v, int) and not isinstance(v, bool):
        out = [v]
    elif isinstance(v, list):
        out = [_int(x) for x in v]
    else:
        raise ValueError("expected a range like 1..8")
    if not out:
        raise ValueError("empty range")
    return out


def _cnum(v):
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(_float(v[0]), _float(v[1]))
    return complex(_float(v))


def _cjson(z: complex):
    return z.real if z.imag == 0 else [z.real, z.imag]


def _point(v):
    """Three homogeneous coordinates: ``"1,1,1"`` or a JSON list (numbers or [re, im] pairs); null allowed."""
    if v is None or (isinstance(v, str) and v.lower() in ("", "none", "null", "auto")):
        return None
    items = v.split(",") if isinstance(v, str) else v
    if not isinstance(items, (list, tuple)) or len(items) != 3:
        raise ValueError("expected three coordinates")
    return [_cjson(_cnum(x)) for x in items]


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


# --- schema -----------------------------------------------------------------------

COMMON = {"map": (None, {"name": "Ftheta", "theta": 0.01}), "seed": (_int, 0)}

SCHEMA: dict[str, dict] = {
    "certify-trap": {"delta": (_float, 0.05), "margin": (_float, 0.025), "max_depth": (_int, 16),
                     "spot_check": (_int, 100_000)},
    "certify-sj": {"alpha": (_float, 0.2), "delta_n": (_float, 0.05), "max_depth": (_int, 16)},
    "witness-conic": {"point": (_point, [1.0, 1.0, 1.01]), "delta": (_float, 0.05), "max_depth": (_int, 10)},
    "green": {"point": (_point, None), "samples": (_int, 1000), "delta": (_float, 0.05), "depth": (_int, 40)},
    "slice": {"center": (_float, 0.0), "half_width": (_float, math.pi / 8), "shift": (_float, 0.0),
              "bend": (_float, 0.0), "depth": (_int, 40), "atoms": (_int, 1000), "n_grid": (_int, 64)},
    "lyapunov": {"point": (_point, None), "steps": (_int, 100_000), "burn_in": (_int, 100),
                 "policy": (_choice("auto", "plain", "retract"), "auto")},
    "oseledets": {"point": (_point, None), "depth": (_int, 40), "growth_steps": (_int, 30),
                  "branch_policy": (_choice("nearest_to_conic", "uniform_in_region"), "nearest_to_conic"),
                  "delta": (_float, 0.05)},
    "manifolds": {"point": (_point, None), "iterations": (_int, 8), "growth_steps": (_int, 30),
                  "gamma": (_float, 0.1), "eps0": (_float, 0.1), "order": (_int, 3), "newton_steps": (_int, 30),
                  "horizon": (_int, 8)},
    "holonomy": {"center": (_float, 0.7), "half_width": (_float, 0.4), "count": (_int, 32),
                 "shift": (_float, 0.005), "bend": (_float, 0.15), "depth": (_int, 40), "bins": (_int, 16),
                 "n_grid": (_int, 64), "history_depth": (_int, 12)},
    "periodic": {"n": (_range, [1, 2, 3, 4, 5, 6, 7, 8]), "delta": (_float, 0.05),
                 "strategy": (_choice("auto", "conic_roots", "grid_newton", "both"), "auto")},
    "equidistribution": {"n": (_range, [1, 2, 3, 4, 5, 6, 7, 8]), "delta": (_float, 0.05),
                         "reference_atoms": (_int, 512), "slack": (_float, 0.1)},
    "birkhoff": {"starts": (_int, 20), "steps": (_int, 10_000), "delta": (_float, 0.05),
                 "reference_atoms": (_int, 512), "policy": (_choice("auto", "plain", "retract"), "auto")},
    "disintegration": {"segment_start": (_float, 0.0), "segment_end": (_float, math.pi), "arcs": (_int, 16),
                       "depth": (_int, 40), "reference_atoms": (_int, 512), "n_grid": (_int, 64),
                       "control": (_bool, True)},
    "pushforward": {"center": (_float, 0.0), "half_width": (_float, math.pi / 8),
                    "n": (_range, list(range(0, 11))), "depth": (_int, 40), "atoms": (_int, 1000),
                    "reference_atoms": (_int, 512), "slack": (_float, 0.1)},
    "topdegree-probe": {"delta": (_float, 0.05), "n": (_int, 1), "samples": (_int, 20)},
    "report": {"criteria": (_range, list(range(1, 12)))},
}

COMMANDS = tuple(SCHEMA)
_MAP_KEYS = {"Ftheta": {"theta"}, "squaring": {"degree"}, "serialized": {"spec"}}


def _canonical_map(m) -> dict:
    if not isinstance(m, dict) or "name" not in m:
        raise ConfigError("map must be an object with a 'name'")
    name = m["name"]
    if name not in _MAP_KEYS:
        raise ConfigError(f"unknown map {name!r}; expected one of {', '.join(_MAP_KEYS)}")
    extra = set(m) - _MAP_KEYS[name] - {"name"}
    if extra:
        raise ConfigError(f"unknown map keys: {', '.join(sorted(extra))}")
    try:
        if name == "Ftheta":
            return {"name": name, "theta": _cjson(_cnum(m.get("theta", 0.01)))}
        if name == "squaring":
            return {"name": name, "degree": _int(m.get("degree", 2))}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad map parameter: {exc}") from None
    if not isinstance(m.get("spec"), dict):
        raise ConfigError("serialized map needs a 'spec' object")
    return {"name": name, "spec": m["spec"]}


def build_map(spec: dict):
    from .endo import family_Ftheta, map_from_json, squaring_map

    try:
        if spec["name"] == "Ftheta":
            return family_Ftheta(_cnum(spec["theta"]))
        if spec["name"] == "squaring":
            return squaring_map(spec["degree"])
        return map_from_json(spec["spec"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid map: {exc}") from None


def resolve_config(command: str, file_cfg: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then overrides; unknown keys raise :class:`ConfigError`."""
    if command not in SCHEMA:
        raise ConfigError(f"unknown subcommand {command!r}")
    keys = {**COMMON, **SCHEMA[command]}
    cfg = {"command": command}
    for k, (_, default) in keys.items():
        cfg[k] = json.loads(json.dumps(default))
    for layer in (file_cfg or {}, overrides or {}):
        if not isinstance(layer, dict):
            raise ConfigError("config must be a JSON object")
        for k, v in layer.items():
            if k == "command":
                if v != command:
                    raise ConfigError(f"config is for {v!r}, not {command!r}")
                continue
            if k not in keys:
                raise ConfigError(f"unknown config key {k!r} for {command}")
            parse = keys[k][0]
            if parse is None:
                cfg[k] = v
                continue
            try:
                cfg[k] = parse(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k!r}: {exc}") from None
    cfg["map"] = _canonical_map(cfg["map"])
    return cfg


# --- output ---------------------------------------------------------------------


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist()) if o.dtype.kind == "c" else o.tolist()
    if isinstance(o, (list, tuple)):
        return [_jsonable(x) for x in o]
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    return o


class Output:
    """Collects artifacts in memory; :meth:`flush` writes them in a fixed order."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: dict[str, str] = {}

    def json(self, name: str, obj) -> None:
        self.files[name] = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"

    def csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        self.files[name] = buf.getvalue()

    def dat(self, name: str, header, rows) -> None:
        lines = ["# " + " ".join(header)]
        lines += [" ".join(str(x) if isinstance(x, (int, np.integer)) else repr(float(x)) for x in r) for r in rows]
        self.files[name] = "\n".join(lines) + "\n"

    def text(self, name: str, body: str) -> None:
        self.files[name] = body

    def flush(self) -> list[Path]:
        self.root.mkdir(parents=True, exist_ok=True)
        out = []
        for name in sorted(self.files):
            p = self.root / name
            p.write_text(self.files[name])
            out.append(p)
        return out


def build_info() -> dict:
    return {"saddlelab": __version__, "backend": kernels.BACKEND, "python": platform.python_version(),
            "numpy": np.__version__, "platform": platform.platform(), "threads": os.environ.get(THREADS_ENV, "1")}


# --- helpers ----------------------------------------------------------------------


def _start_point(f, coords):
    from .projgeom import circle_point, conic_point, point

    if coords is not None:
        return point(*(_cnum(c) for c in coords))
    if f.circle_kind == "line":
        return point(circle_point(GENERIC_TURNS), 1, 0)
    return conic_point(circle_point(GENERIC_TURNS))


def _coord_row(p):
    return [c for z in p for c in (float(z.real), float(z.imag))]


_XYZ = ["re_x", "im_x", "re_y", "im_y", "re_z", "im_z"]


def _graph_rows(disk, count=64):
    t = disk.frame.radius * np.exp(2j * np.pi * np.arange(count + 1) / count)
    xi, eta = disk.frame_points(t)
    return [[a.real, a.imag, b.real, b.imag] for a, b in zip(xi, eta)]


# --- subcommands --------------------------------------------------------------------
# Each runner gets (map, config, output) and returns (result dict, exit code).


def run_certify_trap(f, c, out):
    from .certify import certify_trapping, spot_check_trapping

    cert = certify_trapping(f, c["delta"], c["margin"], c["max_depth"])
    res = cert.to_json()
    if c["spot_check"] > 0:
        res["spot_check"] = {"samples": c["spot_check"],
                             "violations": spot_check_trapping(f, c["delta"], c["margin"], c["spot_check"], c["seed"])}
    return res, cert.exit_code


def run_certify_sj(f, c, out):
    from .certify import FALSIFIED, certify_sj
    from .endo import sj_ratio
    from .projgeom import conic_defect

    cert = certify_sj(f, c["alpha"], c["delta_n"], c["max_depth"])
    res = cert.to_json()
    if cert.status == FALSIFIED:
        w = cert.witness.center
        res["witness_check"] = {"sj_ratio": sj_ratio(f, w), "conic_defect": conic_defect(w),
                                "verified": sj_ratio(f, w) >= c["alpha"] and conic_defect(w) <= c["delta_n"]}
    return res, cert.exit_code


def run_witness_conic(f, c, out):
    from .certify import witness_conic
    from .projgeom import point

    w = witness_conic(point(*(_cnum(z) for z in c["point"])), c["delta"], c["max_depth"])
    return w.to_json(), 0 if w.certified else 2


def run_green(f, c, out):
    from .endo import sample_region
    from .green import error_bound, green_array

    if c["point"] is not None:
        P = np.array([[_cnum(z) for z in c["point"]]])
    else:
        P = sample_region(np.random.default_rng(c["seed"]), c["samples"], c["delta"], off_conic=False)
    P = kernels.normalize_rows(P)[0]
    G = green_array(f, P, c["depth"])
    out.csv("green.csv", _XYZ + ["green"], [_coord_row(p) + [g] for p, g in zip(P, G)])
    return {"count": len(G), "min": float(G.min()), "max": float(G.max()), "mean": float(G.mean()),
            "error_bound": error_bound(f, c["depth"]), "depth": c["depth"]}, 0


def _arc(c):
    from .green import conic_arc_disk

    return conic_arc_disk(c["center"], c["half_width"], c.get("shift", 0.0), c.get("bend", 0.0))


def run_slice(f, c, out):
    from .green import slice_mass, slice_sample
    from .measures import circle_angles

    disk = _arc(c)
    mass = slice_mass(f, disk, 1.0, 0.0, c["depth"], c["n_grid"])
    meas = slice_sample(f, disk, c["depth"], c["atoms"], c["seed"], c["n_grid"])
    out.text("atoms.csv", meas.to_csv())
    ang = np.sort(circle_angles(f, meas.atoms)) if f.circle_kind else None
    if ang is not None:
        out.dat("angles.dat", ["index", "angle"], [[i, a] for i, a in enumerate(ang)])
    return {"mass": mass, "atoms": len(meas), "params": meas.params}, 0


def run_lyapunov(f, c, out):
    from .orbits import lyapunov

    est = lyapunov(f, _start_point(f, c["point"]), c["steps"], c["seed"], c["policy"], c["burn_in"])
    return est.to_json(), 0


def run_oseledets(f, c, out):
    from .orbits import backward_orbit, line_angle, oseledets_directions

    p = _start_point(f, c["point"])
    ob = backward_orbit(f, p, c["depth"], c["branch_policy"], c["seed"], c["delta"])
    Eu, Es = oseledets_directions(f, ob, c["growth_steps"])
    return {"chart": p.pivot, "Eu": Eu, "Es": Es, "angle": line_angle(Eu, Es),
            "branch_choices": ob.branch_choices}, 0


def run_manifolds(f, c, out):
    from .orbits import backward_orbit, frame_chain, local_stable, local_unstable, lyapunov, make_frame

    p = _start_point(f, c["point"])
    est = lyapunov(f, p, 2000, c["seed"])
    chi = (est.chi1, est.chi2)
    k = c["iterations"]
    ob = backward_orbit(f, p, k + c["growth_steps"], rng_seed=c["seed"])
    frames = frame_chain(f, ob, k, c["gamma"], c["eps0"], c["growth_steps"], chi)
    un = local_unstable(f, ob, frames, k, return_history=True)
    fr = make_frame(f, ob, c["gamma"], c["eps0"], c["growth_steps"], 0, chi)
    st = local_stable(f, p, fr, c["order"], c["newton_steps"], c["horizon"], return_report=True)
    head = ["re_xi", "im_xi", "re_eta", "im_eta"]
    out.dat("unstable.dat", head, _graph_rows(un.disk))
    out.dat("stable.dat", head, _graph_rows(st.disk))
    return {"lyapunov": chi, "unstable": un.disk.to_json(), "unstable_lipschitz": un.lipschitz,
            "stable": st.disk.to_json(), "stable_residual": st.residual,
            "contraction_constant": st.contraction_constant, "contraction_exponent": st.contraction_exponent}, 0


def run_holonomy(f, c, out):
    from .orbits import conic_stable_family, holonomy_probe

    leaves, tg = conic_stable_family(f, c["center"], c["half_width"], c["count"], history_depth=c["history_depth"])
    D = _arc({**c, "shift": 0.0, "bend": 0.0})
    D2 = _arc(c)
    rep = holonomy_probe(f, D, D2, leaves, c["depth"], c["bins"], c["n_grid"], tg)
    if rep.bins:
        keys = sorted(rep.bins[0])
        out.csv("bins.csv", keys, [[b[k] for k in keys] for b in rep.bins])
    return rep.to_json(), 0


def run_periodic(f, c, out):
    from .periodic import default_strategy, find_periodic, lefschetz_expected, to_csv

    counts, body = [], []
    for n in c["n"]:
        strat = default_strategy(f, n) if c["strategy"] == "auto" else c["strategy"]
        pts = find_periodic(f, n, c["delta"], strat, c["seed"])
        counts.append({"n": n, "count": len(pts), "expected": lefschetz_expected(f.degree, n), "strategy": strat,
                       "max_residual": max((pp.residual for pp in pts), default=0.0)})
        csv_text = to_csv(pts)
        body.append(csv_text if not body else csv_text.split("\n", 1)[1])
    out.text("periodic.csv", "".join(body))
    return {"counts": counts}, 0


def run_equidistribution(f, c, out):
    from .measures import equidistribution_report, non_increasing

    rows = equidistribution_report(f, c["n"], c["delta"], c["reference_atoms"], c["seed"])
    cols = ["n", "count", "expected", "mass", "w1", "bound", "mode"]
    out.csv("equidistribution.csv", cols, [[getattr(r, k) for k in cols] for r in rows])
    out.dat("w1.dat", ["n", "w1", "bound"], [[r.n, r.w1, r.bound] for r in rows])
    w = [r.w1 for r in rows]
    return {"rows": [r.to_json() for r in rows], "non_increasing": non_increasing(w, c["slack"]),
            "within_bound": all(r.w1 <= r.bound for r in rows)}, 0


def run_birkhoff(f, c, out):
    from .measures import basin_seeds, birkhoff, nu_reference, wasserstein1

    ref = nu_reference(f, c["reference_atoms"])
    rows = []
    for i, p0 in enumerate(basin_seeds(c["starts"], c["delta"], c["seed"])):
        res = birkhoff(f, p0, c["steps"], forward_policy=c["policy"])
        rows.append([i] + _coord_row(p0.coords) + [wasserstein1(res.orbit_measure, ref), res.mean_conic_defect])
    out.csv("birkhoff.csv", ["start"] + _XYZ + ["w1", "mean_conic_defect"], rows)
    return {"max_w1": max(r[-2] for r in rows), "max_mean_conic_defect": max(r[-1] for r in rows),
            "starts": len(rows)}, 0


def run_disintegration(f, c, out):
    from .measures import disintegration_check, skewed_reference

    seg = (c["segment_start"], c["segment_end"])
    rep = disintegration_check(f, seg, c["arcs"], c["depth"], c["reference_atoms"], None, c["n_grid"])
    out.csv("arcs.csv", ["arc_start", "arc_end", "reference", "slice", "relative"],
            [[a[0], a[1], r, s, d] for a, r, s, d in zip(rep.arcs, rep.reference, rep.slice, rep.relative)])
    res = {"report": rep.to_json()}
    if c["control"]:
        ctl = disintegration_check(f, seg, c["arcs"], c["depth"], c["reference_atoms"],
                                   skewed_reference(c["reference_atoms"], seg), c["n_grid"])
        res["skewed_control"] = ctl.max_discrepancy
    return res, 0


def run_pushforward(f, c, out):
    from .measures import non_increasing, pushforward_check

    rows = pushforward_check(f, _arc(c), c["n"], c["depth"], c["atoms"], c["seed"], c["reference_atoms"])
    out.csv("pushforward.csv", ["n", "w1", "mode"], [[r.n, r.w1, r.mode] for r in rows])
    out.dat("w1.dat", ["n", "w1"], [[r.n, r.w1] for r in rows])
    w = [r.w1 for r in rows]
    return {"rows": [r.to_json() for r in rows], "non_increasing": non_increasing(w, c["slack"])}, 0


def run_topdegree_probe(f, c, out):
    from .endo import small_topdegree_probe

    rep = small_topdegree_probe(f, c["delta"], c["n"], c["samples"], c["seed"])
    return rep.to_json(), 0


def _pop_timings(obj, path="", acc=None):
    """Move wall-clock fields out of ``obj`` so the result file stays reproducible."""
    acc = {} if acc is None else acc
    if isinstance(obj, dict):
        for k in list(obj):
            if k == "seconds":
                acc[path or "."] = obj.pop(k)
            else:
                _pop_timings(obj[k], f"{path}/{k}" if path else str(k), acc)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _pop_timings(v, f"{path}/{i}", acc)
    return acc


def run_report(f, c, out):
    from . import acceptance

    bad = [k for k in c["criteria"] if k not in acceptance.CRITERIA]
    if bad:
        raise ConfigError(f"unknown criteria {bad}")
    results = acceptance.run_all(c["criteria"], echo=print)
    lines = [r.line() for r in results]
    body = [r.to_json() for r in results]
    out.json("timings.json", _jsonable(_pop_timings(body)))
    out.text("report.txt", "\n".join(lines) + "\n")
    return {"criteria": body, "passed": all(r.passed for r in results)}, 0 if all(r.passed for r in results) else 1


RUNNERS = {name: globals()["run_" + name.replace("-", "_")] for name in COMMANDS}


def run(command: str, config: dict, output_dir) -> int:
    """Run one subcommand with an already resolved config and write its artifacts."""
    out = Output(output_dir)
    f = build_map(config["map"])
    result, code = RUNNERS[command](f, config, out)
    out.json("result.json", {"command": command, "result": result, "exit_code": code})
    out.json("config.json", config)
    out.json("build_info.json", build_info())
    out.flush()
    return code


# --- argument parsing ---------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="saddlelab", description="Numerics for saddle measures on P^2.")
    ap.add_argument("--version", action="version", version=f"saddlelab {__version__} ({kernels.BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, keys in SCHEMA.items():
        sp = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", default="saddlelab-out", help="output directory (default: saddlelab-out)")
        sp.add_argument("--map", dest="map_name", choices=sorted(_MAP_KEYS), help="built-in map")
        sp.add_argument("--theta", help="parameter of Ftheta (complex allowed, e.g. 0.3+0.2j)")
        sp.add_argument("--degree", help="degree of the squaring map")
        sp.add_argument("--map-file", help="serialized map (JSON)")
        sp.add_argument("--seed")
        for k in keys:
            sp.add_argument("--" + k.replace("_", "-"), dest=k)
    return ap


def _overrides(ns: argparse.Namespace, base_map: dict) -> dict:
    over = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "out", "map_name", "theta",
                                                            "degree", "map_file")}
    m = None
    if hasattr(ns, "map_file"):
        try:
            m = {"name": "serialized", "spec": json.loads(Path(ns.map_file).read_text())}
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read map file: {exc}") from None
    elif hasattr(ns, "map_name") or hasattr(ns, "theta") or hasattr(ns, "degree"):
        name = getattr(ns, "map_name", base_map.get("name", "Ftheta"))
        m = {"name": name}
        if name == base_map.get("name"):
            m.update({k: v for k, v in base_map.items() if k != "name"})
        if hasattr(ns, "theta"):
            m["theta"] = ns.theta
        if hasattr(ns, "degree"):
            m["degree"] = ns.degree
    if m is not None:
        over["map"] = m
    return over


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        file_cfg = {}
        if hasattr(ns, "config"):
            try:
                file_cfg = json.loads(Path(ns.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        base_map = file_cfg.get("map", COMMON["map"][1]) if isinstance(file_cfg, dict) else {}
        cfg = resolve_config(ns.command, file_cfg, _overrides(ns, base_map if isinstance(base_map, dict) else {}))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        code = run(ns.command, cfg, ns.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SaddleLabError, ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    res = json.loads((Path(ns.out) / "result.json").read_text())
    if ns.command != "report":
        print(json.dumps(res["result"], indent=2, sort_keys=True)[:4000])
    return code


if __name__ == "__main__":
    sys.exit(main())
