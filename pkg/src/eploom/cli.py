"""Batch front end: ``eploom {eigen,trace,winding,map,sense,calibrate}``.

Settings are resolved in this order, later entries winning: built-in defaults,
the JSON document given by ``--config``, then command-line flags. The angular
speed comes from, in order of precedence, an explicit ``omega`` (flag or config),
the ``EPLOOM_OMEGA`` environment variable, the session file written by
``calibrate``, and finally the loop default. ``calibrate`` itself ignores the
environment and session.

Every data file starts with ``#`` lines holding the resolved configuration.
Execution-only settings (output directory, session path, worker count) are not
part of it, so output bytes depend only on what was computed.

Exit status: 0 on success, 2 for configuration errors, 3 for runtime or data errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import evolve, nh_core, sense, sweep, topo
from .errors import EploomError
from .evolve import IntegratorOpts, fmt
from .loops import Direction, LoopSpec, PerturbationSpec, continued_splitting, param_arrays, preset

ENV_OMEGA = "EPLOOM_OMEGA"
SESSION_NAME = "session.json"

COMMANDS = ("eigen", "trace", "winding", "map", "sense", "calibrate")

DEFAULTS = {
    "preset": 1,
    "loop": {},
    "direction": None,
    "omega": None,
    "omega_a": None,
    "integrator": {},
    "theta_samples": 201,
    "theta_over_pi": None,
    "initial": None,
    "grid": None,
    "map_kind": "both",
    "correlate": None,
    "perturbation": None,
    "lambdas": None,
    "sense_mode": "both",
    "slice_theta_over_pi": 1.0,
    "candidates": None,
    "format": "csv",
    "out": ".",
    "jobs": None,
    "session": None,
}

EXECUTION_ONLY = ("out", "jobs", "session")


class ConfigError(Exception):
    pass


# -- configuration --------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eploom", description="Non-Hermitian two-level loop simulations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON configuration document")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--jobs", type=int, help="worker threads for maps and sensing (default: all cores)")
    p.add_argument("--direction", choices=("ccw", "cw"))
    p.add_argument("--preset", type=int, help="reference trajectory 1, 2 or 3")
    p.add_argument("--omega", type=float, help="angular speed of the loop")
    p.add_argument("--session", help=f"session file (default: OUT/{SESSION_NAME})")
    return p


def load_config(args: argparse.Namespace) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be an object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")
        cfg.update(doc)
    for key in ("out", "format", "jobs", "direction", "preset", "omega", "session"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    return cfg


def _session_path(cfg) -> Path:
    return Path(cfg["session"]) if cfg["session"] else Path(cfg["out"]) / SESSION_NAME


def _resolve_omega(cfg) -> tuple[float | None, str]:
    if cfg["omega"] is not None:
        return cfg["omega"], "config"
    env = os.environ.get(ENV_OMEGA)
    if env:
        try:
            return float(env), "environment"
        except ValueError as exc:
            raise ConfigError(f"{ENV_OMEGA}: not a number: {env!r}") from exc
    path = _session_path(cfg)
    if path.exists():
        try:
            return float(json.loads(path.read_text())["omega"]), "session"
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"session: cannot read omega from {path}") from exc
    return None, "default"


def _need(cond, field, msg):
    if not cond:
        raise ConfigError(f"{field}: {msg}")


@dataclasses.dataclass
class Resolved:
    cfg: dict
    loop: LoopSpec
    opts: IntegratorOpts
    session_omega: float | None = None

    def header(self) -> list[str]:
        shown = {k: v for k, v in self.cfg.items() if k not in EXECUTION_ONLY}
        shown["resolved_loop"] = self.loop.to_dict()
        shown["resolved_integrator"] = dataclasses.asdict(self.opts)
        return [f"config: {json.dumps(shown, sort_keys=True)}"]


def resolve(command: str, cfg: dict) -> Resolved:
    """Validate the configuration and build the objects it describes."""
    _need(cfg["preset"] in (1, 2, 3) and not isinstance(cfg["preset"], bool), "preset", f"must be 1, 2 or 3, got {cfg['preset']!r}")
    _need(isinstance(cfg["loop"], dict), "loop", "must be an object")
    _need(cfg["format"] in ("csv", "json"), "format", "must be csv or json")
    _need(cfg["jobs"] is None or (isinstance(cfg["jobs"], int) and cfg["jobs"] >= 1), "jobs", "must be a positive integer")
    if cfg["direction"] is not None:
        _need(cfg["direction"] in ("ccw", "cw"), "direction", "must be ccw or cw")
    # calibrate scans its own candidates, so an inherited omega would only leak into the header
    omega, source = (None, "default") if command == "calibrate" else _resolve_omega(cfg)
    cfg["omega"] = omega
    cfg["omega_source"] = source
    changes = dict(cfg["loop"])
    for key in ("direction", "omega", "omega_a"):
        if cfg[key] is not None:
            changes[key] = cfg[key]
    try:
        base = preset(cfg["preset"])
        loop = LoopSpec.from_dict({**base.to_dict(), **changes})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"loop: {exc}") from exc
    _need(isinstance(cfg["integrator"], dict), "integrator", "must be an object")
    try:
        opts = IntegratorOpts(**cfg["integrator"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integrator: {exc}") from exc

    if cfg["theta_over_pi"] is not None:
        _need(isinstance(cfg["theta_over_pi"], list) and len(cfg["theta_over_pi"]) > 0, "theta_over_pi", "must be a nonempty list")
    else:
        n = cfg["theta_samples"]
        _need(isinstance(n, int) and not isinstance(n, bool) and n >= 1, "theta_samples", "must be a positive integer")
    if cfg["initial"] is not None:
        _need(cfg["initial"] in ("+", "-"), "initial", f"must be '+' or '-', got {cfg['initial']!r}")
    if command in ("map", "winding") and cfg["grid"] is not None:
        try:
            sweep.GridSpec.from_dict({**_default_grid_dict(cfg), **cfg["grid"]})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid: {exc}") from exc
    if command == "map":
        _need(cfg["map_kind"] in ("fidelity", "winding", "both"), "map_kind", "must be fidelity, winding or both")
        if cfg["correlate"] is not None:
            c = cfg["correlate"]
            _need(isinstance(c, dict) and set(c) == {"fidelity", "winding"}, "correlate", "needs exactly the keys fidelity and winding")
    if command == "sense":
        _need(cfg["sense_mode"] in ("landscape", "state", "both"), "sense_mode", "must be landscape, state or both")
        lams = _lambdas(cfg)
        if cfg["sense_mode"] in ("state", "both"):
            _need(lams.size >= 2, "lambdas", "eigenstate sensing needs at least 2 lambda points")
        _perturbation(cfg, loop)
    if command == "calibrate" and cfg["candidates"] is not None:
        c = cfg["candidates"]
        _need(isinstance(c, list) and len(c) > 0, "candidates", "must be a nonempty list")
        _need(all(isinstance(w, (int, float)) and w > 0 for w in c), "candidates", "must be positive numbers")
    return Resolved(cfg, loop, opts)


def _default_grid_dict(cfg) -> dict:
    return sweep.default_grid(cfg["preset"]).to_dict()


def _grid(cfg) -> sweep.GridSpec:
    return sweep.GridSpec.from_dict({**_default_grid_dict(cfg), **(cfg["grid"] or {})})


def _lambdas(cfg) -> np.ndarray:
    lams = cfg["lambdas"]
    if lams is None:
        return sense.default_lambdas()
    if isinstance(lams, dict):
        try:
            return np.linspace(float(lams["start"]), float(lams["stop"]), int(lams["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("lambdas: expected {start, stop, num} or a list") from exc
    _need(isinstance(lams, list), "lambdas", "expected {start, stop, num} or a list")
    arr = np.asarray(lams, dtype=float)
    _need(arr.size == 0 or np.all(np.diff(arr) > 0), "lambdas", "must be increasing")
    return arr


_SENSE_TARGET = {1: "G0", 2: "Gamma0", 3: "G0"}


def _perturbation(cfg, loop) -> PerturbationSpec:
    p = cfg["perturbation"] or {}
    _need(isinstance(p, dict), "perturbation", "must be an object")
    unknown = set(p) - {"target", "x_ideal"}
    _need(not unknown, "perturbation", f"unknown key(s) {sorted(unknown)}")
    try:
        return PerturbationSpec(p.get("target", _SENSE_TARGET[cfg["preset"]]), 0.0, p.get("x_ideal"))
    except ValueError as exc:
        raise ConfigError(f"perturbation: {exc}") from exc


def _thetas(cfg) -> np.ndarray:
    if cfg["theta_over_pi"] is not None:
        return np.asarray(cfg["theta_over_pi"], dtype=float) * math.pi
    return np.linspace(0.0, 2.0 * math.pi, cfg["theta_samples"])


# -- output ---------------------------------------------------------------------


@dataclasses.dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list]
    extra_header: list[str] = dataclasses.field(default_factory=list)
    sidecar: dict | None = None


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v)


def _render(table: Table, res: Resolved, form: str) -> dict[str, str]:
    header = res.header() + table.extra_header
    if form == "csv":
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        w.writerows([_cell(v) for v in row] for row in table.rows)
        files = {f"{table.name}.csv": buf.getvalue()}
        if table.sidecar is not None:
            files[f"{table.name}.json"] = json.dumps(table.sidecar, indent=2, sort_keys=True) + "\n"
        return files
    doc = {"header": header, "columns": table.columns, "rows": [[_json_cell(v) for v in row] for row in table.rows]}
    if table.sidecar is not None:
        doc["sidecar"] = table.sidecar
    return {f"{table.name}.json": json.dumps(doc, indent=1, sort_keys=True) + "\n"}


def _json_cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return None if math.isnan(v) else float(fmt(v))


def _map_table(name: str, m: sweep.MapResult) -> Table:
    xs, ys = m.grid.xs, m.grid.ys
    rows = [[xs[i], ys[j], m.values[i, j], m.flags[i, j]] for i in range(m.grid.nx) for j in range(m.grid.ny)]
    extra = [
        f"kind: {m.kind}",
        f"grid: {json.dumps(m.grid.to_dict(), sort_keys=True)}",
        f"direction: {m.direction.value}",
        f"omega: {fmt(m.omega)}",
        f"marker: {fmt(m.marker[0])},{fmt(m.marker[1])}",
    ]
    return Table(name, [m.grid.x_param, m.grid.y_param, "value", "flag"], rows, extra, m.sidecar())


# -- commands -------------------------------------------------------------------


def cmd_eigen(res: Resolved) -> list[Table]:
    loop = res.loop
    theta = loop.direction.sign * _thetas(res.cfg)
    delta, g, gamma = param_arrays(loop, theta)
    de, _ = continued_splitting(loop, theta)
    r_p, r_m, _, _ = nh_core.eigvecs(delta, g, gamma, de)
    centre = loop.omega_a + 0.5 * delta
    ep = nh_core.ep_mask(delta, g, gamma, de)
    cols = ["theta_over_pi", "delta", "g", "gamma", "re_e_plus", "im_e_plus", "re_e_minus", "im_e_minus",
            "re_delta_e", "im_delta_e", "re_r_plus_0", "im_r_plus_0", "re_r_plus_1", "im_r_plus_1",
            "re_r_minus_0", "im_r_minus_0", "re_r_minus_1", "im_r_minus_1", "ep_flag"]
    rows = []
    for k in range(theta.size):
        ep_, em_ = centre[k] + 0.5 * de[k], centre[k] - 0.5 * de[k]
        rows.append([theta[k] / math.pi, delta[k], g[k], gamma[k], ep_.real, ep_.imag, em_.real, em_.imag,
                     de[k].real, de[k].imag, r_p[k, 0].real, r_p[k, 0].imag, r_p[k, 1].real, r_p[k, 1].imag,
                     r_m[k, 0].real, r_m[k, 0].imag, r_m[k, 1].real, r_m[k, 1].imag, bool(ep[k])])
    return [Table("eigen", cols, rows)]


def cmd_trace(res: Resolved) -> list[Table]:
    loop = res.loop
    which = res.cfg["initial"] or "+"
    tr = evolve.propagate(loop, evolve.initial_eigenstate(loop, which), res.opts)
    cols = ["theta_over_pi", "re_c0", "im_c0", "re_c1", "im_c1", "log_norm", "f_plus", "f_minus", "p_plus"]
    rows = [[tr.thetas[k] / math.pi, tr.c[k, 0].real, tr.c[k, 0].imag, tr.c[k, 1].real, tr.c[k, 1].imag,
             tr.log_norm[k], tr.f_plus[k], tr.f_minus[k], tr.p_plus[k]] for k in range(tr.thetas.size)]
    fp, fm = tr.final_fidelity()
    extra = [f"initial: {which}", f"final_fidelity_start_basis: {fmt(fp)},{fmt(fm)}"]
    return [Table("trace", cols, rows, extra)]


def cmd_winding(res: Resolved) -> list[Table]:
    loop = res.loop
    value, flag = sweep.winding_cell(loop)
    nu = samples = residual = math.nan
    if flag == sweep.OK:
        w = topo.winding_number(loop)
        nu, samples, residual = w.nu, w.samples_used, w.residual
    rep = topo.encircles_ep(loop, strict=False)
    f_w = "" if rep.f_winding is None else rep.f_winding
    cols = ["nu", "nu_quantized", "samples_used", "residual", "f_winding", "flag"]
    samples = "" if isinstance(samples, float) else samples
    tables = [Table("winding", cols, [[nu, value, samples, residual, f_w, flag]])]
    if res.cfg["grid"] is not None:
        m = sweep.winding_map(loop, _grid(res.cfg), jobs=res.cfg["jobs"])
        tables.append(_map_table("winding_map", m))
    return tables


def cmd_map(res: Resolved) -> list[Table]:
    cfg = res.cfg
    if cfg["correlate"] is not None:
        try:
            fm = sweep.read_map(cfg["correlate"]["fidelity"])
            wm = sweep.read_map(cfg["correlate"]["winding"])
        except (OSError, KeyError, ValueError) as exc:
            raise EploomError(f"cannot read maps to correlate: {exc}") from exc
        return [_correlation_table(sweep.correlate(fm, wm))]
    grid = _grid(cfg)
    tables, maps = [], {}
    if cfg["map_kind"] in ("fidelity", "both"):
        maps["fidelity"] = sweep.fidelity_map(res.loop, grid, opts=res.opts, jobs=cfg["jobs"])
        tables.append(_map_table("fidelity_map", maps["fidelity"]))
    if cfg["map_kind"] in ("winding", "both"):
        maps["winding"] = sweep.winding_map(res.loop, grid, jobs=cfg["jobs"])
        tables.append(_map_table("winding_map", maps["winding"]))
    if len(maps) == 2:
        tables.append(_correlation_table(sweep.correlate(maps["fidelity"], maps["winding"])))
    return tables


def _correlation_table(c: sweep.Correlation) -> Table:
    d = c.to_dict()
    cols = ["agreement", "compared", "agree", "both", "low_fidelity_only", "winding_only"]
    return Table("correlation", cols, [[d[k] for k in cols]])


def cmd_sense(res: Resolved) -> list[Table]:
    cfg, loop = res.cfg, res.loop
    pert = _perturbation(cfg, loop)
    lams = _lambdas(cfg)
    thetas = _thetas(cfg)
    cut = cfg["slice_theta_over_pi"] * math.pi
    extra = [f"perturbation: {pert.target} ideal {fmt(pert.ideal(loop))}"]
    tables = []
    if cfg["sense_mode"] in ("landscape", "both") and pert.target in sense.KINDS:
        ls = sense.splitting_landscape(loop, pert, lams, thetas)
        tables.append(_landscape_table("landscape", ls, extra))
        tables.append(_landscape_table("landscape_slice", sense.splitting_landscape(loop, pert, lams, [cut]), extra))
    if cfg["sense_mode"] in ("state", "both"):
        which = cfg["initial"] or "-"
        grid = np.union1d(thetas, [cut])
        st = sense.eigenstate_susceptibility(loop, pert, lams, grid, which, res.opts, cfg["jobs"])
        e2 = extra + [f"initial: {which}"]
        tables.append(_state_table("state", st, thetas, e2))
        tables.append(_state_table("state_slice", st, [cut], e2))
    return tables


def _landscape_table(name, ls: sense.Landscape, extra) -> Table:
    cols = ["theta_over_pi", "lambda", "re_delta_e", "im_delta_e", "re_chi", "im_chi", "singular_flag"]
    rows = [[ls.thetas[i] / math.pi, ls.lambdas[j], ls.delta_e[i, j].real, ls.delta_e[i, j].imag,
             ls.chi[i, j].real, ls.chi[i, j].imag, bool(ls.singular[i, j])]
            for i in range(ls.thetas.size) for j in range(ls.lambdas.size)]
    return Table(name, cols, rows, extra + [f"kind: {ls.kind}"])


def _state_table(name, st: sense.StateSusceptibility, thetas, extra) -> Table:
    idx = [int(np.argmin(np.abs(st.thetas - t))) for t in thetas]
    rows = [[st.thetas[i] / math.pi, st.lambdas[j], st.population[i, j], st.chi[i, j],
             not math.isfinite(st.chi[i, j])] for i in idx for j in range(st.lambdas.size)]
    return Table(name, ["theta_over_pi", "lambda", "p_plus", "chi_state", "singular_flag"], rows,
                 extra + ["kind: chi_state"])


def cmd_calibrate(res: Resolved) -> list[Table]:
    cands = res.cfg["candidates"] or evolve.DEFAULT_OMEGA_CANDIDATES
    cal = evolve.calibrate_omega(cands, opts=res.opts)
    cols = ["omega", "symmetric_ccw", "symmetric_cw", "chiral_ccw", "chiral_cw", "chiral_contrast"]
    res.session_omega = cal.omega
    return [Table("calibration", cols, [[cal.omega, cal.symmetric_ccw, cal.symmetric_cw, cal.chiral_ccw,
                                          cal.chiral_cw, cal.chiral_contrast]])]


HANDLERS = {
    "eigen": cmd_eigen,
    "trace": cmd_trace,
    "winding": cmd_winding,
    "map": cmd_map,
    "sense": cmd_sense,
    "calibrate": cmd_calibrate,
}


def run(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args)
        res = resolve(args.command, cfg)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"eploom: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        tables = HANDLERS[args.command](res)
        files = {}
        for t in tables:
            files.update(_render(t, res, cfg["format"]))
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text, newline="")
        if res.session_omega is not None:
            path = _session_path(cfg)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps({"omega": res.session_omega}, sort_keys=True) + "\n")
    except (EploomError, ValueError, OSError) as exc:
        print(f"eploom: {args.command} failed: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run())
