"""
Command-line pipelines for spectra, dynamics, steady states, mode maps and
the JC / full-effective comparisons.

Every output file starts with the tool version and the fully resolved run
configuration, so ``openrabi replay FILE`` regenerates the same numbers.
"""

import argparse
import concurrent.futures as cf
import csv
import io
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import __version__
from .jc_analytic import jc_vs_rabi_comparison
from .lindblad import (
    HALF_ROUND_TRIP,
    IntegrationFailure,
    InvariantViolation,
    evolve,
    modemap_over_sweep,
    observables,
    propagate,
    steady_state,
)
from .model import BareStateLabel, ModelParams, Parity, basis_projector, bare_to_number_parity
from .spectrum import track_levels_over_sweep
from .vectorized import full_vs_phenomenological

log = logging.getLogger("openrabi")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

COMMANDS = ("spectrum", "dynamics", "steady", "modemap", "jc", "fullcmp")

# per-command defaults for options shared by all subcommands
DEFAULTS = {
    "spectrum": dict(cutoff=40, g_start=0.0, g_stop=2.0, g_steps=201, levels=6),
    "dynamics": dict(cutoff=9, g_start=0.0, g_stop=1.0, g_steps=11, init="2,g", t_max=800.0, t_steps=401),
    "steady": dict(cutoff=9, g_start=0.0, g_stop=1.0, g_steps=101, init="2,g"),
    "modemap": dict(cutoff=9, g_start=0.0, g_stop=1.0, g_steps=101, init="2,g", levels=6),
    "jc": dict(cutoff=60, g_start=0.0, g_stop=4.0, g_steps=401, levels=4),
    "fullcmp": dict(cutoff=4, g_start=0.0, g_stop=2.0, g_steps=21),
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def _common(parser):
    parser.add_argument("--nu-q", type=float, default=0.8, help="qubit frequency (units of nu_c)")
    parser.add_argument("--nu-c", type=float, default=1.0, help="cavity frequency")
    parser.add_argument("--kappa2", "--kappa", dest="kappa2", type=float, default=1 / 40, help="two-photon rate")
    parser.add_argument("--g-start", type=float)
    parser.add_argument("--g-stop", type=float)
    parser.add_argument("--g-steps", type=int)
    parser.add_argument("--cutoff", type=int, help="highest boson number n_max kept per parity block")
    parser.add_argument("--parity", choices=["+", "-", "both"], default="both")
    parser.add_argument("--out", default="-", help="output path ('-' for stdout)")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="openrabi", description="Open quantum Rabi model with two-photon loss.")
    parser.add_argument("--version", action="version", version=f"openrabi {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="tracked eigenfrequencies over a coupling sweep")
    _common(p)
    p.add_argument("--levels", type=int, help="labels per parity")

    p = sub.add_parser("dynamics", help="master-equation observables over (g, t)")
    _common(p)
    p.add_argument("--init", help="initial bare state 'n,g' or 'n,e'")
    p.add_argument("--t-max", type=float, help="final time in units of T_c/2")
    p.add_argument("--t-steps", type=int)
    p.add_argument("--no-convergence-check", dest="convergence_check", action="store_false")

    p = sub.add_parser("steady", help="steady-state populations over g")
    _common(p)
    p.add_argument("--init")
    p.add_argument("--t-final", type=float, default=None, help="report rho(t_final) instead (units of T_c/2)")
    p.add_argument("--no-convergence-check", dest="convergence_check", action="store_false")

    p = sub.add_parser("modemap", help="weights of a bare state on the open eigenmodes")
    _common(p)
    p.add_argument("--init")
    p.add_argument("--levels", type=int)

    p = sub.add_parser("jc", help="JC closed forms next to open-Rabi branches")
    _common(p)
    p.add_argument("--levels", type=int)
    p.add_argument("--slope-window", default="2,4", help="g interval for the decay-slope fit, 'lo,hi'")

    p = sub.add_parser("fullcmp", help="full effective spectrum with and without collapse")
    _common(p)

    p = sub.add_parser("replay", help="re-run the configuration embedded in an output file")
    p.add_argument("file")
    p.add_argument("--out", default="-")
    return parser


def resolve_config(args) -> dict:
    """Merge parsed arguments with per-command defaults into a plain dict."""
    cmd = args.command
    cfg = {"command": cmd}
    for key, val in vars(args).items():
        if key in ("command", "out", "verbose"):
            continue
        cfg[key] = val
    for key, val in DEFAULTS[cmd].items():
        if cfg.get(key) is None:
            cfg[key] = val
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        ModelParams(cfg["nu_c"], cfg["nu_q"], 0.0, cfg["kappa2"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["g_start"] < 0 or cfg["g_stop"] < cfg["g_start"]:
        raise ConfigError("need 0 <= g-start <= g-stop")
    if cfg["g_steps"] < 1:
        raise ConfigError("g-steps must be >= 1")
    if cfg["g_steps"] == 1 and cfg["g_stop"] != cfg["g_start"]:
        raise ConfigError("a single grid point needs g-start == g-stop")
    if cfg["cutoff"] < 2:
        raise ConfigError("cutoff must be >= 2")
    if cfg["command"] in ("spectrum", "modemap", "jc") and cfg["g_start"] != 0:
        raise ConfigError("branch labels are anchored at g = 0; g-start must be 0")
    if cfg.get("levels") is not None and not 1 <= cfg["levels"] <= cfg["cutoff"] + 1:
        raise ConfigError(f"levels must be between 1 and cutoff+1 = {cfg['cutoff'] + 1}")
    if "init" in cfg:
        try:
            label = BareStateLabel.parse(cfg["init"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if label.n > cfg["cutoff"]:
            raise ConfigError(f"initial photon number {label.n} exceeds cutoff {cfg['cutoff']}")
    if cfg["command"] == "dynamics" and (cfg["t_max"] <= 0 or cfg["t_steps"] < 2):
        raise ConfigError("need t-max > 0 and t-steps >= 2")
    if cfg.get("t_final") is not None and cfg["t_final"] < 0:
        raise ConfigError("t-final must be non-negative")
    if cfg["command"] == "jc":
        try:
            lo, hi = (float(x) for x in cfg["slope_window"].split(","))
        except ValueError:
            raise ConfigError("slope-window must look like 'lo,hi'") from None
        if not cfg["g_start"] <= lo < hi <= cfg["g_stop"]:
            raise ConfigError("slope window must lie inside the g grid")


# ---------------------------------------------------------------------------
# helpers


def _params(cfg, g=0.0, kappa=None):
    return ModelParams(cfg["nu_c"], cfg["nu_q"], float(g), cfg["kappa2"] if kappa is None else kappa)


def _g_grid(cfg):
    return np.linspace(cfg["g_start"], cfg["g_stop"], cfg["g_steps"])


def _parities(cfg):
    return {"+": [Parity.EVEN], "-": [Parity.ODD], "both": [Parity.EVEN, Parity.ODD]}[cfg["parity"]]


def _workers():
    raw = os.environ.get("OPENRABI_THREADS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"OPENRABI_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("OPENRABI_THREADS must be >= 1")
    return n


def _parallel_map(fn, items):
    """Map over sweep points on a thread pool; results come back in input order."""
    items = list(items)
    n = min(_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with cf.ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


class Table:
    def __init__(self, columns, rows=None, summary=None):
        self.columns = list(columns)
        self.rows = rows if rows is not None else []
        self.summary = summary or {}


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, dict):
        return {str(k): _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in x]
    return x


def render(table: Table, cfg: dict) -> str:
    if cfg["format"] == "json":
        doc = {
            "openrabi": __version__,
            "config": cfg,
            "summary": _json_value(table.summary),
            "columns": table.columns,
            "rows": [_json_value(list(r)) for r in table.rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# openrabi {__version__}\n")
    buf.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
    if table.summary:
        buf.write(f"# summary: {json.dumps(_json_value(table.summary), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def read_output(text: str):
    """Parse a CSV or JSON output back into (config, columns, rows as strings)."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return doc["config"], doc["columns"], doc["rows"]
    cfg, lines = None, []
    for line in text.splitlines():
        if line.startswith("# config: "):
            cfg = json.loads(line[len("# config: ") :])
        elif not line.startswith("#"):
            lines.append(line)
    if cfg is None:
        raise ConfigError("no '# config:' header found")
    rows = list(csv.reader(lines))
    return cfg, rows[0], rows[1:]


# ---------------------------------------------------------------------------
# pipelines


def cmd_spectrum(cfg) -> Table:
    grid = _g_grid(cfg)
    levels = cfg["levels"]
    open_case = cfg["kappa2"] > 0
    if levels > (cfg["cutoff"] + 1) / 3:
        log.warning("only the lowest ~cutoff/3 levels are converged; %d requested at cutoff %d", levels, cfg["cutoff"])

    def sweep(args):
        p, kappa = args
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = track_levels_over_sweep(_params(cfg, kappa=kappa), p, grid, cfg["cutoff"], n_levels=levels)
        for w in caught:
            log.warning("%s (parity %s)", w.message, p.symbol)
        return s

    kappas = [cfg["kappa2"], 0.0] if open_case else [0.0]
    jobs = [(p, k) for k in kappas for p in (Parity.EVEN, Parity.ODD)]
    sweeps = dict(zip(jobs, _parallel_map(sweep, jobs)))
    ground = sweeps[(Parity.EVEN, kappas[0])].omega[0].real
    ground_closed = sweeps[(Parity.EVEN, 0.0)].omega[0].real

    cols = ["g", "n_g", "p", "re_omega_rel", "re_omega", "im_omega"]
    if open_case:
        cols += ["re_omega_rel_closed", "re_omega_closed"]
    rows, n_amb = [], 0
    for p in _parities(cfg):
        s = sweeps[(p, kappas[0])]
        n_amb += len(s.ambiguities)
        closed = sweeps[(p, 0.0)]
        for i, g in enumerate(grid):
            for n in range(levels):
                w = s.omega[n, i]
                row = [g, n, int(p), w.real - ground[i], w.real, w.imag]
                if open_case:
                    wc = closed.omega[n, i].real
                    row += [wc - ground_closed[i], wc]
                rows.append(row)
    return Table(cols, rows, {"ambiguous_assignments": n_amb})


def _initial_state(cfg, cutoff=None):
    label = BareStateLabel.parse(cfg["init"])
    return label, basis_projector(label, cutoff or cfg["cutoff"])


def cmd_dynamics(cfg) -> Table:
    grid = _g_grid(cfg)
    t_units = np.linspace(0.0, cfg["t_max"], cfg["t_steps"])
    t = t_units * HALF_ROUND_TRIP / cfg["nu_c"]
    _, rho0 = _initial_state(cfg)

    def run(g):
        res = evolve(rho0, _params(cfg, g), cfg["cutoff"], t)
        drift = np.nan
        if cfg["convergence_check"]:
            _, rho_big = _initial_state(cfg, cfg["cutoff"] + 3)
            big = evolve(rho_big, _params(cfg, g), cfg["cutoff"] + 3, t).series
            s = res.series
            drift = max(np.max(np.abs(s.photon - big.photon)), np.max(np.abs(s.qubit - big.qubit)))
        return res, drift

    results = _parallel_map(run, grid)
    rows, drifts, worst = [], [], dict(trace=0.0, hermiticity=0.0, min_eigenvalue=0.0, leakage=0.0)
    for g, (res, drift) in zip(grid, results):
        s = res.series
        drifts.append(drift)
        worst["trace"] = max(worst["trace"], float(np.max(np.abs(s.trace - 1))))
        worst["hermiticity"] = max(worst["hermiticity"], float(np.max(s.hermiticity)))
        worst["min_eigenvalue"] = min(worst["min_eigenvalue"], float(np.min(s.min_eigenvalue)))
        worst["leakage"] = max(worst["leakage"], float(np.max(s.leakage)))
        for k in range(len(t)):
            rows.append([g, t_units[k], s.photon[k], s.qubit[k], s.parity[k], s.trace[k]])
    summary = {"invariants": worst}
    if cfg["kappa2"] > 0:
        summary["t_kappa2"] = float(1 / cfg["kappa2"] * cfg["nu_c"] / HALF_ROUND_TRIP)
    if cfg["convergence_check"]:
        summary["cutoff_drift"] = float(np.nanmax(drifts))
        if summary["cutoff_drift"] > 1e-4:
            log.warning("observables move by %.2e when the cutoff is raised by 3", summary["cutoff_drift"])
    return Table(["g", "t", "photon", "qubit", "parity", "trace"], rows, summary)


def cmd_steady(cfg) -> Table:
    grid = _g_grid(cfg)
    t_final = cfg.get("t_final")

    def solve(g, cutoff):
        params = _params(cfg, g)
        _, rho0 = _initial_state(cfg, cutoff)
        if t_final is not None:
            rho = propagate(rho0, params, cutoff, t_final * HALF_ROUND_TRIP / cfg["nu_c"])
            return observables(rho, cutoff), 0
        ss = steady_state(params, cutoff, rho0)
        return ss.observables, max(len(b) for b in ss.null_basis.values())

    def run(g):
        obs, dim = solve(g, cfg["cutoff"])
        drift = np.nan
        if cfg["convergence_check"]:
            big, _ = solve(g, cfg["cutoff"] + 3)
            drift = float(np.max(np.abs(np.subtract(obs, big))))
        return obs, dim, drift

    results = _parallel_map(run, grid)
    rows = [[g, *obs, dim] for g, (obs, dim, _) in zip(grid, results)]
    summary = {"mode": "steady" if t_final is None else "finite_time"}
    if cfg["convergence_check"]:
        summary["cutoff_drift"] = float(np.nanmax([r[2] for r in results]))
        if summary["cutoff_drift"] > 1e-4:
            log.warning("observables move by %.2e when the cutoff is raised by 3", summary["cutoff_drift"])
    return Table(["g", "photon", "qubit", "parity", "null_dim"], rows, summary)


def cmd_modemap(cfg) -> Table:
    label, _ = _initial_state(cfg)
    m0, p = bare_to_number_parity(label)
    mm = modemap_over_sweep(m0, p, _params(cfg), _g_grid(cfg), cfg["cutoff"])
    levels = cfg["levels"]
    rows = []
    for i, g in enumerate(mm.g):
        for n in range(levels):
            w = mm.omega[n, i]
            rows.append([g, n, int(p), w.real, w.imag, mm.weights[n, i]])
    summary = {"initial": [m0, int(p)], "near_defective": len(mm.near_defective), "ambiguous": len(mm.ambiguities)}
    return Table(["g", "n_g", "p", "re_omega", "im_omega", "weight"], rows, summary)


def cmd_jc(cfg) -> Table:
    lo, hi = (float(x) for x in cfg["slope_window"].split(","))
    grid = _g_grid(cfg)
    cmp_ = jc_vs_rabi_comparison(
        _params(cfg), grid, cfg["cutoff"], n_levels=cfg["levels"], parities=_parities(cfg), slope_window=(lo, hi)
    )
    rows = []
    for k, (n, p) in enumerate(cmp_.labels):
        for i, g in enumerate(grid):
            wj, wr = cmp_.omega_jc[k, i], cmp_.omega_rabi[k, i]
            rows.append([g, n, int(p), wj.real, wj.imag, wr.real, wr.imag])
    summary = {
        "slope_window": [lo, hi],
        "slopes": [
            {"n_g": n, "p": int(p), "jc": float(sj), "rabi": float(sr)}
            for (n, p), sj, sr in zip(cmp_.labels, cmp_.slope_jc, cmp_.slope_rabi)
        ],
    }
    if cfg["kappa2"] > 0:
        summary["jc_plateau"] = [bool(x) for x in cmp_.plateaued(cfg["kappa2"])]
    return Table(["g", "n_g", "p", "re_jc", "im_jc", "re_rabi", "im_rabi"], rows, summary)


def cmd_fullcmp(cfg) -> Table:
    grid = _g_grid(cfg)
    wanted = set(_parities(cfg))
    results = _parallel_map(lambda g: full_vs_phenomenological(_params(cfg, g), cfg["cutoff"]), grid)
    rows, worst = [], 0.0
    for g, comps in zip(grid, results):
        for c in comps:
            if c.sector[0] not in wanted:
                continue
            order = np.lexsort((c.full.imag, c.full.real))
            for k, j in enumerate(order):
                a, b = c.full[j], c.phenomenological[j]
                rows.append([g, int(c.sector[0]), int(c.sector[1]), k, a.real, a.imag, b.real, b.imag, abs(a - b)])
            if g == 0:
                worst = max(worst, float(c.mismatch.max()))
    cols = ["g", "p_s", "p_a", "k", "re_full", "im_full", "re_nocollapse", "im_nocollapse", "mismatch"]
    return Table(cols, rows, {"mismatch_at_g0": worst} if grid[0] == 0 else {})


PIPELINES = {
    "spectrum": cmd_spectrum,
    "dynamics": cmd_dynamics,
    "steady": cmd_steady,
    "modemap": cmd_modemap,
    "jc": cmd_jc,
    "fullcmp": cmd_fullcmp,
}


def run_config(cfg) -> str:
    """Execute a resolved configuration and return the rendered output."""
    validate_config(cfg)
    return render(PIPELINES[cfg["command"]](cfg), cfg)


def _write(text, path):
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "replay":
            try:
                with open(args.file) as fh:
                    cfg, _, _ = read_output(fh.read())
            except OSError as exc:
                raise ConfigError(f"cannot read {args.file}: {exc}") from None
            if cfg.get("command") not in PIPELINES:
                raise ConfigError("embedded config has no valid command")
        else:
            cfg = resolve_config(args)
        text = run_config(cfg)
        _write(text, args.out)
    except ConfigError as exc:
        print(f"openrabi: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, IntegrationFailure) as exc:
        print(f"openrabi: numerical invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
