"""Command-line interface: ``qhopfield {capacity,sweep,dynamics,lindblad,limits}``.

Exit codes: 0 ok, 1 solver or integration error, 2 zero capacity or size
limit, 64 usage error, 74 I/O error. Options may also come from a TOML file
given with --config; top-level keys apply to every command and a table named
after the command overrides them. Flags on the command line win over both.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import tomli

from . import limits
from .capacity import DEFAULT_ORDER, Reason, compute_capacity
from .errors import QHopfieldError, SizeError
from .meanfield import FieldProfile, ModelParams, OverlapState, integrate_dynamics
from .quadrature import build_grid

EXIT_OK, EXIT_SOLVER, EXIT_ZERO, EXIT_USAGE, EXIT_IO = 0, 1, 2, 64, 74

SWEEP_HEADER = ["T", "omega", "m", "alpha_c", "reason", "iterations", "stability_value"]

DEFAULTS = {
    "capacity": {"omega": 0.0, "order": DEFAULT_ORDER, "stability_omega_coeff": 16.0},
    "sweep": {"order": DEFAULT_ORDER, "workers": 1, "stability_omega_coeff": 16.0},
    "dynamics": {"omega": 0.0, "h": 1.0, "m_z0": 1.0, "m_y0": 0.0, "m_x0": 0.0,
                 "t_max": 10.0, "dt": 1e-3, "store_every": 100},
    "lindblad": {"omega": 0.0, "seed": 0, "t_max": 10.0, "dt": 1e-3, "store_every": 100,
                 "glauber_check": False},
    "limits": {},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.9g" % x
    return str(x)


# ------------------------------------------------------------------ options

def _temperature_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--temp", type=float, help="temperature T = 1/beta")
    g.add_argument("--beta", type=float, help="inverse temperature")


def build_parser():
    parser = _Parser(prog="qhopfield", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("capacity", help="maximal storage capacity at one point")
    p.add_argument("--m", type=float, help="minimal overlap, 0 < m < 1")
    _temperature_flags(p)
    p.add_argument("--omega", type=float, help="coherent drive (default 0)")
    p.add_argument("--order", type=int, help=f"quadrature order (default {DEFAULT_ORDER})")
    p.add_argument("--stability-omega-coeff", type=float,
                   help="Ω² constant of the stability functional (default 16)")
    p.add_argument("--config", help="TOML file with option values")

    p = sub.add_parser("sweep", help="capacity on a (T, Ω) grid, written as CSV")
    p.add_argument("--m", type=float)
    p.add_argument("--temps", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    p.add_argument("--omegas", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    p.add_argument("--order", type=int)
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--stability-omega-coeff", type=float)
    p.add_argument("--output", help="CSV path; a gnuplot script goes to <output>.gp")
    p.add_argument("--config")

    p = sub.add_parser("dynamics", help="integrate the mean-field overlap equations")
    _temperature_flags(p)
    p.add_argument("--omega", type=float)
    p.add_argument("--h", type=float, help="homogeneous local energy (default 1)")
    p.add_argument("--fields", help="file of local energies h_i (whitespace separated)")
    p.add_argument("--m-z0", type=float)
    p.add_argument("--m-y0", type=float)
    p.add_argument("--m-x0", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--store-every", type=int, help="write every k-th step (default 100)")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.add_argument("--config")

    p = sub.add_parser("lindblad", help="exact small-N master-equation run")
    p.add_argument("--n", type=int, help="number of spins (with --random-patterns)")
    _temperature_flags(p)
    p.add_argument("--omega", type=float)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--patterns", help="pattern file, one ±1 row per pattern")
    src.add_argument("--random-patterns", type=int, metavar="P")
    p.add_argument("--seed", type=int)
    p.add_argument("--t-max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--store-every", type=int)
    p.add_argument("--glauber-check", action="store_const", const=True,
                   help="add the deviation of diag(rho) from the Glauber equation (Ω = 0)")
    p.add_argument("--output")
    p.add_argument("--config")

    p = sub.add_parser("limits", help="closed-form limits")
    p.add_argument("--m", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--config")
    return parser


def load_config(path):
    """Return (top-level keys, per-command tables) of a TOML config."""
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise UsageError(f"bad config {path}: {exc}") from exc

    def norm(d):
        return {k.replace("-", "_"): v for k, v in d.items()}

    top = norm({k: v for k, v in data.items() if not isinstance(v, dict)})
    tables = {k: norm(v) for k, v in data.items() if isinstance(v, dict)}
    return top, tables


def resolve(args):
    """Merge flags > config file > defaults into a plain dict."""
    opts = dict(DEFAULTS[args.command])
    known = set(vars(args)) - {"command", "config"}
    if getattr(args, "config", None):
        top, tables = load_config(args.config)
        section = tables.get(args.command, {})
        unknown = set(section) - known
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        # shared keys only apply to commands that have such an option
        file_opts = {k: v for k, v in top.items() if k in known}
        file_opts.update(section)
        if "temp" in file_opts and "beta" in file_opts:
            raise UsageError("config sets both temp and beta")
        if args.__dict__.get("temp") is not None or args.__dict__.get("beta") is not None:
            file_opts.pop("temp", None)
            file_opts.pop("beta", None)
        opts.update(file_opts)
    opts.update({k: v for k, v in vars(args).items() if v is not None})
    return opts


def _beta(opts, required=True):
    if opts.get("temp") is not None:
        T = float(opts["temp"])
        if T < 0:
            raise UsageError("temperature must be non-negative")
        return math.inf if T == 0 else 1.0 / T
    if opts.get("beta") is not None:
        b = float(opts["beta"])
        if b < 0:
            raise UsageError("beta must be non-negative")
        return b
    if required:
        raise UsageError("give --temp or --beta")
    return None


def _model_params(opts):
    m = opts.get("m")
    if m is None:
        raise UsageError("--m is required")
    beta = _beta(opts)
    if math.isinf(beta):
        raise UsageError("the capacity solver needs T > 0; "
                         "use 'limits' for the T = 0 closed form")
    try:
        return ModelParams(beta=beta, omega=float(opts.get("omega", 0.0)), m=float(m),
                           stability_omega_coeff=float(opts["stability_omega_coeff"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _grid(opts):
    order = opts.get("order", DEFAULT_ORDER)
    if int(order) != order or order < 2:
        raise UsageError(f"--order must be an integer >= 2, got {order}")
    return build_grid(int(order))


# ----------------------------------------------------------------- commands

def cmd_capacity(opts, out):
    params = _model_params(opts)
    grid = _grid(opts)
    res = compute_capacity(params, grid)
    for key, val in [
        ("m", params.m), ("T", params.temperature), ("omega", params.omega),
        ("alpha_c", res.alpha_c), ("reason", res.reason), ("iterations", res.iterations),
        ("stability_value", res.stability_value), ("quadrature_order", grid.order),
    ]:
        print(f"{key} = {fmt(val)}", file=out)
    return EXIT_OK if res.reason == Reason.OK else EXIT_ZERO


@dataclass(frozen=True)
class SweepSpec:
    m: float
    t_grid: tuple
    omega_grid: tuple
    quadrature_order: int = DEFAULT_ORDER
    output_path: str = "sweep.csv"
    stability_omega_coeff: float = 16.0

    def __post_init__(self):
        if not 0 < self.m < 1:
            raise UsageError(f"m must lie in (0, 1), got {self.m}")
        for name, (start, stop, count) in (("T", self.t_grid), ("omega", self.omega_grid)):
            if int(count) != count or count < 1:
                raise UsageError(f"{name} grid count must be a positive integer")
            if start > stop:
                raise UsageError(f"{name} grid start must not exceed stop")
        if self.t_grid[0] <= 0:
            raise UsageError("temperatures must be positive")
        if self.omega_grid[0] < 0:
            raise UsageError("omega must be non-negative")
        if int(self.quadrature_order) != self.quadrature_order or self.quadrature_order < 2:
            raise UsageError("quadrature order must be an integer >= 2")

    @staticmethod
    def _axis(g):
        start, stop, count = g
        return np.linspace(start, stop, int(count))

    def points(self):
        return [(T, w) for T in self._axis(self.t_grid) for w in self._axis(self.omega_grid)]


def _sweep_point(task):
    T, w, m, order, coeff = task
    params = ModelParams(beta=1.0 / T, omega=w, m=m, stability_omega_coeff=coeff)
    try:
        res = compute_capacity(params, build_grid(order))
        return T, w, m, res.alpha_c, str(res.reason), res.iterations, res.stability_value
    except QHopfieldError:
        return T, w, m, 0.0, str(Reason.NO_SADDLE), 0, math.nan


def run_sweep(spec: SweepSpec, workers: int = 1):
    tasks = [(T, w, spec.m, int(spec.quadrature_order), spec.stability_omega_coeff)
             for T, w in spec.points()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, tasks, chunksize=1))
    return [_sweep_point(t) for t in tasks]


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def gnuplot_script(csv_name, rows, m) -> str:
    """Heat map of α_c over (T, Ω) with the zero-capacity boundary overlaid."""
    onset = {}
    for T, w, _, alpha, *_ in rows:
        if alpha == 0 and T not in onset:
            onset[T] = w
    boundary = "\n".join(f"{fmt(T)} {fmt(w)}" for T, w in sorted(onset.items()))
    return f"""# alpha_c map written by qhopfield sweep
set datafile separator ','
set terminal pngcairo size 900,700
set output '{csv_name}.png'
set xlabel 'T'
set ylabel 'Omega'
set cblabel 'alpha_c'
set title 'maximal storage capacity, m = {fmt(m)}'
set view map
set key outside
omega_c = {fmt(limits.omega_critical(m))}
$onset << EOD
{boundary}
EOD
splot '{csv_name}' skip 1 using 1:2:4 with points pt 5 ps 2 palette title 'alpha_c', \\
      $onset using 1:2:(0) with linespoints lw 2 lc rgb 'black' title 'zero-capacity onset', \\
      '+' using 1:(omega_c):(0) with lines dt 2 lc rgb 'red' title 'Omega_c(m)'
"""


def cmd_sweep(opts, out):
    for key in ("m", "temps", "omegas", "output"):
        if opts.get(key) is None:
            raise UsageError(f"--{key} is required")
    spec = SweepSpec(float(opts["m"]), tuple(opts["temps"]), tuple(opts["omegas"]),
                     opts["order"], opts["output"], float(opts["stability_omega_coeff"]))
    workers = int(opts["workers"])
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    # open both files first so an unwritable path fails before the long run
    with open(spec.output_path, "w") as fh, open(spec.output_path + ".gp", "w") as gp:
        rows = run_sweep(spec, workers)
        fh.write(sweep_csv(rows))
        gp.write(gnuplot_script(os.path.basename(spec.output_path), rows, spec.m))
    n_zero = sum(1 for r in rows if r[3] == 0)
    print(f"wrote {len(rows)} points ({n_zero} with zero capacity) to {spec.output_path}",
          file=out)
    return EXIT_OK


def _read_numbers(path):
    with open(path) as fh:
        return [[float(v) for v in line.split()] for line in fh if line.strip()]


def _open_output(path):
    return open(path, "w", newline="") if path else None


def _write_rows(path, header, rows, out):
    fh = _open_output(path)
    target = fh or out
    try:
        w = csv.writer(target, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    finally:
        if fh:
            fh.close()


def cmd_dynamics(opts, out):
    beta = _beta(opts)
    try:
        params = ModelParams(beta=beta, omega=float(opts["omega"]), m=0.5)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if opts.get("fields"):
        values = [v for row in _read_numbers(opts["fields"]) for v in row]
    else:
        values = [float(opts["h"])]
    try:
        fields = FieldProfile(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    state0 = OverlapState(float(opts["m_z0"]), float(opts["m_y0"]), float(opts["m_x0"]))
    if not state0.in_box():
        raise UsageError("initial overlaps must lie in [-1, 1]")
    dt, t_max, every = float(opts["dt"]), float(opts["t_max"]), int(opts["store_every"])
    if dt <= 0 or t_max < dt or every < 1:
        raise UsageError("need dt > 0, t_max >= dt and store_every >= 1")
    traj = integrate_dynamics(state0, params, fields, t_max, dt, store_every=every)
    rows = [(t, *s) for t, s in zip(traj.times, traj.states)]
    _write_rows(opts.get("output"), ["t", "m_z", "m_y", "m_x"], rows, out)
    if traj.box_violation > 0:
        print(f"warning: overlaps left [-1, 1] by {traj.box_violation:.3e}", file=sys.stderr)
    return EXIT_OK


def read_patterns(path):
    from .lindblad import PatternSet

    rows = _read_numbers(path)
    if not rows or len({len(r) for r in rows}) != 1:
        raise UsageError("pattern file needs equal-length rows of ±1 values")
    try:
        return PatternSet.from_rows(rows)
    except SizeError:
        raise
    except ValueError as exc:
        raise UsageError(f"bad pattern file: {exc}") from exc


def cmd_lindblad(opts, out):
    from . import lindblad as lb

    beta = _beta(opts)
    omega = float(opts["omega"])
    if omega < 0:
        raise UsageError("omega must be non-negative")
    if opts.get("patterns"):
        patterns = read_patterns(opts["patterns"])
    else:
        n, p = opts.get("n"), opts.get("random_patterns")
        if n is None or p is None:
            raise UsageError("give --patterns FILE or --n with --random-patterns")
        if n > lb.MAX_SPINS:
            raise SizeError(f"exact simulation is limited to N <= {lb.MAX_SPINS}, got {n}")
        if n < 1 or p < 1:
            raise UsageError("--n and --random-patterns must be positive")
        patterns = lb.PatternSet.random(n, p, np.random.default_rng(int(opts["seed"])))
    if opts.get("n") is not None and opts["n"] != patterns.n:
        raise UsageError(f"--n {opts['n']} does not match the {patterns.n}-spin patterns")
    check = bool(opts.get("glauber_check"))
    if check and omega != 0:
        raise UsageError("--glauber-check compares against the Ω = 0 Glauber equation")
    system = lb.SpinSystem(patterns.n, lb.hebb_couplings(patterns), beta, omega)
    rho0 = lb.pattern_state(patterns[0])
    dt, t_max, every = float(opts["dt"]), float(opts["t_max"]), int(opts["store_every"])
    if dt <= 0 or t_max < 0 or every < 1:
        raise UsageError("need dt > 0, t_max >= 0 and store_every >= 1")
    traj = lb.evolve(rho0, system, t_max, dt, store_every=every)
    header = ["t"] + [f"{a}_{mu + 1}" for mu in range(patterns.p) for a in ("m_z", "m_y", "m_x")]
    if check:
        header.append("glauber_deviation")
        classical = lb.classical_glauber_evolve(np.real(np.diag(rho0)), system, t_max, dt,
                                                store_every=every)
    rows = []
    for k, (t, rho) in enumerate(traj):
        row = [t]
        for mu in range(patterns.p):
            row += [lb.overlap_expectation(rho, patterns[mu], a) for a in "zyx"]
        if check:
            row.append(float(np.max(np.abs(np.real(np.diag(rho)) - classical.states[k]))))
        rows.append(row)
    _write_rows(opts.get("output"), header, rows, out)
    return EXIT_OK


def cmd_limits(opts, out):
    m = opts.get("m")
    if m is None:
        raise UsageError("--m is required")
    m = float(m)
    try:
        wc = limits.omega_critical(m)
        zero_t = 2.0 if m == 1.0 else limits.classical_zero_t(m)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(f"classical_zero_t = {fmt(zero_t)}", file=out)
    print(f"omega_critical = {fmt(wc)}", file=out)
    beta = opts.get("beta")
    if beta is not None:
        if beta < 0:
            raise UsageError("beta must be non-negative")
        omega = float(opts.get("omega") or 0.0)
        if omega < 0:
            raise UsageError("omega must be non-negative")
        print(f"high_t_capacity = {fmt(limits.high_t_capacity(beta, omega))}", file=out)
        if 0 < beta < math.inf and m < 1.0:
            grid = _grid(opts)
            c = limits.small_omega_coefficient(m, beta, grid)
            print(f"small_omega_coefficient = {fmt(c)}", file=out)
    return EXIT_OK


COMMANDS = {
    "capacity": cmd_capacity,
    "sweep": cmd_sweep,
    "dynamics": cmd_dynamics,
    "lindblad": cmd_lindblad,
    "limits": cmd_limits,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts, out)
    except UsageError as exc:
        print(f"qhopfield {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SizeError as exc:
        print(f"qhopfield {args.command}: {exc}", file=sys.stderr)
        return EXIT_ZERO
    except QHopfieldError as exc:
        print(f"qhopfield {args.command}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"qhopfield {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
