"""Scenario-driven command line front end.

Scenarios are JSON files with matrices as nested row-major arrays::

    {"kind": "ode", "A": [[2,0],[0,-1]], "B": [[1],[1]], "C": [[0,1.7320508]],
     "F": [[1.7320508,0]], "x0": [1,1], "y_c": [0], "y_e": [1], "t1": 10}

Exit codes: 0 ok, 1 usage/parse error, 2 a named solvability assumption
fails (printed), 3 numerical failure.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dae_lqr, dae_riccati, lqr, oracle, plants, riccati
from .errors import AssumptionViolation, DimensionError, NumericalError
from .linalg import Tolerances

_EXAMPLE_ABC = {
    "A": [[2.0, 0.0], [0.0, -1.0]],
    "B": [[1.0], [1.0]],
    "C": [[0.0, np.sqrt(3.0)]],
}


class ScenarioError(Exception):
    """Parse/validation failure with a JSON-path-precise message."""


@dataclass
class Scenario:
    kind: str
    plant: object
    x0: np.ndarray
    y_c: np.ndarray
    y_e: np.ndarray
    t1: float
    grid: int
    tol: Tolerances
    seed: int
    raw: dict
    path: Path


def _expect(data, key, path, required=True, default=None):
    if key not in data:
        if required:
            raise ScenarioError(f"{path}: missing required field '{key}'")
        return default
    return data[key]


def _as_matrix_field(obj, key, path):
    val = obj[key]
    if not isinstance(val, list) or not val or not all(
            isinstance(r, list) for r in val):
        raise ScenarioError(f"{path}.{key}: expected a non-empty nested array")
    width = len(val[0])
    for i, row in enumerate(val):
        if len(row) != width:
            raise ScenarioError(
                f"{path}.{key}[{i}]: has {len(row)} entries, expected {width}")
        for j, entry in enumerate(row):
            if not isinstance(entry, (int, float)) or isinstance(entry, bool):
                raise ScenarioError(
                    f"{path}.{key}[{i}][{j}]: expected a number, got "
                    f"{type(entry).__name__}")
    return np.asarray(val, dtype=float)


def _as_vector_field(obj, key, path, expected_len=None):
    val = obj[key]
    if not isinstance(val, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
        raise ScenarioError(f"{path}.{key}: expected a flat numeric array")
    v = np.asarray(val, dtype=float)
    if expected_len is not None and v.size != expected_len:
        raise ScenarioError(
            f"{path}.{key}: has {v.size} entries, expected {expected_len}")
    return v


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario file ({exc})")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}")
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a JSON object")

    where = path.name
    kind = _expect(data, "kind", where)
    if kind not in ("ode", "dae"):
        raise ScenarioError(f"{where}.kind: must be 'ode' or 'dae', got {kind!r}")
    for key in ("A", "B", "C", "F"):
        _expect(data, key, where)
    mats = {key: _as_matrix_field(data, key, where) for key in ("A", "B", "C", "F")}
    n = mats["A"].shape[0]

    try:
        if kind == "dae":
            _expect(data, "E", where)
            mats["E"] = _as_matrix_field(data, "E", where)
            plant = plants.DescriptorPlant(E=mats["E"], A=mats["A"], B=mats["B"],
                                           C=mats["C"], F=mats["F"])
        else:
            plant = plants.LtiPlant(A=mats["A"], B=mats["B"], C=mats["C"],
                                    F=mats["F"])
    except DimensionError as exc:
        raise ScenarioError(f"{where}: {exc}")

    x0 = _as_vector_field(data, "x0", where, n) if "x0" in data else np.zeros(n)
    y_c = (_as_vector_field(data, "y_c", where, plant.k)
           if "y_c" in data else np.zeros(plant.k))
    y_e = (_as_vector_field(data, "y_e", where, mats["F"].shape[0])
           if "y_e" in data else np.zeros(mats["F"].shape[0]))
    t1 = _expect(data, "t1", where)
    if not isinstance(t1, (int, float)) or isinstance(t1, bool) or t1 <= 0:
        raise ScenarioError(f"{where}.t1: expected a positive number")
    grid = _expect(data, "grid", where, required=False, default=101)
    if not isinstance(grid, int) or grid < 2:
        raise ScenarioError(f"{where}.grid: expected an integer >= 2")
    seed = _expect(data, "seed", where, required=False, default=0)
    if not isinstance(seed, int):
        raise ScenarioError(f"{where}.seed: expected an integer")

    tol_kwargs = {}
    tol_data = _expect(data, "tolerances", where, required=False, default={})
    if not isinstance(tol_data, dict):
        raise ScenarioError(f"{where}.tolerances: expected an object")
    for key in ("ode_rel", "ode_abs", "residual", "rank_rel", "psd_slack"):
        if key in tol_data:
            val = tol_data[key]
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ScenarioError(f"{where}.tolerances.{key}: expected a number")
            tol_kwargs[key] = float(val)
    try:
        tol = Tolerances(**tol_kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{where}.tolerances: {exc}")

    return Scenario(kind=kind, plant=plant, x0=x0, y_c=y_c, y_e=y_e,
                    t1=float(t1), grid=grid, tol=tol, seed=seed, raw=data,
                    path=path)


def normalized_json(sc):
    """Canonical scenario serialization; re-parses to an identical plant."""
    out = {"kind": sc.kind}
    if sc.kind == "dae":
        out["E"] = sc.plant.E.tolist()
    for key in ("A", "B", "C", "F"):
        out[key] = getattr(sc.plant, key).tolist()
    out["x0"] = sc.x0.tolist()
    out["y_c"] = sc.y_c.tolist()
    out["y_e"] = sc.y_e.tolist()
    out["t1"] = sc.t1
    out["grid"] = sc.grid
    out["seed"] = sc.seed
    if "tolerances" in sc.raw:
        out["tolerances"] = sc.raw["tolerances"]
    return json.dumps(out, indent=2, sort_keys=False)


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _out_dir(args, sc=None):
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        return d
    if sc is not None:
        return sc.path.parent
    return Path.cwd()


def _print_report(lines):
    for key, val in lines:
        print(f"{key}: {val}")


def _structural_lines(rep):
    lines = [("regular", rep.regular),
             ("impulse_controllable", rep.impulse_controllable),
             ("impulse_free", rep.impulse_free),
             ("finite_dynamics_stable", rep.finite_dynamics_stable),
             ("f_compatible", rep.f_compatible)]
    for note in rep.notes:
        lines.append(("note", note))
    return lines


def cmd_check(sc, args):
    plant = sc.plant if sc.kind == "dae" else plants.wrap_standard(sc.plant)
    rep = plants.structural_report(plant, sc.tol,
                                   seed=plants._REGULARITY_SEED + sc.seed)
    _print_report(_structural_lines(rep))
    return 0


def _ode_are_bundle(sc):
    are = riccati.stabilizing_solution(sc.plant, sc.tol)
    gram = riccati.gramians(are, sc.plant.B, sc.tol)
    s = sc.plant.terminal_weight
    conv = riccati.check_convergence_condition(s, are, gram, sc.tol)
    return are, gram, s, conv


def cmd_are(sc, args):
    if sc.kind == "ode":
        are, gram, s, conv = _ode_are_bundle(sc)
        _print_report([
            ("norm_P_plus_fro", _fmt(np.linalg.norm(are.P_plus, "fro"))),
            ("spectral_abscissa", _fmt(are.lam)),
            ("residual", _fmt(are.residual)),
            ("convergence_condition", conv),
        ])
    else:
        gare = dae_riccati.solve_gare(sc.plant, sc.tol)
        try:
            dae_riccati.structured_delta(gare, gare.partition.S1, sc.tol)
            conv = True
        except AssumptionViolation:
            conv = False
        _print_report([
            ("norm_P_plus_fro", _fmt(np.linalg.norm(gare.P_plus, "fro"))),
            ("norm_P1_fro", _fmt(np.linalg.norm(gare.P1, "fro"))),
            ("lambda_bar", _fmt(gare.lambda_bar)),
            ("residual", _fmt(gare.residual)),
            ("convergence_condition", conv),
        ])
    return 0


def cmd_dre(sc, args):
    grid = args.grid or sc.grid
    if sc.kind == "ode":
        dre = riccati.solve_dre(sc.plant, sc.t1, grid, sc.tol)
        norms = dre.norm_fro()
        ts = dre.grid
    else:
        gdre = dae_riccati.solve_gdre(sc.plant, sc.t1, grid, sc.tol)
        ts = gdre.grid
        norms = np.array([np.linalg.norm(gdre.assemble(i), "fro")
                          for i in range(len(ts))])
    out = _out_dir(args, sc) / f"{sc.path.stem}_dre.csv"
    write_csv(out, ["t", "normP_fro"], zip(ts, norms))
    _print_report([("normP_at_0", _fmt(norms[0])),
                   ("normP_at_t1", _fmt(norms[-1])),
                   ("csv", out)])
    return 0


def _solve_trajectory(sc, grid):
    if sc.kind == "ode":
        traj = lqr.optimal_trajectory(sc.plant, sc.x0, sc.y_c, sc.y_e, sc.t1,
                                      grid, sc.tol)
        return traj.grid, traj.x, traj.u, traj.y, traj.cost, traj
    traj = dae_lqr.dae_optimal_trajectory(sc.plant, sc.x0, sc.y_c, sc.y_e,
                                          sc.t1, grid, sc.tol)
    x = traj.x
    return traj.grid, x, traj.u, x @ sc.plant.C.T, traj.cost, traj


def cmd_simulate(sc, args):
    grid = args.grid or sc.grid
    ts, xs, us, ys, cost, _ = _solve_trajectory(sc, grid)
    n, m, k = xs.shape[1], us.shape[1], ys.shape[1]
    header = (["t"] + [f"x_{i + 1}" for i in range(n)]
              + [f"u_{i + 1}" for i in range(m)]
              + [f"y_{i + 1}" for i in range(k)])
    rows = (np.concatenate([[t], x, u, y])
            for t, x, u, y in zip(ts, xs, us, ys))
    out = _out_dir(args, sc) / f"{sc.path.stem}_trajectory.csv"
    write_csv(out, header, rows)
    _print_report([("cost", _fmt(cost)), ("csv", out)])
    return 0


def cmd_turnpike(sc, args):
    grid = args.grid or sc.grid
    if sc.kind == "ode":
        are, gram, s, conv = _ode_are_bundle(sc)
        steady = lqr.steady_state(sc.plant, are, sc.y_c, sc.tol)
        traj = lqr.optimal_trajectory(sc.plant, sc.x0, sc.y_c, sc.y_e, sc.t1,
                                      grid, sc.tol)
        remainder = None
        if conv:
            dec = lqr.decompose_state(traj, are, gram, s, steady, sc.tol)
            remainder = np.linalg.norm(dec.g, axis=1)
        report = lqr.turnpike_report(traj, steady, lam=are.lam,
                                     remainder=remainder)
        lam_theory = are.lam
    else:
        gare = dae_riccati.solve_gare(sc.plant, sc.tol)
        steady = dae_lqr.dae_steady_state(gare, sc.y_c, sc.tol)
        traj = dae_lqr.dae_optimal_trajectory(sc.plant, sc.x0, sc.y_c, sc.y_e,
                                              sc.t1, grid, sc.tol)
        report = dae_lqr.dae_turnpike_report(traj, steady,
                                             lambda_bar=gare.lambda_bar)
        try:
            dae_riccati.structured_delta(gare, gare.partition.S1, sc.tol)
            conv = True
        except AssumptionViolation:
            conv = False
        lam_theory = gare.lambda_bar
    out = _out_dir(args, sc) / f"{sc.path.stem}_turnpike.csv"
    write_csv(out, ["t", "dist_x", "dist_u", "envelope"],
              zip(traj.grid, report.dist_x, report.dist_u, report.envelope))
    _print_report([
        ("convergence_condition", conv),
        ("lambda_theory", _fmt(lam_theory)),
        ("lambda_hat", _fmt(report.lambda_hat)),
        ("C_hat", _fmt(report.C_hat)),
        ("envelope_holds", report.envelope_holds),
        ("max_violation", _fmt(report.max_violation)),
        ("csv", out),
    ])
    return 0


def cmd_oracle(sc, args):
    steps = args.steps or 500
    sol = oracle.transcribe_and_solve(sc.plant, sc.x0, sc.y_c, sc.y_e, sc.t1,
                                      steps, sc.tol)
    ts, xs, us, _, cost, _ = _solve_trajectory(sc, steps + 1)
    err_x = np.linalg.norm(xs - sol.x, axis=1)
    header = ["t"]
    n = xs.shape[1]
    header += [f"x_ric_{i + 1}" for i in range(n)]
    header += [f"x_orc_{i + 1}" for i in range(n)]
    header += ["err_x"]
    rows = (np.concatenate([[t], xr, xo, [e]])
            for t, xr, xo, e in zip(ts, xs, sol.x, err_x))
    out = _out_dir(args, sc) / f"{sc.path.stem}_oracle.csv"
    write_csv(out, header, rows)
    rel_cost = abs(sol.cost - cost) / (1.0 + abs(cost))
    _print_report([
        ("steps", steps),
        ("max_state_error", _fmt(float(np.max(err_x)))),
        ("riccati_cost", _fmt(cost)),
        ("oracle_cost", _fmt(sol.cost)),
        ("relative_cost_gap", _fmt(rel_cost)),
        ("kkt_residual", _fmt(sol.kkt_residual)),
        ("csv", out),
    ])
    return 0


def _figure1_plants():
    a = np.asarray(_EXAMPLE_ABC["A"])
    b = np.asarray(_EXAMPLE_ABC["B"])
    c = np.asarray(_EXAMPLE_ABC["C"])
    f_equal = c.copy()                       # terminal weight along the output
    f_perp = np.array([[np.sqrt(3.0), 0.0]])  # complementary terminal weight
    return (plants.LtiPlant(A=a, B=b, C=c, F=f_equal),
            plants.LtiPlant(A=a, B=b, C=c, F=f_perp))


def cmd_figure1(args):
    tol = Tolerances()
    t1, grid = 10.0, 101
    x0 = np.array([1.0, 1.0])
    y_c = np.array([0.0])
    y_e = np.array([1.0])
    plant_fc, plant_fperp = _figure1_plants()
    out_dir = _out_dir(args)
    manifest = []
    for tag, plant in (("fc", plant_fc), ("fperp", plant_fperp)):
        dre = riccati.solve_dre(plant, t1, grid, tol)
        path = out_dir / f"figure1_dre_{tag}.csv"
        write_csv(path, ["t", "normP_fro"], zip(dre.grid, dre.norm_fro()))
        manifest.append(path)
        traj = lqr.optimal_trajectory(plant, x0, y_c, y_e, t1, grid, tol)
        rows = []
        for t, x in zip(traj.grid, traj.x):
            rows.append([t, abs(x[0]), abs(x[1]), np.linalg.norm(x),
                         abs(float((plant.F @ x)[0])),
                         abs(float((plant.C @ x)[0]))])
        path = out_dir / f"figure1_state_{tag}.csv"
        write_csv(path, ["t", "abs_x1", "abs_x2", "norm_x", "abs_Fx", "abs_Cx"],
                  rows)
        manifest.append(path)
    for path in manifest:
        print(f"csv: {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lqturnpike",
        description="Finite-horizon LQR and turnpike diagnostics for "
                    "state-space and descriptor plants")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, scenario=True):
        p = sub.add_parser(name, help=help_text)
        if scenario:
            p.add_argument("scenario", help="path to a JSON scenario file")
            p.add_argument("--dump-normalized", action="store_true",
                           help="print the normalized scenario JSON and exit")
        p.add_argument("--out", default=None, help="output directory for CSV")
        p.add_argument("--grid", type=int, default=None,
                       help="override the output grid size")
        p.add_argument("--steps", type=int, default=None,
                       help="transcription steps (oracle command)")
        p.add_argument("--tol-ode", type=float, default=None,
                       help="override the relative integration tolerance")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        return p

    add("check", "structural checks only")
    add("are", "stabilizing algebraic Riccati solve")
    add("dre", "backward differential Riccati solve, CSV of norm trace")
    add("simulate", "optimal trajectory, CSV of state/input/output")
    add("turnpike", "turnpike fit and envelope check, CSV of distances")
    add("oracle", "compare against the direct-transcription oracle")
    add("figure1", "reproduce the built-in two-panel reference data",
        scenario=False)
    return parser


_COMMANDS = {
    "check": cmd_check,
    "are": cmd_are,
    "dre": cmd_dre,
    "simulate": cmd_simulate,
    "turnpike": cmd_turnpike,
    "oracle": cmd_oracle,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    try:
        if args.command == "figure1":
            return cmd_figure1(args)
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc.seed = args.seed
        if args.tol_ode is not None:
            sc.tol = Tolerances(ode_rel=args.tol_ode, ode_abs=sc.tol.ode_abs,
                                residual=sc.tol.residual,
                                rank_rel=sc.tol.rank_rel,
                                psd_slack=sc.tol.psd_slack)
        if args.grid is not None and args.grid < 2:
            print("error: --grid must be >= 2", file=sys.stderr)
            return 1
        if getattr(args, "dump_normalized", False):
            print(normalized_json(sc))
            return 0
        return _COMMANDS[args.command](sc, args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, DimensionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
