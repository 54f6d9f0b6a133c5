"""Command-line front end.

Exit codes: 0 success, 1 validation error or bad arguments, 2 when a no-go
assertion fails, an anomaly is recorded, or the certificate and the search
disagree (or the search did not converge).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .certificate import cross_validate, certify_passivity
from .energy_invariant import build_extraction_unitary, simulate_extraction
from .ergotropy import ergotropy, passive_state
from .nogo import correlated_qubit_nogo_check, uncorrelated_nogo_check
from .qstate import DensityMatrix, HermitianOperator, ValidationError, energy
from .sampling import random_density_matrix, random_hamiltonian
from .scenario_io import ScenarioSpec, clean, dumps, fmt_float, load_scenario, matrix_out

log = logging.getLogger("catbench")

EXIT_OK, EXIT_INVALID, EXIT_ANOMALY = 0, 1, 2
SWEEP_PARAMS = ("k", "h_B", "h_C", "d_C", "seed")
DEFAULT_BUDGET = {"certify-passivity": 20, "nogo-uncorrelated": 50, "nogo-correlated": 50}

NOGO_COLUMNS = [
    "kind", "ergotropy", "best_extraction", "residual", "restarts", "violated", "feasible", "converged",
    "upper_bound", "n_feasible_samples", "entropy_check", "delta_E", "max_delta_E", "spectrum_anomalies",
    "anomalies", "exploratory",
]
COLUMNS = {
    "ergotropy": ["energy", "passive_energy", "ergotropy"],
    "extract-full": [
        "initial_energy", "final_energy", "extracted", "ergotropy", "catalyst_energy_before",
        "catalyst_energy_after", "catalyst_drift", "ground_fidelity", "degenerate_ground", "coherent",
    ],
    "certify-passivity": [
        "x", "x_degenerate", "x_consistency", "x_consistent", "hermiticity_defect", "min_eigenvalue",
        "passive", "reliable", "optimizer_best_extraction", "converged", "agreement", "restarts",
    ],
    "nogo-uncorrelated": NOGO_COLUMNS,
    "nogo-correlated": NOGO_COLUMNS,
}
# columns drawn in the sweep figure
PLOT_COLUMNS = {
    "ergotropy": ["ergotropy"],
    "extract-full": ["extracted", "ergotropy"],
    "certify-passivity": ["min_eigenvalue", "optimizer_best_extraction"],
    "nogo-uncorrelated": ["ergotropy", "best_extraction"],
    "nogo-correlated": ["ergotropy", "best_extraction"],
}


@dataclass
class Result:
    scalars: dict
    status: str = "ok"
    notes: list[str] = field(default_factory=list)
    states: dict = field(default_factory=dict)
    operators: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# commands


def cmd_ergotropy(spec: ScenarioSpec, opts: dict) -> Result:
    dec = passive_state(spec.rho_B, spec.H_B)
    scal = {"energy": energy(spec.rho_B, spec.H_B), "passive_energy": dec.passive_energy,
            "ergotropy": ergotropy(spec.rho_B, spec.H_B)}
    return Result(scal, states={"passive_state": matrix_out(dec.passive_state.data)})


def cmd_extract_full(spec: ScenarioSpec, opts: dict) -> Result:
    H_C = spec.H_C if spec.H_C is not None else spec.H_B
    proto = build_extraction_unitary(spec.rho_B, spec.H_B, H_C, spec.tolerances)
    rep = simulate_extraction(
        spec.rho_B, spec.H_B, proto.catalyst_state, H_C, proto.joint_unitary, proto.ground_vector,
        proto.degenerate_ground,
    )
    scal = rep.scalars()
    scal["coherent"] = proto.coherent
    res = Result(
        scal,
        states={"catalyst": matrix_out(proto.catalyst_state.data),
                "final_battery": matrix_out(rep.final_battery_state.data)},
        operators={"joint_unitary": matrix_out(proto.joint_unitary.data)},
    )
    if rep.catalyst_drift > spec.tolerances.cat:
        res.status = "anomaly"
        res.notes.append(f"catalyst energy drift {rep.catalyst_drift:.3e} exceeds {spec.tolerances.cat:.1e}")
    return res


def cmd_certify(spec: ScenarioSpec, opts: dict) -> Result:
    sc = spec.scenario("energy-invariant")
    budget = int(opts["budget"])
    if budget > 0:
        cv = cross_validate(sc, budget, int(opts["seed"]))
        cert, scal = cv.certificate, cv.scalars()
    else:
        cert = certify_passivity(sc.rho_B, sc.H_B, sc.rho_C, sc.H_C, sc.tolerances)
        scal = cert.scalars()
        scal.update(converged=None, agreement=None, restarts=0)
    res = Result(scal)
    if opts.get("full"):
        res.operators = {"Cpp": matrix_out(cert.Cpp.data), "Ctilde": matrix_out(cert.Ctilde.data)}
    if not cert.reliable:
        res.notes.append(f"multiplier ratios spread by {cert.x_consistency:.3e}; certificate marked unreliable")
    if budget > 0 and scal["agreement"] is not True:
        res.status = "anomaly"
        res.notes.append("certificate and search disagree" if scal["agreement"] is False
                         else "search did not converge; agreement unknown")
    return res


def _nogo_result(report) -> Result:
    res = Result(report.scalars(), notes=list(report.anomalies))
    if report.anomalies and not report.exploratory:
        res.status = "anomaly"
    return res


def cmd_nogo_uncorrelated(spec: ScenarioSpec, opts: dict) -> Result:
    rep = uncorrelated_nogo_check(spec.scenario("uncorrelated"), int(opts["budget"]), int(opts["seed"]))
    return _nogo_result(rep)


def cmd_nogo_correlated(spec: ScenarioSpec, opts: dict) -> Result:
    rep = correlated_qubit_nogo_check(
        spec.scenario("correlated"), int(opts["budget"]), int(opts["seed"]), exploratory=bool(opts.get("exploratory"))
    )
    return _nogo_result(rep)


COMMANDS = {
    "ergotropy": cmd_ergotropy,
    "extract-full": cmd_extract_full,
    "certify-passivity": cmd_certify,
    "nogo-uncorrelated": cmd_nogo_uncorrelated,
    "nogo-correlated": cmd_nogo_correlated,
}


# ---------------------------------------------------------------------------
# sweeps


def vary(spec: ScenarioSpec, param: str, value: float) -> ScenarioSpec:
    """Scenario for one grid point.

    ``k`` sets a qubit battery ``diag((1+k)/2, (1-k)/2)``; ``h_B`` and
    ``h_C`` scale the Hamiltonians of the base file; ``d_C`` draws a random
    catalyst state and Hamiltonian of that dimension from the scenario
    seed; ``seed`` replaces the scenario seed.
    """
    tol = spec.tolerances
    if param == "k":
        if spec.rho_B.dim != 2 or not -1.0 <= value <= 1.0:
            raise ValidationError("sweep-k", "k sweeps need a qubit battery and |k| <= 1")
        return replace(spec, rho_B=DensityMatrix(np.diag([(1 + value) / 2, (1 - value) / 2]), tol=tol))
    if param == "h_B":
        return replace(spec, H_B=HermitianOperator(value * spec.H_B.data, tol=tol))
    if param == "h_C":
        spec.require_catalyst()
        return replace(spec, H_C=HermitianOperator(value * spec.H_C.data, tol=tol))
    if param == "d_C":
        d = int(round(value))
        if d < 1 or d != value:
            raise ValidationError("sweep-d_C", f"d_C must be a positive integer, got {value}")
        rng = np.random.default_rng([spec.seed, d])
        return replace(spec, rho_C=random_density_matrix(d, rng), H_C=random_hamiltonian(d, rng))
    if param == "seed":
        return replace(spec, seed=int(value))
    raise ValidationError("sweep-param", f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(fmt_float(v))
    return v


def run_sweep(spec: ScenarioSpec, command: str, param: str, grid: list[float], opts: dict):
    if param not in SWEEP_PARAMS:
        raise ValidationError("sweep-param", f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if command not in COMMANDS:
        raise ValidationError("sweep-command", f"cannot sweep command {command!r}")
    rows, status = [], "ok"
    for i, value in enumerate(grid):
        point = vary(spec, param, value)
        point_opts = dict(opts)
        if param == "seed":
            point_opts["seed"] = int(value)
        res = COMMANDS[command](point, point_opts)
        if res.status != "ok":
            status = "anomaly"
        row = {"point": i, "param": param, "value": value, "status": res.status}
        row.update({c: clean(res.scalars.get(c)) for c in COLUMNS[command]})
        rows.append(row)
    return rows, status


def sweep_csv(rows: list[dict], command: str) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["point", "param", "value", "status"] + COLUMNS[command], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_cell(v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# entry point


def _parse_tols(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError("tolerance-format", f"--tol expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ValidationError("tolerance-format", f"--tol {name}: {value!r} is not a number") from None
    return out


def _parse_grid(text: str | None) -> list[float]:
    if text is None or not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError("sweep-grid", f"grid {text!r} is not a comma-separated list of numbers") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="catbench", description="Catalytic energy extraction from quantum batteries.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--out", help="report path (stdout when omitted)")
        sp.add_argument("--seed", type=int, help="search seed (default: file option, then scenario seed)")
        sp.add_argument("--budget", type=int, help="number of search restarts")
        sp.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    for name in COMMANDS:
        sp = sub.add_parser(name)
        common(sp)
        if name == "certify-passivity":
            sp.add_argument("--full", action="store_true", help="include C'' and its tilde transform")
        if name == "nogo-correlated":
            sp.add_argument("--exploratory", action="store_true", help="allow larger batteries; record only")
    sp = sub.add_parser("sweep")
    common(sp)
    sp.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    sp.add_argument("--grid", default="", help="comma-separated values")
    sp.add_argument("--command", dest="sweep_command", default="extract-full", help="command run at every grid point")
    sp.add_argument("--exploratory", action="store_true")
    sp.add_argument("--no-plot", action="store_true", help="skip the figure written next to the CSV")
    return p


def _options(args, spec: ScenarioSpec, command: str) -> dict:
    opts = dict(spec.options)
    if args.seed is not None:
        opts["seed"] = args.seed
    opts.setdefault("seed", spec.seed)
    if args.budget is not None:
        opts["budget"] = args.budget
    opts.setdefault("budget", DEFAULT_BUDGET.get(command, 0))
    if int(opts["budget"]) < 0:
        raise ValidationError("budget", "budget must be non-negative")
    for flag in ("full", "exploratory"):
        if getattr(args, flag, False):
            opts[flag] = True
    return opts


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _report(command: str, spec: ScenarioSpec, opts: dict, res: Result) -> dict:
    return clean({
        "command": command,
        "status": res.status,
        "scalars": res.scalars,
        "notes": res.notes,
        "options": {k: opts[k] for k in sorted(opts) if k in ("seed", "budget", "full", "exploratory")},
        "tolerances": spec.tolerances.as_dict(),
        "states": res.states,
        "operators": res.operators,
    })


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = load_scenario(args.scenario, _parse_tols(args.tol))
        if args.command == "sweep":
            command = args.sweep_command
            opts = _options(args, spec, command)
            rows, status = run_sweep(spec, command, args.param, _parse_grid(args.grid), opts)
            if args.format == "json":
                text = dumps({"command": "sweep", "sweep_command": command, "param": args.param,
                              "status": status, "tolerances": clean(spec.tolerances.as_dict()), "rows": rows})
            else:
                text = sweep_csv(rows, command)
            _emit(text, args.out)
            if args.out and not args.no_plot and rows:
                from .plotting import plot_sweep

                plot_sweep(rows, args.param, PLOT_COLUMNS[command], Path(args.out).with_suffix(".png"), title=command)
        else:
            opts = _options(args, spec, args.command)
            res = COMMANDS[args.command](spec, opts)
            status = res.status
            if args.format == "json":
                text = dumps(_report(args.command, spec, opts, res))
            else:
                cols = COLUMNS[args.command]
                text = sweep_csv([{"point": 0, "param": "", "value": "", "status": status,
                                   **{c: clean(res.scalars.get(c)) for c in cols}}], args.command)
            _emit(text, args.out)
            for note in res.notes:
                log.warning(note)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK if status == "ok" else EXIT_ANOMALY


if __name__ == "__main__":
    sys.exit(main())
