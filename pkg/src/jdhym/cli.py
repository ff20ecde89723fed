"""Batch front door: config ingestion, dispatch, JSON/CSV report emission.

Commands: ``solve-j``, ``solve-dhym``, ``check-stability``, ``functionals``,
``verify-lemmas``.  Exit codes: 0 success, 1 malformed config, 2 precondition
failure (unstable/inadmissible input detected), 3 non-convergence, 4 cone
breach.  Reports contain no timestamps, so identical config and seed produce
byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import properties
from .errors import (BranchUndefinedError, ConeBreachError, ContinuationError,
                     DataError, DomainError, PreconditionError, UsageError)
from .fields import (FormField, ScalarField, TorusGeometry, field_from_modes,
                     form_field, save_scalar_field)
from .hermitian import ConeSpec
from .functionals import (FunctionalReport, aubin_i, compute_c0,
                          coercivity_probe, j_chi_functional,
                          j_omega0_functional)
from .solver import (SolverConfig, continuity_path_dhym, continuity_path_j,
                     newton_solve)
from .stability import (IntersectionData, dhym_hypothesis_check,
                        max_uniform_epsilon, slope_test)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PRECONDITION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CONE_BREACH = 4


class ConfigError(Exception):
    """Carries a dotted field path for the diagnostic."""

    def __init__(self, path, message):
        super().__init__(f"config field '{path}': {message}")


def _need(doc: dict, path: str, key: str, types=None):
    if key not in doc:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    val = doc[key]
    if types is not None and not isinstance(val, types):
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {types}, got {type(val).__name__}")
    return val


def _parse_matrix(entry, path: str, n: int) -> np.ndarray:
    if not isinstance(entry, list) or len(entry) != n:
        raise ConfigError(path, f"expected {n} rows")
    rows = []
    for i, row in enumerate(entry):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"{path}[{i}]", f"expected {n} [re, im] pairs")
        prow = []
        for j, pair in enumerate(row):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"{path}[{i}][{j}]", "expected [re, im]")
            prow.append(complex(float(pair[0]), float(pair[1])))
        rows.append(prow)
    mat = np.array(rows)
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.conj().T)) > 1e-10 * scale:
        raise ConfigError(path, "matrix is not Hermitian to 1e-10")
    if np.any(np.linalg.eigvalsh(mat) <= 1e-10 * scale):
        raise ConfigError(path, "matrix is not positive definite to 1e-10")
    return mat


def _parse_potential(entry, path: str, geom: TorusGeometry) -> ScalarField | None:
    if entry is None:
        return None
    if not isinstance(entry, list):
        raise ConfigError(path, "expected a list of modes")
    modes = []
    for i, m in enumerate(entry):
        if not isinstance(m, dict) or "freq" not in m or "amp" not in m:
            raise ConfigError(f"{path}[{i}]", "expected {freq, amp[, phase]}")
        modes.append((m["freq"], m["amp"], m.get("phase", 0.0)))
    try:
        return field_from_modes(geom, modes)
    except UsageError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_form(doc, path: str, geom: TorusGeometry) -> FormField:
    base = _parse_matrix(_need(doc, path, "base"), f"{path}.base", geom.n)
    pot = _parse_potential(doc.get("potential"), f"{path}.potential", geom)
    return form_field(geom, base, pot)


def _parse_geometry(doc: dict) -> TorusGeometry:
    g = _need(doc, "", "geometry", dict)
    try:
        return TorusGeometry(int(_need(g, "geometry", "n")), int(_need(g, "geometry", "N")))
    except UsageError as exc:
        raise ConfigError("geometry", str(exc)) from exc


def _parse_solver(doc: dict) -> SolverConfig:
    s = doc.get("solver", {})
    if not isinstance(s, dict):
        raise ConfigError("solver", "expected an object")
    try:
        return SolverConfig(
            tolerance=float(s.get("tolerance", 1e-10)),
            max_newton=int(s.get("max_newton", 30)),
            damping=float(s.get("damping", 1.0)),
            path_steps=int(s.get("path_steps", 8)),
            linear_tol=float(s.get("linear_tol", 1e-10)),
            linear_max_iter=int(s.get("linear_max_iter", 400)),
        )
    except UsageError as exc:
        raise ConfigError("solver", str(exc)) from exc


def _constant_or_modes(doc, key, path, geom) -> ScalarField:
    entry = doc.get(key)
    if entry is None:
        return ScalarField.zeros(geom)
    if isinstance(entry, (int, float)):
        return ScalarField.constant(geom, float(entry))
    return _parse_potential(entry, path, geom)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_history_csv(path: Path, report) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "sup_residual"])
        for i, r in enumerate(report.residual_history):
            w.writerow([i, f"{r:.17g}"])
        if report.path_history:
            w.writerow([])
            w.writerow(["stage", "t", "iterations", "residual", "cone_margin", "multiplier"])
            for h in report.path_history:
                w.writerow([h["stage"], f"{h['t']:.17g}", h["iterations"],
                            f"{h['residual']:.17g}", f"{h['cone_margin']:.17g}",
                            f"{h['multiplier']:.17g}"])


def _emit_solve(report, out: Path, chi, omega0) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_scalar_field(out / "phi", report.phi, base=omega0.base)
    _write_json(out / "report.json", report.to_json_dict(phi_file="phi.json"))
    _write_history_csv(out / "residual_history.csv", report)


def _with_cone(config: SolverConfig, cfg: dict, make_cone) -> SolverConfig:
    slack = float(cfg.get("solver", {}).get("cone_slack", 0.0))
    if slack <= 0.0:
        return config
    return dataclasses.replace(config, cone=make_cone(slack))


def _cmd_solve_j(cfg: dict, out: Path, args) -> int:
    geom = _parse_geometry(cfg)
    chi = _parse_form(_need(cfg, "", "chi", dict), "chi", geom)
    omega0 = _parse_form(_need(cfg, "", "omega0", dict), "omega0", geom)
    c = cfg.get("c", "c0")
    if c == "c0" or c is None:
        c = compute_c0(chi, omega0)
    f_target = _constant_or_modes(cfg, "f", "f", geom)
    config = _with_cone(_parse_solver(cfg), cfg,
                        lambda s: ConeSpec.j(float(c), s))
    report = continuity_path_j(chi, omega0, f_target, float(c), config)
    _emit_solve(report, out, chi, omega0)
    return EXIT_OK if report.success else EXIT_NO_CONVERGENCE


def _cmd_solve_dhym(cfg: dict, out: Path, args) -> int:
    geom = _parse_geometry(cfg)
    chi = _parse_form(_need(cfg, "", "chi", dict), "chi", geom)
    omega0 = _parse_form(_need(cfg, "", "omega0", dict), "omega0", geom)
    if "theta0" in cfg:
        theta0 = float(cfg["theta0"])
    elif "theta_hat" in cfg:
        theta0 = geom.n * math.pi / 2.0 - float(cfg["theta_hat"])
    else:
        raise ConfigError("theta0", "missing (provide theta0 or theta_hat)")
    f_target = _constant_or_modes(cfg, "f", "f", geom)
    config = _with_cone(_parse_solver(cfg), cfg,
                        lambda s: ConeSpec.dhym(theta0, s))
    report = continuity_path_dhym(chi, omega0, f_target, theta0, config)
    _emit_solve(report, out, chi, omega0)
    return EXIT_OK if report.success else EXIT_NO_CONVERGENCE


def _parse_datasets(cfg: dict) -> list[IntersectionData]:
    entries = _need(cfg, "", "datasets", list)
    out = []
    for i, d in enumerate(entries):
        if not isinstance(d, dict):
            raise ConfigError(f"datasets[{i}]", "expected an object")
        try:
            out.append(IntersectionData(
                p=int(_need(d, f"datasets[{i}]", "p")),
                n=int(_need(d, f"datasets[{i}]", "n")),
                a=tuple(float(v) for v in _need(d, f"datasets[{i}]", "a", list)),
                label=str(d.get("label", f"dataset-{i}"))))
        except UsageError as exc:
            raise ConfigError(f"datasets[{i}]", str(exc)) from exc
    return out


def _cmd_check_stability(cfg: dict, out: Path, args) -> int:
    datasets = _parse_datasets(cfg)
    jobs = max(1, int(args.jobs))
    out.mkdir(parents=True, exist_ok=True)
    warnings = [w for d in datasets for w in d.kahler_warnings()]
    if "c" in cfg:
        c = float(cfg["c"])
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            margins = list(pool.map(lambda d: slope_test(d, c, 0.0), datasets))
        eps = max_uniform_epsilon(datasets, c)
        verdict = {
            "mode": "slope",
            "c": c,
            "warnings": warnings,
            "margins_at_zero_slack": [
                {"label": d.label, "p": d.p, "margin": m}
                for d, m in zip(datasets, margins)],
            "max_uniform_epsilon": (None if eps is None
                                    else ("inf" if math.isinf(eps) else eps)),
            "feasible": eps is not None,
        }
        _write_json(out / "stability.json", verdict)
        _write_table(out / "stability.txt", verdict)
        if eps is None:
            bad = min(zip(margins, datasets), key=lambda t: t[0])[1]
            print(f"infeasible at zero slack; offending dataset: {bad.label}",
                  file=sys.stderr)
            return EXIT_PRECONDITION
        return EXIT_OK
    if "theta_hat" in cfg:
        theta_hat = float(cfg["theta_hat"])
        epsilon = float(cfg.get("epsilon", 0.0))
        result = dhym_hypothesis_check(
            datasets, theta_hat, epsilon,
            t_max=float(cfg.get("t_max", 1e4)),
            samples=int(cfg.get("samples", 512)))
        result["warnings"] = warnings
        _write_json(out / "stability.json", result)
        _write_table(out / "stability.txt", result)
        if not result["overall"]:
            bad = next(r["label"] for r in result["datasets"] if not r["ok"])
            print(f"hypothesis fails; offending dataset: {bad}", file=sys.stderr)
            return EXIT_PRECONDITION
        return EXIT_OK
    raise ConfigError("c", "missing (provide c for slope mode or theta_hat for angle mode)")


def _write_table(path: Path, verdict: dict) -> None:
    lines = []
    if verdict.get("mode") == "slope":
        lines.append(f"{'label':<16}{'p':>3}  {'margin@eps=0':>18}")
        for row in verdict["margins_at_zero_slack"]:
            lines.append(f"{row['label']:<16}{row['p']:>3}  {row['margin']:>18.10e}")
        lines.append(f"max uniform epsilon: {verdict['max_uniform_epsilon']}")
    else:
        lines.append(f"{'label':<16}{'p':>3}  {'ok':<6}{'reason'}")
        for row in verdict["datasets"]:
            lines.append(f"{row['label']:<16}{row['p']:>3}  "
                         f"{str(row['ok']):<6}{row['reason'] or ''}")
        lines.append(f"overall ({verdict['kind']}): {verdict['overall']}")
    path.write_text("\n".join(lines) + "\n")


def _cmd_functionals(cfg: dict, out: Path, args) -> int:
    geom = _parse_geometry(cfg)
    chi = _parse_form(_need(cfg, "", "chi", dict), "chi", geom)
    omega0 = _parse_form(_need(cfg, "", "omega0", dict), "omega0", geom)
    phi = _constant_or_modes(cfg, "phi", "phi", geom)
    t_steps = int(cfg.get("t_steps", 32))
    c0 = compute_c0(chi, omega0)
    samples = [phi]
    for i, entry in enumerate(cfg.get("phi_samples", [])):
        samples.append(_parse_potential(entry, f"phi_samples[{i}]", geom))
    scatter = coercivity_probe(chi, omega0, samples, c0=c0, t_steps=t_steps)
    report = FunctionalReport(
        c0=c0,
        j_chi=j_chi_functional(chi, omega0, phi, c0),
        aubin_i=aubin_i(omega0, phi),
        j_omega0=j_omega0_functional(omega0, phi, t_steps=t_steps),
        coercivity_points=[[r["j_omega0"], r["j_chi"]] for r in scatter
                           if r["error"] is None],
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "functionals.json").write_text(report.to_json() + "\n")
    with (out / "coercivity.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "j_omega0", "j_chi", "sup_shift", "energy_shift", "error"])
        for r in scatter:
            w.writerow([r["sample"],
                        "" if r["j_omega0"] is None else f"{r['j_omega0']:.17g}",
                        "" if r["j_chi"] is None else f"{r['j_chi']:.17g}",
                        "" if r["sup_shift"] is None else f"{r['sup_shift']:.17g}",
                        "" if r["energy_shift"] is None else f"{r['energy_shift']:.17g}",
                        r["error"] or ""])
    return EXIT_OK


def _cmd_verify_lemmas(cfg: dict, out: Path, args) -> int:
    trials = int(args.trials)
    seed = int(args.seed)
    results = properties.run_property_suites(trials=trials, seed=seed)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "lemma_slacks.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["property", "trials", "worst_slack", "threshold", "holds"])
        for r in results:
            w.writerow([r["property"], r["trials"], f"{r['worst_slack']:.17g}",
                        f"{r['threshold']:.17g}", r["holds"]])
    _write_json(out / "lemmas.json", {"seed": seed, "trials": trials,
                                      "all_hold": all(r["holds"] for r in results),
                                      "results": results})
    if not all(r["holds"] for r in results):
        return EXIT_PRECONDITION
    return EXIT_OK


_COMMANDS = {
    "solve-j": _cmd_solve_j,
    "solve-dhym": _cmd_solve_dhym,
    "check-stability": _cmd_check_stability,
    "functionals": _cmd_functionals,
    "verify-lemmas": _cmd_verify_lemmas,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jdhym",
        description="J-equation / dHYM laboratory on flat complex tori")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "verify-lemmas"),
                       help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
        p.add_argument("--jobs", type=int, default=1, help="worker bound for batch checks")
        p.add_argument("--trials", type=int, default=1000,
                       help="trial count for verify-lemmas")
    args = parser.parse_args(argv)
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except json.JSONDecodeError as exc:
            print(f"error: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                  f"{exc.msg}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(cfg, dict):
            print("error: config root must be an object", file=sys.stderr)
            return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(cfg.get("output_dir", "out"))
    try:
        declared = cfg.get("problem")
        if declared is not None and declared != args.command:
            raise ConfigError("problem",
                              f"declares {declared!r} but command is {args.command!r}")
        return _COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, BranchUndefinedError) as exc:
        print(f"precondition failure: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ConeBreachError as exc:
        print(f"cone breach: {exc}", file=sys.stderr)
        return EXIT_CONE_BREACH
    except ContinuationError as exc:
        print(f"continuation failure: {exc}", file=sys.stderr)
        return EXIT_CONE_BREACH if exc.cause == "cone-breach" else EXIT_NO_CONVERGENCE
    except (DomainError, UsageError, DataError) as exc:
        print(f"precondition failure: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
