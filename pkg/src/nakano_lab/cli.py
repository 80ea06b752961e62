"""Batch experiment driver.

Every measured number is produced at two resolutions: the configured one
and a refined one (half the stencil step, twice the quadrature orders).
The refined value is reported and the absolute difference is shipped as its
uncertainty; assertions are evaluated on the refined value and refuse to
decide (exit 4) when the margin is inside the uncertainty.

Exit codes: 0 pass, 2 config error, 3 numerical failure,
4 insufficient resolution, 5 assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, bundles, direct_image, linalg, oracles
from .bundles import BundleSpec, SplitClass
from .config import COMMANDS, ConfigError, ExperimentConfig, from_dict, load
from .direct_image import Resolution
from .geometry import IntegrationError

log = logging.getLogger("nakano_lab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOLUTION, EXIT_ASSERT = 0, 2, 3, 4, 5


@dataclass
class Assertion:
    name: str
    status: str  # pass | fail | insufficient-resolution
    value: Any
    threshold: Any
    uncertainty: float
    detail: str = ""

    def as_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "value": self.value,
            "threshold": self.threshold,
            "uncertainty": self.uncertainty,
            "detail": self.detail,
        }


def _decide(ok: bool, margin: float, uncertainty: float) -> str:
    if abs(margin) <= uncertainty and uncertainty > 0:
        return "insufficient-resolution"
    return "pass" if ok else "fail"


def assert_greater(name, value, threshold, uncertainty=0.0, strict=True) -> Assertion:
    ok = value > threshold if strict else value >= threshold
    return Assertion(name, _decide(ok, value - threshold, uncertainty), value, threshold, uncertainty,
                     ">" if strict else ">=")


def assert_less(name, value, threshold, uncertainty=0.0, strict=False) -> Assertion:
    ok = value < threshold if strict else value <= threshold
    return Assertion(name, _decide(ok, threshold - value, uncertainty), value, threshold, uncertainty,
                     "<" if strict else "<=")


def assert_exact(name, value, expected) -> Assertion:
    return Assertion(name, "pass" if value == expected else "fail", value, expected, 0.0, "==")


@dataclass
class Report:
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    timings: dict | None = None
    exit_code: int = EXIT_OK

    @property
    def status(self) -> str:
        return {0: "pass", 2: "config-error", 3: "numerical-failure",
                4: "insufficient-resolution", 5: "assertion-failure"}[self.exit_code]

    def finalize(self) -> "Report":
        if self.exit_code == EXIT_OK:
            states = {a.status for a in self.assertions}
            if "fail" in states:
                self.exit_code = EXIT_ASSERT
            elif "insufficient-resolution" in states:
                self.exit_code = EXIT_RESOLUTION
        return self

    def as_dict(self) -> dict:
        d = {
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "assertions": [a.as_dict() for a in self.assertions],
            "notes": self.notes,
            "status": self.status,
            "exit_code": self.exit_code,
        }
        if self.timings is not None:
            d["timings"] = self.timings
        return d

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.as_dict()), sort_keys=True, indent=2)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def _matrix(a: np.ndarray):
    a = np.asarray(a)
    if np.all(np.abs(a.imag) == 0):
        return a.real.tolist()
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


# --------------------------------------------------------------------------
# measurement at two resolutions


@dataclass(frozen=True)
class Measured:
    value: Any
    coarse: Any
    uncertainty: Any


def two_resolutions(fn: Callable[[Resolution], Any], res: Resolution) -> Measured:
    coarse = fn(res)
    fine = fn(res.refined())
    unc = np.abs(np.asarray(fine, dtype=float) - np.asarray(coarse, dtype=float))
    return Measured(fine, coarse, unc if unc.ndim else float(unc))


def _spectrum(E: BundleSpec, k: int, xi, res: Resolution) -> np.ndarray:
    return direct_image.l2_curvature(E, k, xi, res).eigen.eigenvalues


def _describe(E: BundleSpec) -> dict:
    return {
        "base": E.base,
        "degrees": [list(d) for d in E.degrees],
        "class": oracles.classify_split(E.degrees).value,
        "perturbed": E.perturbed,
    }


def _total_positivity(cfg: ExperimentConfig, E: BundleSpec, k: int, report: Report) -> None:
    pw = bundles.proj_weight(E, k)
    cls = oracles.classify_split(E.degrees)
    try:
        tp = bundles.verify_total_positivity(pw, bundles.default_samples(E), cfg.resolution.stencil)
        report.results["total_positivity"] = {
            "verdict": tp.verdict.value,
            "min_eigenvalue": tp.min_eigenvalue,
        }
        if cls is SplitClass.AMPLE and tp.verdict is not linalg.Verdict.POSITIVE_DEFINITE:
            raise bundles.PreconditionViolation(
                f"ample bundle but weight Hessian only {tp.verdict.value} "
                f"(min eigenvalue {tp.min_eigenvalue:.3e})"
            )
    except bundles.PreconditionViolation as exc:
        report.results["total_positivity"] = {
            "verdict": linalg.Verdict.INDEFINITE.value
            if exc.min_eigenvalue is not None and exc.min_eigenvalue < 0
            else "SEMIDEFINITE_WITHIN_MARGIN",
            "min_eigenvalue": exc.min_eigenvalue,
            "message": str(exc),
        }
        if cls is SplitClass.AMPLE:
            raise
        report.notes.append(f"line-bundle metric not positive ({cls.value}): {exc}")


# --------------------------------------------------------------------------
# commands


def run_check(cfg: ExperimentConfig) -> Report:
    report = Report("check", cfg.echo())
    E = cfg.bundle()
    cls = oracles.classify_split(E.degrees)
    xi = cfg.base_point
    report.results["bundle"] = _describe(E)
    tol = cfg.tolerances
    rows = []
    for k in cfg.ks:
        _total_positivity(cfg, E, k, report)

        def measure(res, k=k):
            curv = direct_image.l2_curvature(E, k, xi, res)
            return {
                "eig": curv.eigen.eigenvalues,
                "griffiths": bundles.griffiths_min(curv.tensor),
                "trace": float(np.trace(curv.form.matrix).real),
                "matrix": curv.form.matrix,
                "asym": curv.tensor.asymmetry,
            }

        coarse = measure(cfg.resolution)
        fine = measure(cfg.resolution.refined())
        eig_unc = np.abs(fine["eig"] - coarse["eig"])
        lam = float(fine["eig"][0])
        lam_unc = float(eig_unc[0])
        verdict = linalg.pd_verdict(fine["matrix"], tol["margin"])
        row = {
            "k": k,
            "eigenvalues": fine["eig"],
            "eigenvalue_uncertainty": eig_unc,
            "lambda_min": lam,
            "lambda_min_uncertainty": lam_unc,
            "griffiths_min": fine["griffiths"],
            "griffiths_min_uncertainty": abs(fine["griffiths"] - coarse["griffiths"]),
            "verdict": verdict.value,
            "hermitian_asymmetry": fine["asym"],
        }
        rows.append(row)
        band = tol["margin"] * abs(fine["trace"]) / len(fine["eig"])
        if cls is SplitClass.AMPLE:
            report.assertions.append(
                assert_greater(f"k={k}: lambda_min > margin*trace/dim", lam, band, lam_unc)
            )
            if tol["min_lambda"] > 0:
                report.assertions.append(
                    assert_greater(f"k={k}: lambda_min > min_lambda", lam, tol["min_lambda"], lam_unc)
                )
        elif cls is SplitClass.NEF_NOT_AMPLE:
            report.assertions.append(
                assert_greater(f"k={k}: lambda_min >= -nef", lam, -tol["nef"], lam_unc, strict=False)
            )
        else:
            report.notes.append(f"k={k}: bundle is not nef; verdict {verdict.value} reported only")
        report.assertions.append(
            assert_greater(
                f"k={k}: griffiths_min >= lambda_min",
                row["griffiths_min"],
                lam - 1e-9,
                0.0,
                strict=False,
            )
        )
    report.results["rows"] = rows
    report.results["expectation"] = {
        SplitClass.AMPLE: "POSITIVE_DEFINITE",
        SplitClass.NEF_NOT_AMPLE: "POSITIVE_DEFINITE or SEMIDEFINITE_WITHIN_MARGIN",
        SplitClass.NOT_NEF: "none (report only)",
    }[cls]
    return report


def _lambda_min(E, k, xi, res) -> Measured:
    return two_resolutions(lambda r: float(_spectrum(E, k, xi, r)[0]), res)


def run_scan_k(cfg: ExperimentConfig) -> Report:
    report = Report("scan-k", cfg.echo())
    E = cfg.bundle()
    cls = oracles.classify_split(E.degrees)
    report.results["bundle"] = _describe(E)
    xi = cfg.base_point
    rows = []
    for k in cfg.ks:
        meas = _lambda_min(E, k, xi, cfg.resolution)
        rows.append({"k": k, "lambda_min": meas.value, "uncertainty": meas.uncertainty})
    report.results["rows"] = rows
    ks = np.array([r["k"] for r in rows], dtype=float)
    lams = np.array([r["lambda_min"] for r in rows])
    slope = float(np.polyfit(ks, lams, 1)[0]) if len(rows) > 1 else 0.0
    report.results["slope"] = slope
    if cls is not SplitClass.AMPLE:
        report.notes.append(f"{cls.value} bundle: growth assertions skipped")
        return report
    if len(rows) < 2:
        report.notes.append("single k: no growth to assess")
        return report
    slope_unc = float(max(r["uncertainty"] for r in rows))
    report.assertions.append(assert_greater("slope > 0", slope, 0.0, slope_unc))
    if cfg.tolerances["min_slope"] > 0:
        report.assertions.append(
            assert_greater("slope >= min_slope", slope, cfg.tolerances["min_slope"], slope_unc, strict=False)
        )
    for a, b in zip(rows, rows[1:]):
        report.assertions.append(
            assert_greater(
                f"lambda_min(k={b['k']}) > lambda_min(k={a['k']})",
                b["lambda_min"] - a["lambda_min"],
                0.0,
                a["uncertainty"] + b["uncertainty"],
            )
        )
    return report


def _comparison_degrees(cfg: ExperimentConfig):
    if cfg.comparison_degrees is not None:
        return cfg.comparison_degrees
    return tuple(tuple(max(d, 1) for d in summand) for summand in cfg.degrees)


def run_nef_limit(cfg: ExperimentConfig) -> Report:
    report = Report("nef-limit", cfg.echo())
    E = cfg.bundle()
    cls = oracles.classify_split(E.degrees)
    report.results["bundle"] = _describe(E)
    comp = cfg.bundle(_comparison_degrees(cfg))
    report.results["comparison_bundle"] = _describe(comp)
    xi = cfg.base_point
    rows = []
    for k in cfg.ks:
        try:
            meas = _lambda_min(E, k, xi, cfg.resolution)
        except (ArithmeticError, linalg.DomainError) as exc:
            if cls is SplitClass.NOT_NEF:
                report.notes.append(f"k={k}: not-nef control failed numerically: {exc}")
                continue
            raise
        ref = _lambda_min(comp, k, xi, cfg.resolution)
        rows.append({
            "k": k,
            "lambda_min": meas.value,
            "uncertainty": meas.uncertainty,
            "comparison_lambda_min": ref.value,
            "comparison_uncertainty": ref.uncertainty,
        })
        if cls is SplitClass.NEF_NOT_AMPLE:
            report.assertions.append(assert_greater(
                f"k={k}: lambda_min >= -nef", meas.value, -cfg.tolerances["nef"], meas.uncertainty, strict=False))
            report.assertions.append(assert_less(
                f"k={k}: lambda_min < comparison", meas.value, ref.value,
                meas.uncertainty + ref.uncertainty, strict=True))
    if cls is not SplitClass.NEF_NOT_AMPLE:
        report.notes.append(f"{cls.value} bundle: reported without assertions")
    report.results["rows"] = rows
    return report


def _is_plain_origin(cfg: ExperimentConfig, E: BundleSpec) -> bool:
    return not E.perturbed and all(z == 0 for z in cfg.base_point)


def run_decompose(cfg: ExperimentConfig) -> Report:
    report = Report("decompose", cfg.echo())
    E = cfg.bundle()
    if E.rank != 2:
        raise ConfigError("decompose needs a rank-2 bundle")
    report.results["bundle"] = _describe(E)
    xi = cfg.base_point
    gated = _is_plain_origin(cfg, E)
    rows = []
    for k in cfg.ks:
        coarse = direct_image.second_term_residual(E, k, xi, cfg.resolution)
        fine = direct_image.second_term_residual(E, k, xi, cfg.resolution.refined())
        ratio_unc = abs(fine.residual_norm_ratio - coarse.residual_norm_ratio)
        harm_unc = abs(fine.harmonicity_sup - coarse.harmonicity_sup)
        rows.append({
            "k": k,
            "theta": _matrix(fine.theta),
            "first_term": _matrix(fine.first_term),
            "residual": _matrix(fine.residual),
            "theta_eigenvalues": linalg.eigvalsh(fine.theta).eigenvalues,
            "first_term_eigenvalues": linalg.eigvalsh(fine.first_term).eigenvalues,
            "residual_norm_ratio": fine.residual_norm_ratio,
            "residual_norm_ratio_uncertainty": ratio_unc,
            "harmonicity_sup": fine.harmonicity_sup,
            "harmonicity_sup_uncertainty": harm_unc,
            "asserted": gated,
        })
        if gated:
            report.assertions.append(assert_less(
                f"k={k}: residual_norm_ratio <= tol", fine.residual_norm_ratio,
                cfg.tolerances["residual"], ratio_unc))
            report.assertions.append(assert_less(
                f"k={k}: harmonicity_sup <= tol", fine.harmonicity_sup,
                cfg.tolerances["harmonicity"], harm_unc))
        else:
            report.notes.append(f"k={k}: perturbed weight or xi != 0; diagnostic only (no-assert)")
    report.results["rows"] = rows
    return report


def run_harmonicity(cfg: ExperimentConfig) -> Report:
    report = Report("harmonicity", cfg.echo())
    E = cfg.bundle()
    if E.rank != 2:
        raise ConfigError("harmonicity needs a rank-2 bundle")
    report.results["bundle"] = _describe(E)
    xi = cfg.base_point
    gated = _is_plain_origin(cfg, E)
    rows = []
    for k in cfg.ks:
        for i in range(E.m):
            meas = two_resolutions(
                lambda r, k=k, i=i: direct_image.harmonicity_residual(E, k, xi, i, stencil=r.stencil),
                cfg.resolution,
            )
            rows.append({"k": k, "direction": i, "harmonicity_sup": meas.value,
                         "uncertainty": meas.uncertainty, "asserted": gated})
            if gated:
                report.assertions.append(assert_less(
                    f"k={k}, i={i}: harmonicity_sup <= tol", meas.value,
                    cfg.tolerances["harmonicity"], meas.uncertainty))
    if not gated:
        report.notes.append("perturbed weight or xi != 0; diagnostic only (no-assert)")
    report.results["rows"] = rows
    return report


def run_cohomology(cfg: ExperimentConfig) -> Report:
    report = Report("cohomology", cfg.echo())
    if cfg.base != "P1":
        raise ConfigError("cohomology is computed on P1 only")
    if len(cfg.degrees) != 2:
        raise ConfigError("cohomology needs a rank-2 bundle")
    a, b = cfg.degrees[0][0], cfg.degrees[1][0]
    cls = oracles.classify_split(cfg.degrees)
    rows = []
    for lam in oracles.decreasing_weights(2, cfg.lambda_bound):
        degs = oracles.gamma_decomposition_r2(lam, (a, b))
        table = oracles.bott_p1(degs)
        cech = sum(oracles.cech_p1(d - 2)[1] for d in degs)
        rows.append({"lambda": list(lam.parts), "height": lam.height, "degrees": degs,
                     "h11": table.h11, "h11_cech": cech})
        report.assertions.append(assert_exact(f"lambda={lam.parts}: bott == cech", table.h11, cech))
        if cls is SplitClass.AMPLE and lam.height >= 1:
            report.assertions.append(assert_exact(f"lambda={lam.parts}: H^(1,1) == 0", table.h11, 0))
    control_degs = oracles.gamma_decomposition_r2((0, 0), (0, 0))
    control = oracles.bott_p1(control_degs).h11
    report.results["control"] = {"degrees": control_degs, "h11": control,
                                 "h11_cech": sum(oracles.cech_p1(d - 2)[1] for d in control_degs)}
    report.assertions.append(assert_exact("control O: H^(1,1) == 1", control, 1))
    report.results["bundle"] = {"degrees": [a, b], "class": cls.value}
    report.results["rows"] = rows
    return report


def run_oracle_compare(cfg: ExperimentConfig) -> Report:
    report = Report("oracle-compare", cfg.echo())
    E = cfg.bundle()
    if E.rank != 2 or E.perturbed:
        raise ConfigError("oracle-compare needs an unperturbed rank-2 bundle")
    report.results["bundle"] = _describe(E)
    tol = cfg.tolerances
    origin = (0j,) * E.m
    calib = []
    for t, summand in enumerate(E.summands):
        for d in sorted(set(summand.degrees)):
            w = bundles.LineWeight((d,) * E.m)
            got = two_resolutions(
                lambda r, w=w: np.diag(bundles.line_curvature(w, origin, r.stencil)).real, cfg.resolution
            )
            want = oracles.fs_oracle(d, E.m)
            err = float(np.max(np.abs(np.asarray(got.value) - want)))
            calib.append({"degree": d, "computed": got.value, "oracle": want, "error": err})
            report.assertions.append(assert_less(f"FS degree {d}: |curvature - d|", err, 1e-6,
                                                 float(np.max(got.uncertainty))))
    report.results["fs_calibration"] = calib
    rows = []
    for k in cfg.ks:
        rule = cfg.resolution.refined().rule(1, k)
        gram = direct_image.gram_matrix(E, k, origin, rule)
        want = np.array([np.pi * float(oracles.beta_gram(al, k)) for al in range(k + 1)])
        gerr = float(np.max(np.abs(gram - np.diag(want))))
        spectrum = two_resolutions(lambda r, k=k: _spectrum(E, k, origin, r), cfg.resolution)
        pred = np.sort(np.array(oracles.split_spectrum_oracle(
            [E.summands[0].degrees, E.summands[1].degrees], k)).ravel())
        rel = np.abs(np.asarray(spectrum.value) - pred) / np.abs(pred).clip(min=1.0)
        rows.append({"k": k, "gram_diagonal": np.diag(gram).real, "gram_oracle": want,
                     "gram_error": gerr, "eigenvalues": spectrum.value, "eigenvalue_uncertainty": spectrum.uncertainty,
                     "oracle_eigenvalues": pred, "relative_error": rel})
        report.assertions.append(assert_less(f"k={k}: Gram vs Beta integrals", gerr, tol["gram"]))
        report.assertions.append(assert_less(
            f"k={k}: eigenvalues vs closed form (relative)", float(np.max(rel)), tol["eigen_rel"],
            float(np.max(spectrum.uncertainty))))
    report.results["rows"] = rows
    return report


RUNNERS = {
    "check": run_check,
    "scan-k": run_scan_k,
    "nef-limit": run_nef_limit,
    "decompose": run_decompose,
    "harmonicity": run_harmonicity,
    "cohomology": run_cohomology,
    "oracle-compare": run_oracle_compare,
}


def run(cfg: ExperimentConfig, timings: bool = False) -> Report:
    t0 = time.perf_counter()
    try:
        report = RUNNERS[cfg.command](cfg)
    except ConfigError:
        raise
    except (ArithmeticError, IntegrationError, linalg.DomainError, linalg.ContractError,
            bundles.PreconditionViolation) as exc:
        report = Report(cfg.command, cfg.echo(), exit_code=EXIT_NUMERIC)
        report.notes.append(f"numerical failure: {type(exc).__name__}: {exc}")
    if timings:
        report.timings = {"wall_seconds": time.perf_counter() - t0}
    return report.finalize()


def write_csv(report: Report, path: str | Path) -> None:
    rows = report.results.get("rows", [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "lambda_min", "uncertainty"])
        for r in rows:
            w.writerow([r["k"], repr(float(r["lambda_min"])),
                        repr(float(r.get("uncertainty", r.get("lambda_min_uncertainty", 0.0))))])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nakano-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment description")
        sp.add_argument("--out", help="report path (default: config 'output' or stdout)")
        sp.add_argument("--csv", help="CSV table path (scan-k / nef-limit / check)")
        sp.add_argument("--quadrature", type=int, help="radial quadrature order")
        sp.add_argument("--angular", type=int, help="angular quadrature order")
        sp.add_argument("--step", type=float, help="finite-difference step")
        sp.add_argument("--tol", type=float, help="primary tolerance of the command")
        sp.add_argument("--timings", action="store_true", help="add wall-clock timings to the report")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


PRIMARY_TOL = {
    "check": "margin",
    "scan-k": "min_slope",
    "nef-limit": "nef",
    "decompose": "residual",
    "harmonicity": "harmonicity",
    "oracle-compare": "eigen_rel",
}


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    res = cfg.resolution
    if args.quadrature is not None:
        res = replace(res, radial_order=args.quadrature)
    if args.angular is not None:
        res = replace(res, angular_order=args.angular)
    if args.step is not None:
        res = replace(res, step=args.step)
    try:
        res.stencil
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tols = dict(cfg.tolerances)
    if args.tol is not None and cfg.command in PRIMARY_TOL:
        tols[PRIMARY_TOL[cfg.command]] = args.tol
    return replace(cfg, resolution=res, tolerances=tols)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load(args.config, args.command), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run(cfg, timings=args.timings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.to_json()
    out = args.out or cfg.output
    if out:
        Path(out).write_text(text + "\n")
        log.info("wrote %s", out)
    else:
        print(text)
    csv_path = args.csv or cfg.csv
    if csv_path and report.results.get("rows") and "lambda_min" in report.results["rows"][0]:
        write_csv(report, csv_path)
    for a in report.assertions:
        if a.status != "pass":
            print(f"{a.status}: {a.name} (value {a.value}, threshold {a.threshold}, "
                  f"uncertainty {a.uncertainty})", file=sys.stderr)
    for note in report.notes:
        log.info(note)
    return report.exit_code


__all__ = ["main", "run", "from_dict"] + [f.__name__ for f in RUNNERS.values()]


if __name__ == "__main__":
    sys.exit(main())
