"""Experiment configuration: JSON in, validated dataclass out."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .bundles import BASES, BundleSpec
from .direct_image import Resolution
from .perturbation import PerturbationSyntaxError, parse_perturbation

COMMANDS = ("check", "scan-k", "nef-limit", "decompose", "harmonicity", "cohomology", "oracle-compare")

DEFAULT_TOLERANCES = {
    "margin": 1e-6,  # pd_verdict margin (relative to trace/dim)
    "min_lambda": 0.0,  # extra floor on lambda_min for ample bundles
    "nef": 1e-4,  # lambda_min >= -nef for nef bundles
    "residual": 1e-6,  # decomposition residual ratio (unperturbed, xi = 0)
    "harmonicity": 1e-8,
    "min_slope": 0.0,  # scan-k least-squares slope floor
    "gram": 1e-8,  # oracle-compare, absolute
    "eigen_rel": 1e-3,  # oracle-compare, relative
}


class ConfigError(ValueError):
    pass


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    base: str = "P1"
    degrees: tuple = ((1,), (1,))
    perturbations: tuple = ()
    k: int = 1
    k_range: tuple[int, int] | None = None
    xi: tuple[complex, ...] = ()
    resolution: Resolution = field(default_factory=Resolution)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    lambda_bound: int = 4
    comparison_degrees: tuple | None = None
    output: str | None = None
    csv: str | None = None

    def bundle(self, degrees=None) -> BundleSpec:
        degs = self.degrees if degrees is None else degrees
        perts = [parse_perturbation(p) for p in self.perturbations] if self.perturbations else None
        if degrees is not None:
            perts = None
        return BundleSpec.split(self.base, degs, perts)

    @property
    def ks(self) -> list[int]:
        if self.k_range is not None:
            lo, hi = self.k_range
            return list(range(lo, hi + 1))
        return [self.k]

    @property
    def base_point(self) -> tuple[complex, ...]:
        return self.xi or (0j,) * BASES[self.base]

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        d["resolution"] = asdict(self.resolution)
        d["xi"] = [[z.real, z.imag] for z in self.base_point]
        d["degrees"] = [list(x) for x in self.degrees]
        d["perturbations"] = list(self.perturbations)
        if self.comparison_degrees is not None:
            d["comparison_degrees"] = [list(x) for x in self.comparison_degrees]
        d.pop("output")
        d.pop("csv")
        return d


def from_dict(raw: dict, command: str | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cmd = raw.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError(f"config command {cmd!r} does not match subcommand {command!r}")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}; expected one of {COMMANDS}")
    base = raw.get("base", "P1")
    if base not in BASES:
        raise ConfigError(f"unknown base {base!r}")
    m = BASES[base]

    def degs(value, name):
        out = []
        for d in value:
            t = tuple(d) if isinstance(d, (list, tuple)) else (d,)
            if len(t) != m or not all(isinstance(x, int) for x in t):
                raise ConfigError(f"{name}: entry {d!r} needs {m} integer degree(s) for base {base}")
            out.append(t)
        if not out:
            raise ConfigError(f"{name}: at least one summand required")
        return tuple(out)

    degrees = degs(raw.get("degrees", [[1] * m, [1] * m]), "degrees")
    perts = tuple(raw.get("perturbations") or ())
    if perts and len(perts) != len(degrees):
        raise ConfigError("perturbations: one entry (or null) per summand")
    try:
        for p in perts:
            pt = parse_perturbation(p)
            if pt is not None and pt.arity > m:
                raise ConfigError(f"perturbation {p!r} uses a coordinate base {base} lacks")
    except PerturbationSyntaxError as exc:
        raise ConfigError(str(exc)) from exc

    k = raw.get("k", 1)
    k_range = raw.get("k_range")
    if k_range is not None:
        if len(k_range) != 2 or k_range[0] > k_range[1]:
            raise ConfigError("k_range must be [lo, hi] with lo <= hi")
        k_range = (int(k_range[0]), int(k_range[1]))
    if not isinstance(k, int) or k < 0 or (k_range and k_range[0] < 0):
        raise ConfigError("k must be a non-negative integer")

    xi = raw.get("xi")
    if xi is None:
        xi = ()
    else:
        if not isinstance(xi, list) or (m == 1 and len(xi) == 2 and all(isinstance(x, (int, float)) for x in xi)):
            xi = [xi]
        xi = tuple(_complex(v) for v in xi)
        if len(xi) != m:
            raise ConfigError(f"xi needs {m} coordinate(s)")

    st = raw.get("stencil", {}) or {}
    qd = raw.get("quadrature", {}) or {}
    try:
        res = Resolution(
            radial_order=int(qd.get("radial", 64)),
            angular_order=qd.get("angular"),
            step=float(st.get("step", 1e-3)),
            levels=int(st.get("levels", 2)),
        )
        res.stencil  # validates the step range
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad stencil/quadrature settings: {exc}") from exc
    if res.radial_order < 4 or (res.angular_order is not None and res.angular_order < 4):
        raise ConfigError("quadrature orders must be >= 4")

    tol = dict(DEFAULT_TOLERANCES)
    extra = raw.get("tolerances", {}) or {}
    unknown = set(extra) - set(tol)
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
    tol.update({key: float(v) for key, v in extra.items()})

    comp = raw.get("comparison_degrees")
    return ExperimentConfig(
        command=cmd,
        base=base,
        degrees=degrees,
        perturbations=perts,
        k=k,
        k_range=k_range,
        xi=xi,
        resolution=res,
        tolerances=tol,
        lambda_bound=int(raw.get("lambda_bound", 4)),
        comparison_degrees=degs(comp, "comparison_degrees") if comp is not None else None,
        output=raw.get("output"),
        csv=raw.get("csv"),
    )


def load(path: str | Path, command: str | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_dict(raw, command)
