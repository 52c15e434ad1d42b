"""Command-line front end.

Every run writes ``data.csv``, ``report.json`` and ``manifest.json`` into
the output directory. Exit codes: 0 success, 1 usage or configuration
error, 2 a mathematical verdict of divergence or refusal.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels

EXIT_OK, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2
COMMANDS = ("hs", "carleson", "decompactify", "compactify", "singvals", "szego", "counterexample", "an-bound")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Resolved settings of one run; round-trips through JSON."""

    command: str = "hs"
    symbol: str = "lens"
    weight: str = "one"
    alpha: float = 0.0
    gamma: float | None = None
    n_radial: int = 16
    n_angular: int = 2048
    depth: int = 64
    grid_m: int = 512
    scales_k: int = 14
    trunc_n: int = 256
    stages: int = 4
    points: int = 1
    n: int = 10
    h_min: float = 1e-20
    out: str = "out"
    seed: int = 0
    threads: int | None = None
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.alpha > -1:
            raise ConfigError("alpha must exceed -1")
        for name in ("n_radial", "n_angular", "depth", "grid_m", "scales_k", "trunc_n", "stages", "points", "n"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.h_min < 1:
            raise ConfigError("h_min must lie in (0, 1)")
        if self.gamma is not None and self.gamma <= 1:
            raise ConfigError("gamma must exceed 1")
        return self

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# --- output helpers -----------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(float(obj.real)), _clean(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def write_outputs(cfg, header, rows, report):
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "data.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    with open(os.path.join(cfg.out, "report.json"), "w") as fh:
        json.dump(_clean(report), fh, sort_keys=True, indent=2)
        fh.write("\n")
    import scipy
    manifest = {"config": dataclasses.asdict(cfg), "command": cfg.command,
                "versions": {"bergman_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
                "backend": kernels.BACKEND, "files": ["data.csv", "report.json", "manifest.json"]}
    with open(os.path.join(cfg.out, "manifest.json"), "w") as fh:
        json.dump(_clean(manifest), fh, sort_keys=True, indent=2)
        fh.write("\n")


# --- commands -----------------------------------------------------------------------

def _maps(cfg):
    from .analytic import from_spec
    phi = from_spec(cfg.symbol)
    w = None if cfg.weight in ("", "one", "1") else from_spec(cfg.weight)
    return phi, w


def cmd_hs(cfg):
    from .operators import hs_norm_basis, hs_norm_integral
    phi, w = _maps(cfg)
    integ = hs_norm_integral(phi, w, cfg.alpha)
    basis = hs_norm_basis(phi, w, cfg.alpha, n_terms=max(cfg.trunc_n, 16))
    rows = [("integral", d, v) for d, v in zip(integ.depths, integ.values)]
    rows += [("basis", k, float(basis.partial_sums[k - 1]))
             for k in [2 ** j for j in range(int(math.log2(basis.partial_sums.size)) + 1)]]
    diverging = integ.verdict == "diverging" or basis.verdict == "infinite"
    verdict = "diverging" if diverging else "finite"
    report = {"verdict": verdict, "integral": integ.to_dict(), "basis": basis.to_dict()}
    return ["route", "depth_or_N", "value"], rows, report, EXIT_VERDICT if diverging else EXIT_OK


def cmd_carleson(cfg):
    from .measures import BoxGrid, Resolution, carleson_profile, classify, dyadic_scales, pullback
    phi, w = _maps(cfg)
    res = Resolution(n_theta=cfg.n_angular, n_radial=cfg.n_radial, h_min=2.0 ** -(cfg.scales_k + 2))
    sample = pullback(phi, w, cfg.alpha, res, cfg.gamma)
    grid = BoxGrid.standard(dyadic_scales(cfg.scales_k, 0), cfg.grid_m, sample.anchor, sample.h_glob)
    prof = carleson_profile(sample, cfg.gamma, grid, threads=cfg.threads)
    cls = classify(prof)
    rows = list(zip(prof.scales, prof.ratios, prof.argmax_angles))
    report = {"classification": cls.to_dict(), "profile": prof.to_dict(), "total_mass": sample.total_mass,
              "rejected_nodes": sample.rejected}
    return ["h", "ratio", "argmax_angle"], rows, report, EXIT_OK


def cmd_decompactify(cfg):
    from .constructions import Refusal, decompactify
    from .measures import Resolution
    phi, _ = _maps(cfg)
    res = Resolution(n_theta=cfg.n_angular, n_radial=cfg.n_radial, h_min=cfg.h_min)
    try:
        dw = decompactify(phi, cfg.alpha, cfg.stages, cfg.gamma, res, cfg.grid_m, cfg.threads)
    except Refusal as exc:
        return ["h", "mu_ratio", "nu_ratio"], [], {"verdict": "refused", "reason": str(exc)}, EXIT_VERDICT
    report = dw.to_dict()
    if not dw.stages:
        report["verdict"] = "not-compact"
        return ["h", "mu_ratio", "nu_ratio"], [], report, EXIT_OK
    mu, nu = report["report"]["mu_profile"], report["report"]["nu_profile"]
    rows = list(zip(mu["scales"], mu["ratios"], nu["ratios"]))
    wit = report["report"]["witnesses"]
    report["verdict"] = "bounded-not-compact" if len(wit) == cfg.stages else "partial"
    return ["h", "mu_ratio", "nu_ratio"], rows, report, EXIT_OK


def _privalov_points(phi, k):
    from .analytic import contact_point
    cp = contact_point(phi)
    start = 0.0 if cp is None else float(np.angle(cp[0]))
    return [complex(np.exp(1j * (start + 2 * np.pi * j / k))) for j in range(k)]


def cmd_compactify(cfg):
    from .analytic import finite_privalov_weight
    from .operators import moorhouse_probe
    phi, _ = _maps(cfg)
    w = finite_privalov_weight(_privalov_points(phi, cfg.points), cfg.extra.get("s", 1.0))
    probe = moorhouse_probe(phi, w, cfg.alpha)
    rows = list(zip(probe.radii, probe.sup_linear, probe.sup_power))
    report = {"points": _privalov_points(phi, cfg.points), "probe": probe.to_dict(),
              "decreasing": probe.decreasing(), "final": float(probe.sup_linear[-1])}
    return ["r", "linear", "power"], rows, report, EXIT_OK


def cmd_singvals(cfg):
    from .operators import build_matrix, singular_values
    phi, w = _maps(cfg)
    op = build_matrix(phi, w, cfg.alpha, cfg.trunc_n)
    spec = singular_values(op)
    k = spec.values.size
    rows = [(i + 1, spec.values[i], spec.values_double[i] if spec.values_double is not None else float("nan"))
            for i in range(k)]
    report = {"spectrum": spec.to_dict(), "frobenius_sq": op.frobenius_sq(), "truncated": op.truncated}
    return ["k", "s_N", "s_2N"], rows, report, EXIT_OK


def cmd_szego(cfg):
    from .regularization import RegularizationError, compute_G, szego_minimizer
    phi, _ = _maps(cfg)
    try:
        G = compute_G(phi, cfg.alpha, cfg.grid_m)
        sz = szego_minimizer(G)
    except RegularizationError as exc:
        return ["theta", "G"], [], {"verdict": "refused", "reason": str(exc)}, EXIT_VERDICT
    mod = np.abs(sz.outer.boundary())
    rows = list(zip(G.theta, G.values, mod))
    return ["theta", "G", "abs_w0"], rows, {"verdict": "finite", "szego": sz.to_dict()}, EXIT_OK


def cmd_counterexample(cfg):
    from .regularization import counterexample_certificate
    cert = counterexample_certificate()
    rows = list(zip(cert.ks, cert.truncated, cert.predicted_growth, cert.weak_sups))
    return ["k", "truncated_integral", "predicted_growth", "weak_sup"], rows, cert.to_dict(), EXIT_OK


def cmd_an_bound(cfg):
    from .operators import an_bound, an_bound_argmin, chi
    phi, _ = _maps(cfg)
    hs = 2.0 ** (-np.arange(4, 4 * cfg.scales_k + 1) / 4.0)
    chis = chi(phi, hs)
    bound = an_bound(hs, chis, cfg.n)
    h0, _ = an_bound_argmin(hs, chis, cfg.n)
    rows = list(zip(hs, chis, np.sqrt(cfg.n) * np.exp(-cfg.n * hs) + np.sqrt(chis / hs ** 2)))
    return ["h", "chi", "bound_at_h"], rows, {"n": cfg.n, "bound": bound, "h0": h0}, EXIT_OK


HANDLERS = {"hs": cmd_hs, "carleson": cmd_carleson, "decompactify": cmd_decompactify,
            "compactify": cmd_compactify, "singvals": cmd_singvals, "szego": cmd_szego,
            "counterexample": cmd_counterexample, "an-bound": cmd_an_bound}


# --- argument handling --------------------------------------------------------------

FLAG_FIELDS = {"symbol": str, "weight": str, "alpha": float, "gamma": float, "grid_m": int,
               "scales_k": int, "trunc_n": int, "stages": int, "out": str, "seed": int,
               "threads": int, "points": int, "n": int}


def build_parser():
    p = argparse.ArgumentParser(prog="bergman-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        for fld, typ in FLAG_FIELDS.items():
            sp.add_argument("--" + fld.replace("_", "-"), dest=fld, type=typ, default=None)
        sp.add_argument("--config", default=None, help="JSON config file; its values override flags")
    return p


def resolve_config(args):
    cfg = ExperimentConfig(command=args.command)
    for fld in FLAG_FIELDS:
        val = getattr(args, fld)
        if val is not None:
            setattr(cfg, fld, val)
    if cfg.threads is None:
        cfg.threads = kernels.default_threads()
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        for k, v in data.items():
            if k not in {f.name for f in dataclasses.fields(ExperimentConfig)}:
                raise ConfigError(f"unknown config key {k!r}")
            setattr(cfg, k, v)
        cfg.command = args.command
    return cfg.validate()


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = resolve_config(args)
        np.random.seed(cfg.seed)
        header, rows, report, code = HANDLERS[cfg.command](cfg)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_outputs(cfg, header, rows, report)
    summary = report.get("verdict") or report.get("classification", {}).get("verdict", "done")
    print(f"{cfg.command}: {summary} -> {cfg.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
