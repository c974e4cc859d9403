"""Command-line front end: ``price``, ``greek``, ``simulate``, ``gw`` and ``verify``.

Values come from three layers, later ones winning: built-in defaults, a JSON
config file (``--config``) and explicit flags. Every report starts with the
fully resolved configuration. Exit codes: 0 ok, 1 failed checks, 2 domain
errors, 3 numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import verify
from .core import AffineParams, MultiParams
from .density import expectation_via_density, transition_rep
from .errors import AffineError, DomainError, NumericalError, ResourceError, UnsupportedError
from .greeks import (
    Density,
    Inversion,
    MonteCarlo,
    TensorFunction,
    dbeta_shift,
    delta_combined,
    delta_shift,
    ibp_shift,
    multi_combined,
    multi_delta,
    multi_ibp,
)
from .models import OffspringDist, PopulationParams, galton_watson_ensemble
from .simulate import MCConfig, child_rng, sample_exact, sample_path_euler
from .transforms import QuadratureConfig, parse_test_function

EXIT_OK, EXIT_FAILED_CHECKS, EXIT_DOMAIN, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULTS = {
    "price": {"fn": "gaussian:1,1", "method": "inversion", "n": 1_000_000, "seed": 0},
    "greek": {"fn": "gaussian:1,1", "method": "inversion", "n": 1_000_000, "seed": 0, "which": "delta",
              "coordinate": None},
    "simulate": {"method": "exact", "n": 100_000, "seed": 0, "steps": 16, "bins": 50},
    "gw": {"fn": "gaussian:1,1", "beta": 0.5, "x": 1.0, "t": 1.0, "k": 2000, "n": 10_000, "seed": 0,
           "offspring": "geom"},
    "verify": {"suite": "all"},
}
COMMON = {"output": "json", "workers": 1, "abs_tol": 1e-10, "rel_tol": 1e-9}
GREEKS_1D = {"delta": delta_shift, "ibp": ibp_shift, "combined": delta_combined, "dbeta": dbeta_shift}
GREEKS_MULTI = {"delta": multi_delta, "ibp": multi_ibp, "combined": multi_combined}


# --- argument handling ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affine-shift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", default=S, help="JSON file with default values for any flag")
        p.add_argument("--output", choices=("json", "csv"), default=S)
        p.add_argument("--workers", type=int, default=S, help="threads for Monte Carlo (results do not depend on it)")

    def model(p):
        for name in ("alpha", "beta", "b", "x"):
            p.add_argument(f"--{name}", default=S, help="number, or comma list for a product-form model")
        p.add_argument("--t", type=float, default=S)
        p.add_argument("--fn", default=S, help="test function, e.g. gaussian:0,1; ';' separates product factors")
        p.add_argument("--n", type=int, default=S, help="Monte Carlo sample count")
        p.add_argument("--seed", type=int, default=S)

    p = sub.add_parser("price", help="E[f(X_t)]")
    common(p), model(p)
    p.add_argument("--method", choices=("inversion", "density", "mc"), default=S)

    p = sub.add_parser("greek", help="shift-representation sensitivities")
    common(p), model(p)
    p.add_argument("--method", choices=("inversion", "density", "mc"), default=S)
    p.add_argument("--which", choices=tuple(GREEKS_1D), default=S)
    p.add_argument("--coordinate", type=int, default=S, help="0-based coordinate for product-form models")

    p = sub.add_parser("simulate", help="exact-law histogram or Euler paths as CSV/JSON rows")
    common(p), model(p)
    p.add_argument("--method", choices=("exact", "euler"), default=S)
    p.add_argument("--steps", type=int, default=S)
    p.add_argument("--bins", type=int, default=S)

    p = sub.add_parser("gw", help="Galton-Watson ensemble against its diffusion limit")
    common(p)
    p.add_argument("--beta", type=float, default=S, help="target growth rate gamma")
    p.add_argument("--x", type=float, default=S, help="initial mass x0")
    p.add_argument("--t", type=float, default=S)
    p.add_argument("--k", type=int, default=S, help="population scale N")
    p.add_argument("--n", type=int, default=S, help="number of replicas")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--fn", default=S)
    p.add_argument("--offspring", default=S, help="geom|poisson|binary (calibrated) or kind:param")

    p = sub.add_parser("verify", help="run the acceptance checks")
    common(p)
    p.add_argument("--suite", choices=tuple(verify.SUITES), default=S)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    flags = vars(args).copy()
    command = flags.pop("command")
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    path = flags.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainError(f"cannot read config {path!r}: {exc}") from None
        if not isinstance(loaded, dict):
            raise DomainError("config file must hold a JSON object")
        cfg.update(loaded)
    cfg.update(flags)
    cfg["command"] = command
    return cfg


def _numbers(cfg: dict, key: str) -> list[float]:
    if cfg.get(key) is None:
        raise DomainError(f"--{key} is required")
    raw = cfg[key]
    items = raw if isinstance(raw, list) else str(raw).split(",")
    try:
        vals = [float(v) for v in items]
    except ValueError:
        raise DomainError(f"--{key} must be a number or comma list, got {raw!r}") from None
    cfg[key] = vals[0] if len(vals) == 1 else vals  # echo numbers, not strings
    return vals


def _model(cfg: dict):
    cols = {k: _numbers(cfg, k) for k in ("alpha", "beta", "b", "x")}
    if cfg.get("t") is None:
        raise DomainError("--t is required")
    t = float(cfg["t"])
    sizes = {len(v) for v in cols.values()}
    if sizes == {1}:
        return AffineParams(cols["alpha"][0], cols["beta"][0], cols["b"][0]), cols["x"][0], t
    if len(sizes) != 1:
        raise DomainError("comma lists for alpha, beta, b and x must have equal length")
    return MultiParams.from_arrays(cols["alpha"], cols["beta"], cols["b"]), tuple(cols["x"]), t


def _function(cfg: dict, d: int | None):
    parts = str(cfg["fn"]).split(";")
    if d is None:
        if len(parts) != 1:
            raise DomainError("';'-separated factors need a product-form model")
        return parse_test_function(parts[0])
    if len(parts) == 1:
        parts = parts * d
    if len(parts) != d:
        raise DomainError(f"need 1 or {d} test-function factors, got {len(parts)}")
    return TensorFunction(tuple(parse_test_function(s) for s in parts))


def _backend(cfg: dict):
    quad = QuadratureConfig(abs_tol=float(cfg["abs_tol"]), rel_tol=float(cfg["rel_tol"]))
    method = cfg["method"]
    if method == "inversion":
        return Inversion(quad)
    if method == "density":
        return Density(quad)
    if method == "mc":
        return MonteCarlo(MCConfig(n_samples=int(cfg["n"]), master_seed=int(cfg["seed"]), workers=int(cfg["workers"])))
    raise DomainError(f"unknown method {method!r}")


# --- commands ---------------------------------------------------------------------

def cmd_price(cfg: dict) -> tuple[list, list]:
    p, x, t = _model(cfg)
    be = _backend(cfg)
    if isinstance(p, MultiParams):
        value, se = be.multi_combination(_function(cfg, p.d), t, x, p, 0, (0,), (1.0,))
    else:
        value, se = be.combination(_function(cfg, None), t, x, p, (0,), (1.0,))
    return [{"quantity": "expectation", "value": value, "std_error": se}], []


def cmd_greek(cfg: dict) -> tuple[list, list]:
    p, x, t = _model(cfg)
    be = _backend(cfg)
    which = cfg["which"]
    if which not in GREEKS_1D:
        raise DomainError(f"unknown greek {which!r}")
    if isinstance(p, MultiParams):
        if which not in GREEKS_MULTI:
            raise UnsupportedError(f"{which} is only available for one-dimensional models")
        if cfg.get("coordinate") is None:
            raise DomainError("--coordinate is required for product-form models")
        res = GREEKS_MULTI[which](int(cfg["coordinate"]), _function(cfg, p.d), t, x, p, be)
    else:
        res = GREEKS_1D[which](_function(cfg, None), t, x, p, be)
    row = res.as_dict()
    checks = []
    if which == "dbeta":
        s = math.fsum(res.weights)
        checks.append({"name": "weights_sum_zero", "target": "<= 1e-12", "achieved": abs(s), "passed": abs(s) <= 1e-12})
    return [row], checks


def cmd_simulate(cfg: dict) -> tuple[list, list]:
    p, x, t = _model(cfg)
    if isinstance(p, MultiParams):
        raise UnsupportedError("simulate handles one-dimensional models only")
    n = int(cfg["n"])
    rng = child_rng(int(cfg["seed"]), 0)
    if cfg["method"] == "exact":
        xs = sample_exact(t, x, p, rng, n)
        zeros = int(np.count_nonzero(xs == 0.0))
        rows = [{"bin_lo": 0.0, "bin_hi": 0.0, "count": zeros}]
        pos = xs[xs > 0]
        if pos.size:
            counts, edges = np.histogram(pos, bins=int(cfg["bins"]), range=(0.0, float(pos.max())))
            rows += [{"bin_lo": float(lo), "bin_hi": float(hi), "count": int(c)}
                     for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
        return rows, []
    if cfg["method"] == "euler":
        steps = int(cfg["steps"])
        if steps < 1:
            raise DomainError("--steps must be >= 1")
        grid = sample_path_euler(np.linspace(0.0, t, steps + 1), x, p, rng, n_paths=n)
        return [{"path": i, "time": float(s), "value": float(v)}
                for i in range(n) for s, v in zip(grid.times, grid.values[i])], []
    raise DomainError(f"simulate --method must be exact or euler, got {cfg['method']!r}")


def cmd_gw(cfg: dict) -> tuple[list, list]:
    N, gamma, x0, t = int(cfg["k"]), float(cfg["beta"]), float(cfg["x"]), float(cfg["t"])
    if N < 1:
        raise DomainError("--k (population scale N) must be >= 1")
    spec = str(cfg["offspring"])
    od = OffspringDist.parse(spec) if ":" in spec else OffspringDist.calibrated(spec, gamma, N)
    gamma_n, sigma2_n = od.implied_limit(N)
    ens = galton_watson_ensemble(N, x0, od, t, int(cfg["n"]), int(cfg["seed"]), workers=int(cfg["workers"]))
    f = _function(cfg, None)
    vals = np.asarray(f(ens.terminal), dtype=float)
    limit = expectation_via_density(f, transition_rep(t, x0, PopulationParams(gamma_n, sigma2_n, x0).affine()))
    row = {
        "offspring": od.spec(),
        "gamma_N": gamma_n,
        "sigma2_N": sigma2_n,
        "replicas": int(ens.terminal.size),
        "mean_f": float(vals.mean()),
        "mean_f_stderr": float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else None,
        "limit_f": limit,
        "extinct_fraction": float(np.mean(ens.terminal == 0.0)),
        "slope": ens.slope,
        "slope_stderr": ens.slope_stderr,
        "slope_target": 1.0 + gamma_n / N,
    }
    return [row], []


def cmd_verify(cfg: dict) -> tuple[list, list]:
    suite = cfg["suite"]
    if suite not in verify.SUITES:
        raise DomainError(f"unknown suite {suite!r}")
    rows = verify.run_suite(suite, echo=lambda s: print(s, file=sys.stderr))
    checks = [r.as_dict() for r in rows]
    return checks, checks


COMMANDS = {"price": cmd_price, "greek": cmd_greek, "simulate": cmd_simulate, "gw": cmd_gw, "verify": cmd_verify}


# --- output -------------------------------------------------------------------------

def _flatten(row: dict, prefix: str = "") -> dict:
    out = {}
    for key, val in row.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        elif isinstance(val, (list, tuple)):
            out.update(_flatten({str(i): v for i, v in enumerate(val)}, name + "."))
        else:
            out[name] = val
    return out


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        # repr-based float output is the shortest string that parses back bit-exactly
        return json.dumps(report, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# command: {report['command']}\n")
    buf.write(f"# resolved_config: {json.dumps(report['resolved_config'], sort_keys=True)}\n")
    rows = [_flatten(r) for r in report["results"]]
    header = []
    for r in rows:
        header += [k for k in r if k not in header]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_cell(r.get(k)) for k in header])
    return buf.getvalue()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg["output"] not in ("json", "csv"):
            raise DomainError(f"--output must be json or csv, got {cfg['output']!r}")
        results, checks = COMMANDS[cfg["command"]](cfg)
    except (DomainError, UnsupportedError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (NumericalError, ResourceError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except AffineError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    report = {"command": cfg.pop("command"), "resolved_config": cfg, "results": results, "checks": checks}
    sys.stdout.write(render(report, cfg["output"]))
    if checks and not all(c["passed"] for c in checks):
        return EXIT_FAILED_CHECKS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
