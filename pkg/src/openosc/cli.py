"""Command-line interface: ``openosc <command> [options]``.

Every command prints a JSON summary, writes it to ``<out>/<command>.json``
and, where a series is produced, a CSV next to it. The output directory
defaults to the current directory and can be overridden with ``OPENOSC_OUT``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, gauss, grid, ladder
from .moments import derive_moment_system
from .params import (InvalidParameters, ModelParams, derived_scales, load_params,
                     params_from_mapping, validate)
from .verify import verification_sweep

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VERIFY = 3
EXIT_USAGE = 64
EXIT_CONFIG = 65
EXIT_IO = 74
EXIT_NUMERIC = 70


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _cx(c) -> list[float]:
    c = complex(c)
    return [c.real, c.imag]


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


# --- configuration ------------------------------------------------------------------

def _add_param_args(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("model parameters")
    g.add_argument("--params", help="JSON parameter file (keys nu, d0, d2, beta, m, omega, hbar)")
    g.add_argument("--config", help="JSON run configuration; its 'params' block and option values "
                                    "are used where the command line is silent")
    for name in ("nu", "d0", "d2", "beta", "m", "omega", "hbar"):
        g.add_argument(f"--{name}", type=float)


def _add_output_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", help="output directory (default: $OPENOSC_OUT or .)")
    sp.add_argument("--format", choices=("json", "csv", "both"), default="both")
    sp.add_argument("--plot-spec", action="store_true",
                    help="also write a plot description (series, axes, labels)")
    sp.add_argument("--quiet", action="store_true", help="do not echo the JSON summary")


def _load_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    try:
        data = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _config_defaults(sub: argparse.ArgumentParser, cfg: dict) -> dict:
    """Option values from the config file, checked against the subcommand's options."""
    known = {a.dest for a in sub._actions}
    out = {}
    for key, val in cfg.items():
        if key == "params":
            continue
        attr = key.replace("-", "_")
        if attr not in known or attr in ("config", "params"):
            raise ConfigError(f"unknown config key {key!r} for this command")
        out[attr] = val
    return out


def resolve_params(args, cfg: dict) -> ModelParams:
    data: dict = {}
    if cfg.get("params"):
        if not isinstance(cfg["params"], dict):
            raise ConfigError("'params' must be an object")
        data.update(cfg["params"])
    if getattr(args, "params", None):
        try:
            data.update(json.loads(Path(args.params).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read parameter file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed parameter file: {exc}") from None
    for name in ("nu", "d0", "d2", "beta", "m", "omega", "hbar"):
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    try:
        return params_from_mapping(data)
    except InvalidParameters as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("OPENOSC_OUT") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pairing(p: ModelParams) -> dict | None:
    try:
        return ladder.ladder_operators(p).pairing_record()
    except (ladder.DegenerateSpectrum, InvalidParameters, ladder.LadderVerificationError) as exc:
        return {"unavailable": str(exc)}


def _emit(args, command: str, payload: dict, p: ModelParams | None = None,
          csv_rows: list[dict] | None = None, csv_columns=None, plot: dict | None = None) -> None:
    out = _out_dir(args)
    if p is not None:
        payload = {"params": p.to_dict(), "lambda_pairing": _pairing(p), **payload}
    if args.format in ("json", "both"):
        analysis.write_json(out / f"{command}.json", payload)
    if csv_rows is not None and args.format in ("csv", "both"):
        analysis.write_table_csv(out / f"{command}.csv", csv_rows, csv_columns)
    if plot is not None and args.plot_spec:
        analysis.write_json(out / f"{command}.plot.json", plot)
    if not args.quiet:
        print(json.dumps(payload, indent=1, sort_keys=True, default=analysis._json_default))


def _require(p: ModelParams) -> None:
    rep = validate(p)
    if not rep.ok:
        raise InvalidParameters("; ".join(rep.failures))


# --- commands -------------------------------------------------------------------------

def cmd_validate(args, p):
    rep = validate(p)
    _emit(args, "validate", {"validation": rep.to_dict()}, p if rep.ok else None)
    if not rep.ok:
        print(json.dumps({"params": p.to_dict()}), file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_scales(args, p):
    _require(p)
    _emit(args, "scales", {"scales": derived_scales(p).to_dict()}, p)
    return EXIT_OK


def cmd_relaxed(args, p):
    _require(p)
    from .diffop import build_generator
    st = gauss.relaxed_state(p)
    res = gauss.max_coefficient(gauss.apply(build_generator(p), st))
    printed = gauss.printed_relaxed_parameters(p)
    printed_res = gauss.max_coefficient(gauss.apply(
        build_generator(p), gauss.gaussian_state(printed.Q2, printed.R2, printed.S2))) \
        if printed.R2 > 0 else None
    payload = {**gauss.relaxed_parameters(p).to_dict(),
               "generator_residual": res,
               "printed": {**printed.to_dict(), "generator_residual": printed_res},
               "x2": p.x2(), "p2": p.p2(),
               "norm": gauss.overlap(st, st).real, "trace": gauss.trace(st).real}
    if args.state_out:
        st.save(args.state_out)
        payload["state_file"] = str(args.state_out)
    _emit(args, "relaxed", payload, p)
    return EXIT_OK


def cmd_spectrum(args, _p):
    if args.nu is None:
        raise ConfigError("--nu is required")
    sp = ladder.spectrum(args.nu)
    payload = sp.to_dict()
    payload["unit_circle"] = bool(args.nu < 2 and all(abs(abs(v) - 1) < 1e-12 for v in sp.lambdas.values()))
    payload["real_spectrum"] = bool(args.nu > 2 and all(abs(v.imag) < 1e-12 for v in sp.lambdas.values()))
    _emit(args, "spectrum", payload)
    return EXIT_OK


def cmd_ladders(args, p):
    _require(p)
    ls = ladder.ladder_operators(p)
    payload = {
        "operators": {k: {"x": _cx(v[0]), "p": _cx(v[1]), "x_d": _cx(v[2]), "p_d": _cx(v[3])}
                      for k, v in zip(ladder.LADDER_NAMES, ls.vectors)},
        "spectrum": ls.spec.to_dict(),
        "generator": ladder.diagonal_form_check(p).to_dict(),
        "heisenberg_exponents": ladder.heisenberg_factors(p),
        "printed_elements": {
            reading: [c.to_dict() for c in ladder.printed_element_checks(p, reading)]
            for reading in ladder.READINGS},
        "determinants": {f"{s}<-{t}": _cx(ladder.basis_transform(s, t, p).det)
                         for s in ladder.BASES for t in ladder.BASES if s != t},
    }
    _emit(args, "ladders", payload, p)
    return EXIT_OK


def cmd_verify(args, _p):
    rep = verification_sweep(args.seed, args.draws)
    _emit(args, "verify-algebra", rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_VERIFY


def cmd_evolve_moments(args, p):
    _require(p)
    ms = derive_moment_system(p, args.convention)
    sinf = ms.stationary_covariance()
    m0 = np.array([args.x0, args.p0])
    s0 = np.array(args.sigma0).reshape(2, 2) if args.sigma0 else sinf
    rows = []
    for t in np.linspace(0, args.t_final, args.samples):
        m = ms.first_moments(m0, t)
        s = ms.covariance(s0, t)
        rows.append({"t": float(t), "x_mean": float(m[0]), "p_mean": float(m[1]),
                     "xx": float(s[0, 0] + m[0] ** 2), "pp": float(s[1, 1] + m[1] ** 2),
                     "xp_sym": float(s[0, 1] + m[0] * m[1])})
    payload = {"convention": args.convention, "A": ms.A, "D": ms.D,
               "stationary_covariance": sinf, "eigenvalues": [_cx(v) for v in ms.eigenvalues()],
               "x2_closed_form": p.x2(), "p2_closed_form": p.p2(),
               "R2": gauss.relaxed_parameters(p).R2}
    plot = {"series": ["x_mean", "p_mean"], "x": "t", "xlabel": "t [1/omega]", "ylabel": "moment"}
    _emit(args, "evolve-moments", payload, p, rows, plot=plot)
    return EXIT_OK


def _initial_state(args, p: ModelParams) -> gauss.GaussPolyState:
    if args.state == "relaxed":
        return gauss.relaxed_state(p)
    if args.state == "coherent":
        return ladder.w_coherent_state(args.w, None, p)
    if args.state == "perturbed":
        base = gauss.relaxed_state(p)
        ex = ladder.ladder_state(args.m_index, args.n_index, "a", p)
        return gauss.add(base, ex.scale(args.amplitude))
    if args.state == "file":
        return gauss.GaussPolyState.load(args.state_file)
    raise ConfigError(f"unknown initial state {args.state!r}")


def cmd_evolve_grid(args, p):
    _require(p)
    g = grid.GridSpec(args.N, args.L, args.L_d)
    st = _initial_state(args, p)
    f0 = grid.GridField.sample(st, g)
    res = grid.evolve(f0, p, args.t_final, dt=args.dt, sample_every=args.sample_every,
                      probes=grid.trajectory_probes())
    rows = []
    s = res.samples
    for i, t in enumerate(res.times):
        x2, p2 = s["xx"][i].real, s["pp"][i].real
        rows.append({"t": float(t), "trace_re": s["1"][i].real, "x_mean": s["x"][i].real,
                     "p_mean": s["p"][i].real, "x2": x2, "p2": p2, "energy": (x2 + p2) / 2})
    payload = {"grid": g.to_dict(), "initial_state": args.state, "diagnostics": res.diagnostics(),
               "final": rows[-1]}
    if args.state == "relaxed":
        payload["stationarity"] = float(np.max(np.abs(res.field.values - f0.values))
                                        / np.max(np.abs(f0.values)))
    if args.snapshot:
        res.field.save(_out_dir(args) / "evolve-grid.snapshot.bin")
    plot = {"series": ["x_mean", "p_mean", "energy"], "x": "t", "xlabel": "t [1/omega]",
            "ylabel": "expectation value"}
    _emit(args, "evolve-grid", payload, p, rows, grid.TRAJECTORY_COLUMNS, plot)
    return EXIT_OK


def cmd_decohere(args, p):
    _require(p)
    q = analysis.DecoherenceQuery(args.w, args.z_obs, args.z_prep, args.delta_z,
                                  args.t_prep, args.t_obs)
    values = {}
    for m in args.methods:
        kw = {"N": args.N, "extrapolate": args.extrapolate} if m == "grid" else {}
        values[m] = analysis.decoherence_expectation(q, p, m, **kw)
    payload = {"query": q.to_dict(), "values": values,
               "audit": analysis.audit(q, p).to_dict(),
               "closed_form_with_p2": analysis.closed_form_terms(q, p, "p2").value}
    _emit(args, "decohere", payload, p)
    return EXIT_OK


def cmd_thermal(args, p):
    _require(p)
    _emit(args, "thermal", {"thermal": analysis.thermal_map(p).to_dict()}, p)
    return EXIT_OK


def cmd_scan_weak(args, _p):
    g_list = sorted(args.g, reverse=True)
    rows = analysis.weak_coupling_scan(args.kappa, g_list)
    payload = {"kappa": args.kappa, "direction": analysis.weak_coupling_direction(args.kappa).to_dict(),
               "limits": {"Q2": 2 * args.kappa, "R2": 1 / (2 * args.kappa),
                          "energy": 1 / (2 * args.kappa), "closed_Q2": 2.0},
               "final": rows[-1]}
    plot = {"series": ["Q2", "R2", "energy"], "x": "g", "xscale": "log", "xlabel": "g",
            "ylabel": "relaxed-state parameter"}
    _emit(args, "scan-weak", payload, None, rows, analysis.WEAK_COLUMNS, plot)
    return EXIT_OK


def cmd_scan_critical(args, p):
    if args.nu_list:
        nus = args.nu_list
    else:
        d = np.logspace(np.log10(args.delta_min), np.log10(args.delta_max), args.count)
        nus = np.concatenate([2 - d, 2 + d]).tolist()
    rest = ModelParams(1.0, p.d0, p.d2, p.beta)
    out = analysis.critical_damping_scan(nus, rest, args.t_probe)
    payload = {"z_abs2_exponent": out["z_abs2_exponent"], "expected_exponent": -0.5,
               "classical_gap": analysis.classical_continuity_gap(args.gap_delta),
               "rest": {"d0": p.d0, "d2": p.d2, "beta": p.beta}}
    plot = {"series": ["z_abs2"], "x": "distance", "xscale": "log", "yscale": "log",
            "xlabel": "|2 - nu|", "ylabel": "|z|^2"}
    _emit(args, "scan-critical", payload, None, out["rows"], analysis.CRITICAL_COLUMNS, plot)
    return EXIT_OK


def cmd_classical(args, _p):
    if args.nu is None:
        raise ConfigError("--nu is required")
    t = np.linspace(0, args.t_max, args.samples)
    x, x_reg = analysis.classical_trajectory(args.x0, args.p0, args.nu, t)
    rows = [{"t": float(a), "x": float(b), "x_regular": float(c)} for a, b, c in zip(t, x, x_reg)]
    payload = {"nu": args.nu, "x0": args.x0, "p0": args.p0,
               "secular_regime": bool(abs(args.nu - 2) < 1e-6), "x_final": rows[-1]["x"]}
    plot = {"series": ["x", "x_regular"], "x": "t", "xlabel": "t [1/omega]", "ylabel": "x"}
    _emit(args, "classical", payload, None, rows, ("t", "x", "x_regular"), plot)
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

COMMANDS = {
    "validate": cmd_validate, "scales": cmd_scales, "relaxed": cmd_relaxed,
    "spectrum": cmd_spectrum, "ladders": cmd_ladders, "verify-algebra": cmd_verify,
    "evolve-moments": cmd_evolve_moments, "evolve-grid": cmd_evolve_grid,
    "decohere": cmd_decohere, "thermal": cmd_thermal, "scan-weak": cmd_scan_weak,
    "scan-critical": cmd_scan_critical, "classical": cmd_classical,
}
NEEDS_PARAMS = {"validate", "scales", "relaxed", "ladders", "evolve-moments", "evolve-grid",
                "decohere", "thermal", "scan-critical"}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="openosc", description="Open harmonic oscillator toolkit")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ap.subcommands = {}

    def add(name, help_, params=True):
        sp = sub.add_parser(name, help=help_)
        ap.subcommands[name] = sp
        if params:
            _add_param_args(sp)
        else:
            sp.add_argument("--config")
        _add_output_args(sp)
        return sp

    add("validate", "check parameter invariants")
    add("scales", "derived length and time scales")
    sp = add("relaxed", "stationary Gaussian state")
    sp.add_argument("--state-out", help="write the state as JSON")
    sp = add("spectrum", "eigenvalue table, omega_nu and z", params=False)
    sp.add_argument("--nu", type=float)
    add("ladders", "ladder operators, basis tables and diagonal form")
    sp = add("verify-algebra", "randomized sweep of exact identities", params=False)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--draws", type=int, default=100)

    sp = add("evolve-moments", "first and second moments over time")
    sp.add_argument("--x0", type=float, default=1.0)
    sp.add_argument("--p0", type=float, default=0.0)
    sp.add_argument("--sigma0", type=_float_list, help="initial covariance xx,xp,px,pp")
    sp.add_argument("--t-final", type=float, default=10.0)
    sp.add_argument("--samples", type=int, default=201)
    sp.add_argument("--convention", choices=("left-mult", "pd-simplified"), default="left-mult")

    sp = add("evolve-grid", "finite-difference evolution")
    sp.add_argument("--N", type=int, default=128)
    sp.add_argument("--L", type=float, default=8.0)
    sp.add_argument("--L-d", dest="L_d", type=float)
    sp.add_argument("--t-final", type=float, default=5.0)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--sample-every", type=float, default=0.05)
    sp.add_argument("--state", choices=("relaxed", "coherent", "perturbed", "file"), default="relaxed")
    sp.add_argument("--state-file")
    sp.add_argument("--w", type=_complex, default=0.5 + 0.2j)
    sp.add_argument("--m-index", type=int, default=1)
    sp.add_argument("--n-index", type=int, default=1)
    sp.add_argument("--amplitude", type=float, default=0.1)
    sp.add_argument("--snapshot", action="store_true")

    sp = add("decohere", "decoherence functional")
    sp.add_argument("--w", type=_complex, default=0j)
    sp.add_argument("--z-obs", type=float, default=1.0)
    sp.add_argument("--z-prep", type=float, default=0.0)
    sp.add_argument("--delta-z", type=float, help="filter width (omit for no filter)")
    sp.add_argument("--t-prep", type=float, default=0.0)
    sp.add_argument("--t-obs", type=float, default=0.0)
    sp.add_argument("--methods", type=lambda s: s.split(","), default=["closed-form", "weyl-exact"])
    sp.add_argument("--N", type=int, default=128)
    sp.add_argument("--extrapolate", action="store_true",
                    help="grid method: Richardson extrapolation from N and 2N")

    add("thermal", "Gibbs-state interpretation of the relaxed state")
    sp = add("scan-weak", "weak-coupling limit g -> 0", params=False)
    sp.add_argument("--kappa", type=float, default=0.5)
    sp.add_argument("--g", type=_float_list, default=[1e-1, 1e-2, 1e-3])

    sp = add("scan-critical", "behaviour around nu = 2")
    sp.add_argument("--nu-list", type=_float_list)
    sp.add_argument("--delta-min", type=float, default=10**-5.5)
    sp.add_argument("--delta-max", type=float, default=1e-1)
    sp.add_argument("--count", type=int, default=20)
    sp.add_argument("--t-probe", type=float, default=1.0)
    sp.add_argument("--gap-delta", type=float, default=1e-3)

    sp = add("classical", "classical damped trajectory", params=False)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--x0", type=float, default=1.0)
    sp.add_argument("--p0", type=float, default=0.0)
    sp.add_argument("--t-max", type=float, default=5.0)
    sp.add_argument("--samples", type=int, default=501)
    return ap


def run(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        cfg = _load_config(args)
        if cfg:
            # config values become defaults, so explicit flags still take precedence
            ap.subcommands[args.command].set_defaults(**_config_defaults(ap.subcommands[args.command], cfg))
            args = ap.parse_args(argv)
        if args.command == "scan-critical" and not (cfg.get("params") or args.params or args.d0 is not None):
            p = ModelParams(1.0, 1.0, 1.0, 0.0)
        elif args.command in NEEDS_PARAMS:
            p = resolve_params(args, cfg)
        else:
            p = None
        return COMMANDS[args.command](args, p)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParameters as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ladder.DegenerateSpectrum, ladder.LadderVerificationError) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except grid.GridInstability as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
