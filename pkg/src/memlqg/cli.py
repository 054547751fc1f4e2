"""Command-line experiment driver.

Subcommands
    steady          JSON report of open-loop steady quantities
    sweep-fidelity  CSV grid of controlled/uncontrolled fidelity over
                    (ancilla squeezing, control strength)
    sweep-squeezed  CSV grid over (ancilla, source) squeezing comparing the
                    informed three-channel filter with the blind two-channel one
    trajectory      Monte Carlo sample paths (control on and/or off, shared
                    noise) written as CSV
    validate        run the acceptance suite; nonzero exit on failure

Parameters resolve in three layers: built-in defaults, then a flat
`key = value` config file (--config), then explicit flags. Frequencies in
the config are laboratory values in Hz (nu_hz, gamma_hz); internally
everything runs in rad/s. Reruns with identical settings produce
byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .acceptance import run_all
from .closedloop import (
    build_augmented,
    closed_loop_covariance,
    closed_loop_mean,
    controlled_fidelity,
)
from .control import LqgConfig, lqg_gains
from .estimation import measurement_model, stationary_filter
from .model import (
    MemoryParams,
    SourceSpec,
    input_covariance,
    lambda_matrix,
    noise_model,
    squeezed_vacuum,
    standard_encoding,
    thermal_occupation,
    vacuum,
)
from .openloop import (
    fidelity,
    fidelity_closed_form,
    occupation_threshold,
    pfd_rate,
    psys,
    psys_closed_form,
    single_mode_check,
    steady_mode_variances,
    steady_state,
    syndrome_statistics,
    syndrome_variance_ideal,
)
from .simulate import TrajectoryConfig, filter_view_noise, simulate_trajectory

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RunSettings:
    """Fully resolved scalar settings shared by all subcommands."""

    nu_hz: float = 30e3
    gamma_hz: float = 1.0
    n_occ: float = 8.8e3
    alpha_in: float = -230.0
    mu: float = -0.4
    mu1: float = 0.0
    r: float | None = None  # per-command default when left unset
    filter_mode: str = "s1"
    drive: tuple = (100.0, 0.0, 100.0, 0.0, 100.0, 0.0)
    seed: int = 20260819
    dt: float | None = None
    duration: float | None = None
    ntraj: int = 1

    @property
    def params(self) -> MemoryParams:
        return MemoryParams(
            nu=TWO_PI * self.nu_hz, gamma=TWO_PI * self.gamma_hz, n_occ=self.n_occ
        )

    def resolved_dt(self) -> float:
        rate = TWO_PI * (self.nu_hz + self.gamma_hz)
        return self.dt if self.dt is not None else 1e-3 / rate

    def resolved_duration(self) -> float:
        rate = TWO_PI * (self.nu_hz + self.gamma_hz)
        return self.duration if self.duration is not None else 30.0 / rate


_FLOAT_KEYS = ("nu_hz", "gamma_hz", "n_occ", "alpha_in", "mu", "mu1", "r", "dt", "duration")
_INT_KEYS = ("seed", "ntraj")
_CONFIG_KEYS = set(_FLOAT_KEYS) | set(_INT_KEYS) | {
    "filter_mode",
    "drive",
    "temp_k",
    "omega_m_hz",
}


def parse_config_file(path: str, err) -> dict:
    """Flat `key = value` file; '#' starts a comment; unknown keys are fatal."""
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        err(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            err(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_KEYS:
            err(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            if key in _FLOAT_KEYS or key in ("temp_k", "omega_m_hz"):
                values[key] = float(val)
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key == "filter_mode":
                if val not in ("s1", "s2"):
                    raise ValueError("must be s1 or s2")
                values[key] = val
            elif key == "drive":
                parts = tuple(float(p) for p in val.split(","))
                if len(parts) != 6:
                    raise ValueError("need 6 comma-separated values")
                values[key] = parts
        except ValueError as exc:
            err(f"{path}:{lineno}: bad value for {key!r}: {exc}")
    return values


def resolve_settings(args: argparse.Namespace, err) -> RunSettings:
    cfg = parse_config_file(args.config, err) if args.config else {}
    # occupation derived from temperature when not given explicitly
    if "n_occ" not in cfg and "temp_k" in cfg:
        if "omega_m_hz" not in cfg:
            err("config key 'temp_k' needs 'omega_m_hz' as well")
        cfg["n_occ"] = thermal_occupation(cfg["temp_k"], TWO_PI * cfg["omega_m_hz"])
    cfg.pop("temp_k", None)
    cfg.pop("omega_m_hz", None)

    settings = replace(RunSettings(), **cfg)
    overrides = {}
    for f in fields(RunSettings):
        flag = getattr(args, f.name, None)
        if flag is not None:
            overrides[f.name] = flag
    if overrides:
        settings = replace(settings, **overrides)
    if settings.nu_hz <= 0 or settings.gamma_hz < 0 or settings.n_occ < 0:
        err("physical parameters must satisfy nu_hz > 0, gamma_hz >= 0, n_occ >= 0")
    return settings


def parse_range(text: str, err, name: str) -> np.ndarray:
    """'a:b:n' -> n evenly spaced values; a bare number -> one value."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            count = int(n)
            if count < 1:
                raise ValueError("count must be >= 1")
            return np.linspace(float(a), float(b), count)
        return np.array([float(text)])
    except ValueError as exc:
        err(f"bad {name} range {text!r} (want 'a:b:n' or a number): {exc}")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _open_out(path: str | None):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _header_lines(schema: str, settings: RunSettings, extra: dict | None = None) -> list[str]:
    items = {
        "alpha_in": _fmt(settings.alpha_in),
        "drive": ",".join(_fmt(v) for v in settings.drive),
        "filter_mode": settings.filter_mode,
        "gamma_hz": _fmt(settings.gamma_hz),
        "mu": _fmt(settings.mu),
        "mu1": _fmt(settings.mu1),
        "n_occ": _fmt(settings.n_occ),
        "nu_hz": _fmt(settings.nu_hz),
        "seed": str(settings.seed),
    }
    if extra:
        items.update({k: str(v) for k, v in extra.items()})
    lines = [f"# schema = {schema}", f"# version = {__version__}"]
    lines += [f"# {k} = {items[k]}" for k in sorted(items)]
    return lines


def _lam_and_noise(settings: RunSettings, mu: float, mu1: float):
    lam = lambda_matrix(
        squeezed_vacuum(mu1), squeezed_vacuum(mu), squeezed_vacuum(mu)
    )
    return lam, noise_model(lam, settings.params.n_occ)


def cmd_steady(args, err) -> int:
    settings = resolve_settings(args, err)
    params = settings.params
    enc = standard_encoding(settings.alpha_in)
    src_mode = squeezed_vacuum(settings.mu1)
    lam, noise = _lam_and_noise(settings, settings.mu, settings.mu1)
    state = steady_state(params, enc, noise, drive=np.asarray(settings.drive))
    mean_c, var = single_mode_check(params, settings.alpha_in)
    vp, vm = steady_mode_variances(
        params, [src_mode, squeezed_vacuum(settings.mu), squeezed_vacuum(settings.mu)]
    )
    report = {
        "schema": "memlqg.steady/1",
        "version": __version__,
        "settings": {
            "nu_hz": settings.nu_hz,
            "gamma_hz": settings.gamma_hz,
            "n_occ": settings.n_occ,
            "alpha_in": settings.alpha_in,
            "mu": settings.mu,
            "mu1": settings.mu1,
            "drive": list(settings.drive),
        },
        "single_mode": {
            "mean_q": mean_c.real,
            "mean_p": mean_c.imag,
            "variance": var,
        },
        "mode_variances": {"plus": vp.tolist(), "minus": vm.tolist()},
        "witnesses": {
            "pfd_rate": pfd_rate(settings.mu, src_mode),
            "classical_rate": 7.5,
            "entanglement_bound": 6.0,
            "psys_quadratic": psys(state.cov),
            "psys_closed_form_coherent": psys_closed_form(settings.mu, params),
            "occupation_threshold": occupation_threshold(params),
        },
        "syndrome": {
            "pairwise_variances": syndrome_statistics(state.cov).tolist(),
            "ideal": syndrome_variance_ideal(params),
        },
        "fidelity": {
            "determinant_form": fidelity(state.cov, input_covariance(lam)),
            "closed_form_coherent": fidelity_closed_form(settings.mu, params),
        },
        "steady_mean": state.mean.tolist(),
    }
    out, close = _open_out(args.out)
    try:
        json.dump(report, out, indent=2, sort_keys=True)
        out.write("\n")
    finally:
        if close:
            out.close()
    return 0


def _controlled_fidelity_at(settings: RunSettings, mu: float, mu1: float, r: float, mode: str) -> float:
    params = settings.params
    enc = standard_encoding(settings.alpha_in)
    lam_true, noise_true = _lam_and_noise(settings, mu, mu1)
    if mode == "s2":
        lam_f = lambda_matrix(vacuum(), squeezed_vacuum(mu), squeezed_vacuum(mu))
        noise_f = noise_model(lam_f, params.n_occ)
    else:
        noise_f = noise_true
    mm = measurement_model(mode, enc, params, noise_f)
    sf = stationary_filter(mm, params, enc, noise_f)
    g = lqg_gains(LqgConfig(r=r, mode=mode), params, enc)
    am = build_augmented(params, enc, noise_true, mm, g, sf)
    _, vprime = closed_loop_covariance(am)
    return controlled_fidelity(vprime, input_covariance(lam_true))


def cmd_sweep_fidelity(args, err) -> int:
    settings = resolve_settings(args, err)
    params = settings.params
    enc = standard_encoding(settings.alpha_in)
    mu_text = args.mu_range or "-3:0.5:36"
    log2r_text = args.log2r or "10:40:4"
    mus = parse_range(mu_text, err, "--mu")
    log2rs = parse_range(log2r_text, err, "--log2r")
    mu1 = settings.mu1
    out, close = _open_out(args.out)
    try:
        for line in _header_lines(
            "memlqg.sweep-fidelity/1", settings, extra={"mu": mu_text, "log2r": log2r_text}
        ):
            out.write(line + "\n")
        out.write("mu,log2r_neg,fidelity_controlled,fidelity_uncontrolled\n")
        for mu in mus:
            lam, noise = _lam_and_noise(settings, float(mu), mu1)
            v_inf = steady_state(params, enc, noise).cov
            f_unc = fidelity(v_inf, input_covariance(lam))
            for lg in log2rs:
                f_ctl = _controlled_fidelity_at(
                    settings, float(mu), mu1, 2.0 ** (-float(lg)), settings.filter_mode
                )
                out.write(
                    f"{_fmt(mu)},{_fmt(lg)},{_fmt(f_ctl)},{_fmt(f_unc)}\n"
                )
    finally:
        if close:
            out.close()
    return 0


def cmd_sweep_squeezed(args, err) -> int:
    settings = resolve_settings(args, err)
    # the informed/blind contrast only shows up under strong feedback
    r = settings.r if settings.r is not None else 2.0**-40
    mu_text = args.mu_range or "-2:0:5"
    mu1_text = args.mu1_range or "-1:1:9"
    mus = parse_range(mu_text, err, "--mu")
    mu1s = parse_range(mu1_text, err, "--mu1")
    out, close = _open_out(args.out)
    try:
        for line in _header_lines(
            "memlqg.sweep-squeezed/1",
            settings,
            extra={"r": _fmt(r), "mu": mu_text, "mu1": mu1_text},
        ):
            out.write(line + "\n")
        out.write("mu,mu1,fidelity_s1,fidelity_s2\n")
        for mu in mus:
            for mu1 in mu1s:
                f1 = _controlled_fidelity_at(settings, float(mu), float(mu1), r, "s1")
                f2 = _controlled_fidelity_at(settings, float(mu), float(mu1), r, "s2")
                out.write(f"{_fmt(mu)},{_fmt(mu1)},{_fmt(f1)},{_fmt(f2)}\n")
    finally:
        if close:
            out.close()
    return 0


def _write_trajectory_csv(path: str, traj, settings: RunSettings, control: str, r: float) -> None:
    m = traj.pi_s.shape[1]
    cols = (
        ["t"]
        + [f"x{i+1}" for i in range(6)]
        + [f"pis{i+1}" for i in range(m)]
        + [f"u{i+1}" for i in range(6)]
        + [f"errband{i+1}" for i in range(m)]
    )
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for line in _header_lines(
            "memlqg.trajectory/1",
            settings,
            extra={
                "control": control,
                "dt": _fmt(traj.cfg.dt),
                "duration": _fmt(traj.cfg.duration),
                "r": _fmt(r),
            },
        ):
            out.write(line + "\n")
        out.write(",".join(cols) + "\n")
        for k in range(len(traj.times)):
            row = (
                [_fmt(traj.times[k])]
                + [_fmt(v) for v in traj.x[k]]
                + [_fmt(v) for v in traj.pi_s[k]]
                + [_fmt(v) for v in traj.u[k]]
                + [_fmt(v) for v in traj.err_band[k]]
            )
            out.write(",".join(row) + "\n")


def cmd_trajectory(args, err) -> int:
    settings = resolve_settings(args, err)
    params = settings.params
    enc = standard_encoding(settings.alpha_in)
    controls = args.control or ["on", "off"]
    r = settings.r if settings.r is not None else 1e-9
    mode = settings.filter_mode
    source = SourceSpec(
        alpha_in=settings.alpha_in,
        mode=squeezed_vacuum(settings.mu1),
        covariance_known=(mode == "s1"),
    )
    lam_true, noise_true = _lam_and_noise(settings, settings.mu, settings.mu1)
    noise_filt = filter_view_noise(noise_true, source, params)
    mm = measurement_model(mode, enc, params, noise_filt)
    sf = stationary_filter(mm, params, enc, noise_filt)
    g = lqg_gains(LqgConfig(r=r, mode=mode), params, enc)
    stem = args.out or "trajectory"
    if stem.endswith(".csv"):
        stem = stem[:-4]
    written = []
    for control in controls:
        cfg = TrajectoryConfig(
            dt=settings.resolved_dt(),
            duration=settings.resolved_duration(),
            seed=settings.seed,
            control_enabled=(control == "on"),
            mode=mode,
        )
        for k in range(settings.ntraj):
            traj = simulate_trajectory(
                cfg,
                params,
                enc,
                noise_true,
                mm,
                g,
                source,
                sf=sf,
                stream_index=k,
                drive=np.asarray(settings.drive),
            )
            path = f"{stem}.{control}.{k:03d}.csv"
            _write_trajectory_csv(path, traj, settings, control, r)
            written.append(path)
    print("\n".join(written))
    return 0


def cmd_validate(args, err) -> int:
    del args, err
    results = run_all()
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memlqg",
        description="Quantum memory transfer analysis: steady states, "
        "feedback sweeps, Monte Carlo trajectories, validation.",
    )
    parser.add_argument("--version", action="version", version=f"memlqg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, mu_grid=False, mu1_grid=False):
        p.add_argument("--config", help="flat key=value settings file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--filter", dest="filter_mode", choices=("s1", "s2"))
        p.add_argument("--seed", type=int)
        p.add_argument("--r", type=float, help="control effort weight")
        if mu1_grid:
            p.add_argument("--mu1", dest="mu1_range", help="source squeezing range a:b:n")
        else:
            p.add_argument("--mu1", type=float, help="source squeezing")
        if mu_grid:
            p.add_argument("--mu", dest="mu_range", help="ancilla squeezing range a:b:n")
        else:
            p.add_argument("--mu", type=float, help="ancilla squeezing")

    p_steady = sub.add_parser("steady", help="open-loop steady-state JSON report")
    add_common(p_steady)
    p_steady.set_defaults(func=cmd_steady)

    p_sf = sub.add_parser("sweep-fidelity", help="fidelity grid CSV over (mu, -log2 r)")
    add_common(p_sf, mu_grid=True)
    p_sf.add_argument("--log2r", help="-log2(r) range a:b:n (default 10:40:4)")
    p_sf.set_defaults(func=cmd_sweep_fidelity)

    p_ss = sub.add_parser(
        "sweep-squeezed", help="fidelity CSV over (mu, mu1) for informed vs blind filters"
    )
    add_common(p_ss, mu_grid=True, mu1_grid=True)
    p_ss.set_defaults(func=cmd_sweep_squeezed)

    p_tr = sub.add_parser("trajectory", help="Monte Carlo sample paths as CSV")
    add_common(p_tr)
    p_tr.add_argument("--dt", type=float, help="integrator step (s)")
    p_tr.add_argument("--duration", type=float, help="total simulated time (s)")
    p_tr.add_argument("--ntraj", type=int, help="trajectories per control state")
    p_tr.add_argument(
        "--control",
        action="append",
        choices=("on", "off"),
        help="repeatable; default: both on and off",
    )
    p_tr.set_defaults(func=cmd_trajectory)

    p_val = sub.add_parser("validate", help="run the acceptance suite")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser.error)
    except BrokenPipeError:
        return 0
    except (ValueError, RuntimeError) as exc:
        print(f"memlqg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
