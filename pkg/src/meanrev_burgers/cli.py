"""``meanrev-burgers <command> [--key value]... [--config path] [--out prefix]``

Values resolve as flag > config file > default.  Every resolved value and its
source is written to ``<prefix>.manifest.json``; that manifest is itself a
valid ``--config`` file, so a run can be replayed from it alone.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
4 verification failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .pipeline import PRESETS, build_alpha, preset_grid, run_oracle, solve_alpha, verify
from .sde_sim import (
    SCHEMES,
    AlphaField,
    SdeParams,
    ensemble_summary,
    girsanov_log_density,
    path_independence_residual,
    reconstruct_Z,
    simulate,
    x_transform,
)
from .serialize import (
    atomic_write,
    coeff_csv,
    grid_csv,
    path_dump_csv,
    read_grid_csv,
    to_json,
    trajectory_rows,
)
from .spectral_core import BlowUpError, ConfigError, Direction, SpectralConfig, synthesize

COMMANDS = ("solve", "oracle", "simulate", "verify", "init-data")
EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_VERIFY = 0, 2, 3, 4


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s):
    return None if s in (None, "", "none", "None") else int(s)


def _opt_float(s):
    return None if s in (None, "", "none", "None") else float(s)


# key -> (parser, default)
KEYS = {
    "N": (int, 16),
    "sigma": (float, 1.0),
    "T": (float, 0.5),
    "n": (int, 1000),
    "M": (_opt_int, None),
    "direction": (str, "well_posed_reverse"),
    "preset": (str, "sine"),
    "amplitude": (float, 1.0),
    "input": (str, ""),
    "nu": (_opt_float, None),
    "method": (str, "hopf_cole"),
    "resolution": (_opt_int, None),
    "theta": (float, 0.05),
    "r0": (float, 1.0),
    "steps": (int, 400),
    "paths": (int, 1000),
    "seed": (int, 0),
    "scheme": (str, "log_euler"),
    "workers": (int, 1),
    "x0": (float, 0.0),
    "full_trajectory": (_bool, False),
    "dump_paths": (_bool, False),
    "out": (str, "out/run"),
}


class UsageError(Exception):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass
class RunConfig:
    command: str
    values: dict
    sources: dict = field(default_factory=dict)
    file_values: dict = field(default_factory=dict)
    config_path: str | None = None

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    @property
    def M(self) -> int:
        m = self.values["M"]
        return 4 * self.values["N"] if m is None else m

    def spectral(self, direction: str | None = None) -> SpectralConfig:
        return SpectralConfig.from_horizon(self.N, self.sigma, self.T, self.n, self.M,
                                           direction or self.direction)

    def sde(self) -> SdeParams:
        return SdeParams(self.theta, self.sigma, self.r0, self.T, self.steps, self.paths,
                         self.seed)


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` text with ``#`` comments, or a JSON manifest."""
    if not os.path.exists(path):
        raise UsageError("config", f"file not found: {path}")
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        raw = data.get("resolved", data)
        return {k: ("" if v is None else v) for k, v in raw.items()}
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError("config", f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def _validate(v: dict) -> None:
    checks = [
        ("N", v["N"] >= 1, "must be >= 1"),
        ("sigma", v["sigma"] > 0 and math.isfinite(v["sigma"]), "must be > 0"),
        ("T", v["T"] > 0 and math.isfinite(v["T"]), "must be > 0"),
        ("n", v["n"] >= 1, "must be >= 1"),
        ("M", v["M"] is None or v["M"] >= 2 * v["N"] + 1, "must be >= 2N+1"),
        ("direction", v["direction"] in {d.value for d in Direction},
         "must be paper_forward or well_posed_reverse"),
        ("preset", v["preset"] in PRESETS, f"must be one of {', '.join(PRESETS)}"),
        ("nu", v["nu"] is None or v["nu"] > 0, "must be > 0"),
        ("method", v["method"] in ("hopf_cole", "reference_fd"),
         "must be hopf_cole or reference_fd"),
        ("resolution", v["resolution"] is None or v["resolution"] >= 64, "must be >= 64"),
        ("r0", v["r0"] != 0 and math.isfinite(v["r0"]), "must be non-zero"),
        ("steps", v["steps"] >= 1, "must be >= 1"),
        ("paths", v["paths"] >= 1, "must be >= 1"),
        ("seed", 0 <= v["seed"] < 2**64, "must fit in 64 bits"),
        ("scheme", v["scheme"] in SCHEMES, f"must be one of {', '.join(SCHEMES)}"),
        ("workers", v["workers"] >= 1, "must be >= 1"),
        ("input", not v["input"] or os.path.exists(v["input"]), "file not found"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise UsageError(key, msg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="meanrev-burgers", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=None)
    for key in KEYS:
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        p.add_argument(*flags, dest=key, default=None)
    return p


def parse_config(argv: list[str]) -> RunConfig:
    ns = build_parser().parse_args(argv)
    file_values = read_config_file(ns.config) if ns.config else {}
    for k in file_values:
        if k not in KEYS:
            raise UsageError(k, "unknown key in config file")
    values, sources = {}, {}
    for key, (conv, default) in KEYS.items():
        raw, src = default, "default"
        if key in file_values:
            raw, src = file_values[key], "file"
        flag = getattr(ns, key)
        if flag is not None:
            raw, src = flag, "flag"
        try:
            values[key] = conv(raw) if raw is not None else None
        except (TypeError, ValueError):
            raise UsageError(key, f"cannot parse {raw!r}") from None
        sources[key] = src
    _validate(values)
    return RunConfig(ns.command, values, sources, file_values, ns.config)


def _manifest(cfg: RunConfig, outputs: list[str], extra: dict | None = None) -> dict:
    m = {
        "tool": "meanrev-burgers",
        "version": __version__,
        "command": cfg.command,
        "resolved": cfg.values,
        "sources": cfg.sources,
        "file_values": cfg.file_values,
        "config_path": cfg.config_path,
        "outputs": outputs,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        m.update(extra)
    return m


def _initial_grid(cfg: RunConfig):
    if cfg.input:
        return read_grid_csv(cfg.input)
    return preset_grid(cfg.preset, cfg.amplitude, cfg.M)


def _write(prefix: str, suffix: str, text: str, written: list[str]) -> None:
    path = f"{prefix}.{suffix}"
    atomic_write(path, text)
    written.append(os.path.basename(path))


def run(cfg: RunConfig) -> int:
    prefix = cfg.out
    written: list[str] = []
    extra: dict = {}
    code = EXIT_OK

    if cfg.command == "init-data":
        _write(prefix, "grid.csv", grid_csv(_initial_grid(cfg)), written)

    elif cfg.command == "solve":
        grid = _initial_grid(cfg)
        scfg = SpectralConfig.from_horizon(cfg.N, cfg.sigma, cfg.T, cfg.n, grid.M, cfg.direction)
        try:
            traj = solve_alpha(grid, scfg)
        except BlowUpError as err:
            _write(prefix, "blowup.json", to_json(err.report()), written)
            print(f"meanrev-burgers: {err}", file=sys.stderr)
            extra["blowup"] = err.report()
            code = EXIT_BLOWUP
        else:
            _write(prefix, "coeffs.csv", coeff_csv(trajectory_rows(traj, cfg.full_trajectory)),
                   written)
            _write(prefix, "grid.csv", grid_csv(synthesize(traj.final, grid.M)), written)

    elif cfg.command == "oracle":
        grid = _initial_grid(cfg)
        nu = cfg.nu if cfg.nu is not None else 0.5 * cfg.sigma**2
        sol = run_oracle(grid, cfg.T, nu, cfg.method, cfg.resolution)
        _write(prefix, "grid.csv", grid_csv(sol.grid), written)
        _write(prefix, "oracle.json", to_json(sol.sidecar()), written)

    elif cfg.command == "simulate":
        sde = cfg.sde()
        grid = read_grid_csv(cfg.input) if cfg.input else None
        alpha, _ = build_alpha(cfg.preset, cfg.amplitude, grid, cfg.spectral())
        ens = simulate(sde, alpha, cfg.scheme, workers=cfg.workers)
        residual = None
        used_alpha: AlphaField | None = None if cfg.scheme == "log_exact" else alpha
        if used_alpha is not None and ens.excluded.sum() < ens.paths:
            Z = reconstruct_Z(alpha, sde.sigma, cfg.x0)
            residual = path_independence_residual(ens, Z, sde, alpha)
        summary = ensemble_summary(ens, sde, used_alpha, residual)
        _write(prefix, "summary.json", to_json(summary), written)
        if cfg.dump_paths:
            X = x_transform(ens, sde) if np.all(ens.R > 0) else np.log(np.abs(ens.R))
            L = girsanov_log_density(ens, sde, alpha)
            _write(prefix, "paths.csv", path_dump_csv(ens.times, ens.R, X, ens.increments, L),
                   written)

    elif cfg.command == "verify":
        verdict = verify(cfg.sde(), cfg.spectral(), cfg.preset, cfg.amplitude,
                         read_grid_csv(cfg.input) if cfg.input else None, cfg.x0, cfg.workers)
        _write(prefix, "verdict.json", to_json(verdict), written)
        if not verdict["pass"]:
            failed = [k for k, c in verdict["criteria"].items() if not c["pass"]]
            print(f"meanrev-burgers: verification failed: {', '.join(failed)}", file=sys.stderr)
            code = EXIT_VERIFY

    atomic_write(f"{prefix}.manifest.json", to_json(_manifest(cfg, written, extra)))
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as err:
        print(f"meanrev-burgers: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as err:  # argparse
        return int(err.code) if err.code is not None else EXIT_CONFIG
    try:
        return run(cfg)
    except ConfigError as err:
        print(f"meanrev-burgers: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
