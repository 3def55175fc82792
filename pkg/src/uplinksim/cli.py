"""Command-line front end: config ingestion, sweeps, validation, topology files.

Run configuration is a flat key = value text file with dotted namespaces
(see DEFAULTS for every key and its default); command-line flags and
--set overrides take precedence.  dB <-> linear conversion happens here,
at ingestion; everything below the CLI works in linear units, km and
seconds.

Exit codes: 0 success, 1 validation gate failed, 2 usage/config error,
3 placement infeasible.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .experiment import (
    THREADS_ENV,
    ExperimentConfig,
    SweepRow,
    run_sweep,
    sample_rate_curve,
)
from .oracle import run_validation
from .propagation import PropagationParams
from .radio import BeamParams, HoppingConfig
from .topology import (
    NetworkTopology,
    PlacementInfeasibleError,
    Rect,
    generate_grid_stations,
    load_topology_csv,
    save_topology_csv,
)

DEFAULTS = {
    "topology.file": "",  # empty: synthesize a perturbed-grid layout
    "topology.stations": "121",
    "topology.jitter_km": "0.8",
    "region.width_km": "30",
    "region.height_km": "30",
    "window.width_km": "20",
    "window.height_km": "20",
    "mobiles.density": "20",  # mobiles per km^2
    "prop.alpha_min": "2.3",
    "prop.alpha_max": "4.7",
    "prop.sigma_min_db": "6.1",
    "prop.sigma_max_db": "12.6",
    "prop.m_min": "1",
    "prop.m_max": "2",
    "prop.mu_per_km": "40",
    "prop.d0_km": "0.004",
    "beam.sectors": "24",
    "beam.sector_sidelobe": "0.01",
    "beam.mobile_beamwidth_rad": repr(0.1 * math.pi),
    "beam.mobile_sidelobe": "0.1",
    "hop.channels": "100",
    "hop.block": "10",
    "hop.slot_ms": "0.5",
    "hop.activity": "1",
    "hop.speed_km_s": "299800",
    "link.snr_db": "30",
    "link.beta_db": "3",
    "link.d_r0_km": "0.1",
    "link.shannon_loss": "0.794",
    "link.m0_mode": "round",
    "sweep.cm_grid": "0.01,0.02,0.05,0.1,0.2,0.5,1",
    "sweep.trials": "1000",
    "sweep.shadowing": "both",
    "sweep.hopping": "both",
    "sweep.fading": "distance",
    "sweep.max_interferers": "30",
    "seed": "1",
}


class ConfigError(Exception):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = val
    return values


def load_settings(
    config_path: Optional[str], overrides: dict[str, str]
) -> dict[str, str]:
    settings = dict(DEFAULTS)
    if config_path:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        settings.update(parse_config_text(text, source=config_path))
    for key, val in overrides.items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        settings[key] = val
    return settings


def _f(settings, key) -> float:
    try:
        return float(settings[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {settings[key]!r}") from exc


def _i(settings, key) -> int:
    try:
        return int(settings[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {settings[key]!r}") from exc


def _floats(settings, key) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in settings[key].split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: not a comma-separated number list") from exc


def _rects(settings) -> tuple[Rect, Rect]:
    rw, rh = _f(settings, "region.width_km"), _f(settings, "region.height_km")
    ww, wh = _f(settings, "window.width_km"), _f(settings, "window.height_km")
    region = Rect(0.0, 0.0, rw, rh)
    window = Rect((rw - ww) / 2, (rh - wh) / 2, (rw + ww) / 2, (rh + wh) / 2)
    return region, window


def build_topology(settings: dict[str, str]) -> NetworkTopology:
    region, window = _rects(settings)
    zeta = _i(settings, "beam.sectors")
    path = settings["topology.file"]
    if path:
        try:
            return load_topology_csv(path, region, window, zeta)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"topology file {path}: {exc}") from exc
    rng = np.random.default_rng(np.random.SeedSequence(_i(settings, "seed"), spawn_key=(999,)))
    stations = generate_grid_stations(
        _i(settings, "topology.stations"), region, _f(settings, "topology.jitter_km"), rng
    )
    return NetworkTopology.from_stations(stations, zeta, region, window)


def build_experiment_config(settings: dict[str, str]) -> ExperimentConfig:
    topo = build_topology(settings)
    try:
        return ExperimentConfig(
            topology=topo,
            prop=PropagationParams(
                alpha_min=_f(settings, "prop.alpha_min"),
                alpha_max=_f(settings, "prop.alpha_max"),
                sigma_min_db=_f(settings, "prop.sigma_min_db"),
                sigma_max_db=_f(settings, "prop.sigma_max_db"),
                m_min=_f(settings, "prop.m_min"),
                m_max=_f(settings, "prop.m_max"),
                mu_per_km=_f(settings, "prop.mu_per_km"),
                d0_km=_f(settings, "prop.d0_km"),
            ),
            beam=BeamParams(
                zeta=_i(settings, "beam.sectors"),
                sector_sidelobe=_f(settings, "beam.sector_sidelobe"),
                mobile_beamwidth=_f(settings, "beam.mobile_beamwidth_rad"),
                mobile_sidelobe=_f(settings, "beam.mobile_sidelobe"),
            ),
            hopping=HoppingConfig(
                channels=_i(settings, "hop.channels"),
                block=_i(settings, "hop.block"),
                slot_s=_f(settings, "hop.slot_ms") * 1e-3,
                activity=_f(settings, "hop.activity"),
                speed_km_s=_f(settings, "hop.speed_km_s"),
            ),
            snr_db=_f(settings, "link.snr_db"),
            beta_db=_floats(settings, "link.beta_db"),
            d_r0_km=_f(settings, "link.d_r0_km"),
            cm_grid=_floats(settings, "sweep.cm_grid"),
            density_per_km2=_f(settings, "mobiles.density"),
            shannon_loss=_f(settings, "link.shannon_loss"),
            n_trials=_i(settings, "sweep.trials"),
            shadowing=settings["sweep.shadowing"],
            hopping_mode=settings["sweep.hopping"],
            fading=settings["sweep.fading"],
            m0_mode=settings["link.m0_mode"],
            max_interferers=_i(settings, "sweep.max_interferers"),
            seed=_i(settings, "seed"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _collect_overrides(args) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "trials", None) is not None:
        overrides["sweep.trials"] = str(args.trials)
    return overrides


def _write_rows(rows: list[dict], fieldnames: list[str], out: Path, fmt: str) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        out.write_text(json.dumps(rows, indent=2) + "\n")
        return
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt_value(v) for k, v in row.items()})


def _fmt_value(v):
    if isinstance(v, float):
        return repr(v)
    return v


SWEEP_FIELDS = [
    "cm_ratio",
    "d_r_km",
    "beta_db",
    "shadowing",
    "hopping",
    "fading_model",
    "avg_outage",
    "std_outage",
    "rate_bpcu",
    "ase_bpcu_per_km2",
    "n_trials",
    "seed",
]


def cmd_sweep(args) -> int:
    settings = load_settings(args.config, _collect_overrides(args))
    cfg = build_experiment_config(settings)
    rows = run_sweep(cfg, workers=args.workers)
    dicts = [_row_dict(r) for r in rows]
    ext = "json" if args.format == "json" else "csv"
    out = Path(args.out) / f"sweep.{ext}"
    _write_rows(dicts, SWEEP_FIELDS, out, args.format)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _row_dict(row: SweepRow) -> dict:
    return {name: getattr(row, name) for name in SWEEP_FIELDS}


def cmd_validate(args) -> int:
    if args.draws < 10_000:
        print("validate: need at least 10000 draws", file=sys.stderr)
        return 2
    if args.cases < 1:
        print("validate: need at least one case", file=sys.stderr)
        return 2
    rng = np.random.default_rng(args.seed)
    results = run_validation(args.cases, args.draws, rng)
    failures = 0
    print(f"{'case':>4} {'interferers':>11} {'closed_form':>13} {'oracle':>13} "
          f"{'stderr':>10} verdict")
    for i, res in enumerate(results):
        verdict = "pass" if res.ok else "FAIL"
        failures += 0 if res.ok else 1
        print(
            f"{i:>4} {res.n_interferers:>11} {res.closed_form:>13.6e} "
            f"{res.estimate.probability:>13.6e} {res.estimate.stderr:>10.2e} {verdict}"
        )
    allowance = 2  # expected 4-sigma boundary misses over this many cases
    print(f"{failures} of {args.cases} outside 4 standard errors (allowance {allowance})")
    return 0 if failures <= allowance else 1


def cmd_rate_curve(args) -> int:
    settings = load_settings(args.config, _collect_overrides(args))
    cfg = build_experiment_config(settings)
    if args.uplinks < 1:
        print("rate-curve: need at least one uplink", file=sys.stderr)
        return 2
    rates = tuple(float(tok) for tok in args.rates.split(",") if tok.strip())
    if not rates or any(r <= 0 for r in rates):
        print("rate-curve: rates must be positive", file=sys.stderr)
        return 2
    curves, avg = sample_rate_curve(cfg, args.cm, args.uplinks, rates)
    rows = []
    for u in range(len(curves)):
        for r, e in zip(rates, curves[u]):
            rows.append({"uplink_id": str(u), "rate_bpcu": r, "outage": float(e)})
    for r, e in zip(rates, avg):
        rows.append({"uplink_id": "avg", "rate_bpcu": r, "outage": float(e)})
    ext = "json" if args.format == "json" else "csv"
    out = Path(args.out) / f"rate_curve.{ext}"
    _write_rows(rows, ["uplink_id", "rate_bpcu", "outage"], out, args.format)
    print(f"wrote {len(curves)} uplink curves plus average to {out}")
    return 0


def cmd_gen_topology(args) -> int:
    if args.stations < 1:
        print("gen-topology: need at least one station", file=sys.stderr)
        return 2
    region = Rect(0.0, 0.0, args.width_km, args.height_km)
    rng = np.random.default_rng(args.seed)
    stations = generate_grid_stations(args.stations, region, args.jitter_km, rng)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_topology_csv(out, stations)
    print(f"wrote {len(stations)} stations to {out}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration file (key = value lines)")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uplinksim",
        description="Frequency-hopping mmWave cellular uplink outage simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="densification sweep, one CSV row per grid/flag combo")
    _add_common(p)
    p.add_argument("--trials", type=int, help="trials per grid point")
    p.add_argument("--workers", type=int, help=f"parallel workers (default ${THREADS_ENV})")

    p = sub.add_parser("validate", help="closed form vs Monte Carlo oracle on random profiles")
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("rate-curve", help="outage vs code rate for random uplinks")
    _add_common(p)
    p.add_argument("--uplinks", type=int, default=8)
    p.add_argument("--cm", type=float, default=0.1, help="C/M ratio of the realization")
    p.add_argument(
        "--rates",
        default=",".join(repr(0.2 * k) for k in range(1, 21)),
        help="comma-separated code-rate grid in bpcu",
    )

    p = sub.add_parser("gen-topology", help="write a synthetic perturbed-grid station table")
    p.add_argument("--stations", type=int, default=121)
    p.add_argument("--width-km", type=float, default=30.0)
    p.add_argument("--height-km", type=float, default=30.0)
    p.add_argument("--jitter-km", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="topology.csv")

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    handlers = {
        "sweep": cmd_sweep,
        "validate": cmd_validate,
        "rate-curve": cmd_rate_curve,
        "gen-topology": cmd_gen_topology,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"uplinksim: config error: {exc}", file=sys.stderr)
        return 2
    except PlacementInfeasibleError as exc:
        print(f"uplinksim: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
