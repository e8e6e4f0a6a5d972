"""Command-line front end.

Four commands, all driven by one TOML file:

  state    build the target state and the frustration-free parent, report
           ground energy, gap, and residual; thermal models additionally
           check the reduced state against the Gibbs ensemble
  sweep    run the sequential preparation over a list of durations and
           tabulate error against the closed-form bound (CSV + JSON)
  cluster  build the truncated cluster parent with its certificate and,
           when [cluster] gives a duration, run the temperature ramp
  mcmc     spectral cross-check of the Metropolis generator against its
           symmetrized quantum form

Exit codes: 0 success, 2 bad configuration, 3 numerical failure (NaN or
infinity where a finite number belongs, or a solver giving up), 4
certification refused.  Outputs are deterministic byte-for-byte for a
fixed config file: JSON keys are sorted and floats carry 17 significant
digits.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .cluster import CertificationError, high_temp_prepare, truncated_parent
from .config import (Config, ConfigError, build_ising, build_lattice,
                     build_model, build_path, load_config)
from .evolve import error_vs_runtime_sweep
from .linop import GlobalOperator
from .model import (DensityMatrix, metropolis_generator, mc_hamiltonian,
                    system_hamiltonian, target_state, trace_ancillas,
                    trace_distance)
from .parent import parent_hamiltonian, spectral_report

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CERTIFICATION = 4


def _fmt(value: float) -> float:
    return float(value)


def _require_finite(pairs: dict[str, float]) -> None:
    for name, value in pairs.items():
        if not math.isfinite(value):
            raise FloatingPointError(f"{name} is {value}")


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _amplitudes_json(amps: np.ndarray) -> dict[str, Any]:
    flat = np.asarray(amps).reshape(-1)
    inter = np.empty(2 * flat.size)
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    return {"layout": "interleaved-re-im", "values": inter.tolist()}


def _meta(cfg: Config, args: argparse.Namespace) -> dict[str, Any]:
    return {
        "version": __version__,
        "config": str(cfg.path),
        "config_sha256": cfg.sha256,
        "seed": args.seed,
        "threads": args.threads,
    }


# ---------------------------------------------------------------------------
# commands


def _cmd_state(cfg: Config, args: argparse.Namespace, out: Path) -> int:
    model = build_model(cfg)
    lat = model.lattice
    target = target_state(model)
    parent = parent_hamiltonian(model.q_ops, lat)
    report = spectral_report(parent, reference=target)
    payload: dict[str, Any] = {
        "meta": _meta(cfg, args),
        "lattice": {"vertices": list(lat.vertices), "local_dim": lat.local_dim,
                    "n_pairs": len(lat.pairs)},
        "parent": {
            "ground_energy": _fmt(report.ground_energy),
            "gap": _fmt(report.gap),
            "ff_residual": _fmt(report.ff_residual),
            "degenerate": report.degenerate,
        },
        "state": _amplitudes_json(target.amplitudes),
    }
    if model.mode == "thermal" and lat.ancillas:
        reduced = trace_ancillas(target, lat)
        h_sys = system_hamiltonian(lat, model.h_ops)
        w, v = np.linalg.eigh(h_sys)
        boltz = np.exp(-model.beta * (w - w[0]))
        gibbs = (v * (boltz / boltz.sum())) @ v.conj().T
        td = trace_distance(reduced, DensityMatrix(matrix=gibbs))
        payload["gibbs_check"] = {"beta_effective": _fmt(model.beta),
                                  "trace_distance": _fmt(td)}
        _require_finite({"trace_distance": td})
    _require_finite({"ground_energy": report.ground_energy, "gap": report.gap,
                     "ff_residual": report.ff_residual})
    _write_json(out / "state.json", payload)
    if args.verbose:
        print(f"gap {report.gap:.6g}, residual {report.ff_residual:.3e}")
    if report.degenerate:
        print("certification refused: parent gap is degenerate", file=sys.stderr)
        return EXIT_CERTIFICATION
    return EXIT_OK


def _cmd_sweep(cfg: Config, args: argparse.Namespace, out: Path) -> int:
    path = build_path(cfg)
    run = cfg.raw.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError("[run] must be a table")
    taus = run.get("taus")
    if taus is None and "tau" in run:
        taus = [run["tau"]]
    if (not isinstance(taus, list) or not taus
            or not all(isinstance(t, (int, float)) and not isinstance(t, bool)
                       for t in taus)):
        raise ConfigError("[run] needs 'taus' (array of durations) or 'tau'")
    steps = run.get("steps")
    if steps is not None and (not isinstance(steps, int) or isinstance(steps, bool)):
        raise ConfigError("[run] steps must be an integer")
    table = error_vs_runtime_sweep(path, [float(t) for t in taus],
                                   steps_per_segment=steps)
    (out / "sweep.csv").write_text(table.to_csv(), encoding="utf-8")
    payload = {
        "meta": _meta(cfg, args),
        "alpha": _fmt(table.alpha),
        "decay_slope": _fmt(table.decay_slope),
        "K_estimate": _fmt(table.K_estimate),
        "c_estimate": _fmt(table.c_estimate),
        "rows": [
            {"tau": _fmt(r.tau), "error": _fmt(r.error),
             "bound_estimate": _fmt(r.bound_estimate), "min_gap": _fmt(r.min_gap),
             "norm_drift": _fmt(r.norm_drift), "certified": r.certified,
             "reliable": r.reliable}
            for r in table.rows
        ],
    }
    _write_json(out / "sweep.json", payload)
    for r in table.rows:
        _require_finite({"error": r.error, "min_gap": r.min_gap,
                         "norm_drift": r.norm_drift})
    if args.verbose:
        for r in table.rows:
            print(f"tau {r.tau:g}: error {r.error:.3e} (bound {r.bound_estimate:.3e})")
    if not all(r.certified for r in table.rows):
        print("certification refused: gap degenerate along the path", file=sys.stderr)
        return EXIT_CERTIFICATION
    return EXIT_OK


def _cmd_cluster(cfg: Config, args: argparse.Namespace, out: Path) -> int:
    lat = build_lattice(cfg)
    from .config import build_terms
    h_ops = build_terms(cfg, lat)
    sec = cfg.raw.get("cluster")
    if not isinstance(sec, dict):
        raise ConfigError("missing [cluster] section")
    beta = sec.get("beta")
    r = sec.get("r")
    if not isinstance(beta, (int, float)) or isinstance(beta, bool):
        raise ConfigError("[cluster] beta must be a number")
    if not isinstance(r, int) or isinstance(r, bool):
        raise ConfigError("[cluster] r must be an integer")
    measure = bool(sec.get("measure", True))
    op, cert = truncated_parent(float(beta), r, lat, h_ops, measure=measure)
    payload: dict[str, Any] = {
        "meta": _meta(cfg, args),
        "certificate": {
            "beta": _fmt(cert.beta), "r": cert.r, "eta": _fmt(cert.eta),
            "y": _fmt(cert.y), "bound": _fmt(cert.bound),
            "measured": _fmt(cert.measured), "valid": cert.valid,
            "per_anchor": [_fmt(x) for x in cert.per_anchor],
        },
        "operator_norm": _fmt(op.norm),
    }
    tau = sec.get("tau")
    if tau is not None:
        if not isinstance(tau, (int, float)) or isinstance(tau, bool):
            raise ConfigError("[cluster] tau must be a number")
        steps = sec.get("steps")
        if steps is not None and (not isinstance(steps, int) or isinstance(steps, bool)):
            raise ConfigError("[cluster] steps must be an integer")
        result = high_temp_prepare(
            float(beta), r, float(tau), lat, h_ops, steps=steps,
            alpha=float(sec.get("alpha", 1.0)),
            allow_invalid_certificate=bool(sec.get("allow_invalid", False)))
        payload["preparation"] = result.to_json()
        _require_finite({"fidelity": result.fidelity,
                         "norm_drift": result.norm_drift})
    _write_json(out / "cluster.json", payload)
    if args.verbose:
        print(f"eta {cert.eta:.4f}, y {cert.y:.4f}, valid {cert.valid}")
    return EXIT_OK


def _cmd_mcmc(cfg: Config, args: argparse.Namespace, out: Path) -> int:
    model, beta = build_ising(cfg)
    gen = metropolis_generator(model, beta)
    ham = mc_hamiltonian(gen)
    w_gen = np.sort(np.linalg.eigvals(gen.matrix).real)
    w_ham = np.sort(np.linalg.eigvalsh(ham.matrix))
    spectra_dev = float(np.abs(np.sort(-w_gen) - w_ham).max())
    wv, vv = np.linalg.eigh(ham.matrix)
    ground = vv[:, 0]
    expected = np.exp(-0.5 * gen.beta * (gen.energies - gen.energies.min()))
    expected = expected / np.linalg.norm(expected)
    fidelity = float(abs(np.vdot(expected, ground)))
    pi = np.exp(-gen.beta * (gen.energies - gen.energies.min()))
    pi = pi / pi.sum()
    stationarity = float(np.abs(gen.matrix @ pi).max())
    payload = {
        "meta": _meta(cfg, args),
        "beta": _fmt(gen.beta),
        "dim": int(gen.energies.size),
        "spectra_deviation": _fmt(spectra_dev),
        "ground_energy": _fmt(float(wv[0])),
        "ground_fidelity": _fmt(fidelity),
        "stationarity_residual": _fmt(stationarity),
    }
    _require_finite({"spectra_deviation": spectra_dev, "fidelity": fidelity,
                     "stationarity": stationarity})
    _write_json(out / "mcmc.json", payload)
    if args.verbose:
        print(f"spectra deviation {spectra_dev:.3e}, fidelity {fidelity:.12f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiaprep",
        description="adiabatic preparation of paired thermal states: "
                    "targets, parents, sweeps, cluster certificates")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("state", "target state and parent spectral report"),
        ("sweep", "error versus runtime for the sequential preparation"),
        ("cluster", "truncated cluster parent and temperature ramp"),
        ("mcmc", "Metropolis generator spectral cross-check"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0,
                       help="recorded in outputs; runs are deterministic")
        p.add_argument("--threads", type=int, default=1,
                       help="recorded in outputs; execution is serial")
        p.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"state": _cmd_state, "sweep": _cmd_sweep,
                "cluster": _cmd_cluster, "mcmc": _cmd_mcmc}
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return handlers[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"certification refused: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
