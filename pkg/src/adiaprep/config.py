"""TOML run configuration: parsing, validation, and object construction.

A configuration file has a [lattice] section plus whichever of [model],
[schedule], [path], [run], [cluster], [mcmc] the chosen command needs.
Interaction terms are given either as Pauli strings (qubits only) or as
explicit matrices with [re, im] entries.  Every builder raises ConfigError
with the offending key in the message; nothing is silently defaulted
except where a default is documented here.
"""
from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .lattice import Lattice, build_chain, build_grid
from .linop import LocalOperator
from .model import ClassicalIsing, ModelSpec
from .parent import PathSpec
from .schedule import (Schedule, gevrey_schedule, linear_schedule,
                       schedule_from_csv, schedule_from_table)

__all__ = [
    "ConfigError",
    "Config",
    "load_config",
    "build_lattice",
    "build_terms",
    "build_model",
    "build_schedule",
    "build_path",
    "build_ising",
    "pauli_matrix",
]


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class Config:
    path: Path
    raw: dict
    sha256: str


def load_config(path: str | Path) -> Config:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from exc
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    return Config(path=p, raw=raw, sha256=hashlib.sha256(data).hexdigest())


def _section(cfg: Config, name: str) -> dict:
    sec = cfg.raw.get(name)
    if sec is None:
        raise ConfigError(f"missing [{name}] section in {cfg.path}")
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _get(sec: dict, secname: str, key: str, kind: type, default: Any = ...) -> Any:
    if key not in sec:
        if default is ...:
            raise ConfigError(f"missing key '{key}' in [{secname}]")
        return default
    value = sec[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"[{secname}] {key} must be {kind.__name__}, "
                          f"got {type(value).__name__}")
    return value


# ---------------------------------------------------------------------------
# lattice / terms / model


def build_lattice(cfg: Config) -> Lattice:
    sec = _section(cfg, "lattice")
    kind = _get(sec, "lattice", "kind", str)
    local_dim = _get(sec, "lattice", "local_dim", int, 2)
    if kind == "chain":
        n_sites = _get(sec, "lattice", "n_sites", int)
        thermal = _get(sec, "lattice", "thermal", bool, True)
        return build_chain(n_sites, local_dim, thermal=thermal)
    if kind == "grid":
        nx = _get(sec, "lattice", "nx", int)
        ny = _get(sec, "lattice", "ny", int)
        return build_grid(nx, ny, local_dim)
    raise ConfigError(f"unknown lattice kind '{kind}' (chain or grid)")


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(word: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. "ZZ" or "XI"."""
    if not word:
        raise ConfigError("empty Pauli string")
    out = np.array([[1.0 + 0j]])
    for ch in word:
        if ch not in _PAULI:
            raise ConfigError(f"unknown Pauli letter '{ch}' in '{word}'")
        out = np.kron(out, _PAULI[ch])
    return out


def _parse_entry(value: Any, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: matrix entries must be numbers or [re, im] pairs")


def _parse_matrix(rows: Any, where: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise ConfigError(f"{where}: matrix must be a non-empty list of rows")
    mat = np.array([[_parse_entry(v, where) for v in row] for row in rows])
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"{where}: matrix must be square, got shape {mat.shape}")
    return mat


def build_terms(cfg: Config, lat: Lattice) -> list[LocalOperator]:
    sec = _section(cfg, "model")
    raw_terms = sec.get("terms")
    if not isinstance(raw_terms, list) or not raw_terms:
        raise ConfigError("[model] needs a non-empty 'terms' array of tables")
    if len(raw_terms) != len(lat.supports):
        raise ConfigError(f"[model] has {len(raw_terms)} terms but the lattice "
                          f"defines {len(lat.supports)} supports")
    out = []
    for i, (entry, sup) in enumerate(zip(raw_terms, lat.supports)):
        where = f"[model] terms[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} must be a table")
        support = entry.get("support")
        if support is not None:
            if tuple(support) != tuple(sup):
                raise ConfigError(f"{where} support {support} does not match "
                                  f"lattice support {list(sup)}")
        weight = entry.get("weight", 1.0)
        if not isinstance(weight, (int, float)) or isinstance(weight, bool):
            raise ConfigError(f"{where}: weight must be a number")
        if "pauli" in entry:
            word = entry["pauli"]
            if lat.local_dim != 2:
                raise ConfigError(f"{where}: Pauli terms need local_dim = 2")
            if not isinstance(word, str) or len(word) != len(sup):
                raise ConfigError(f"{where}: Pauli string must have "
                                  f"{len(sup)} letters")
            mat = pauli_matrix(word)
        elif "matrix" in entry:
            mat = _parse_matrix(entry["matrix"], where)
            want = lat.local_dim ** len(sup)
            if mat.shape[0] != want:
                raise ConfigError(f"{where}: matrix must be {want}x{want} for "
                                  f"support {list(sup)}")
        else:
            raise ConfigError(f"{where} needs either 'pauli' or 'matrix'")
        out.append(LocalOperator(support=tuple(sup), matrix=float(weight) * mat))
    return out


def build_model(cfg: Config, lat: Lattice | None = None) -> ModelSpec:
    lat = lat if lat is not None else build_lattice(cfg)
    sec = _section(cfg, "model")
    mode = _get(sec, "model", "mode", str, "thermal")
    terms = build_terms(cfg, lat)
    if mode == "thermal":
        beta = _get(sec, "model", "beta", float)
        try:
            return ModelSpec.thermal(lat, terms, beta)
        except ValueError as exc:
            raise ConfigError(f"[model]: {exc}") from exc
    if mode == "generic":
        try:
            return ModelSpec.generic(lat, terms)
        except ValueError as exc:
            raise ConfigError(f"[model]: {exc}") from exc
    raise ConfigError(f"unknown model mode '{mode}' (thermal or generic)")


# ---------------------------------------------------------------------------
# schedule / path


def build_schedule(cfg: Config) -> Schedule:
    sec = cfg.raw.get("schedule")
    if sec is None:
        return gevrey_schedule()
    if not isinstance(sec, dict):
        raise ConfigError("[schedule] must be a table")
    kind = _get(sec, "schedule", "kind", str, "gevrey")
    try:
        if kind == "gevrey":
            return gevrey_schedule(_get(sec, "schedule", "alpha", float, 1.0))
        if kind == "linear":
            return linear_schedule()
        if kind == "table":
            if "csv" in sec:
                return schedule_from_csv(_get(sec, "schedule", "csv", str))
            ss = sec.get("s")
            ff = sec.get("f")
            if not isinstance(ss, list) or not isinstance(ff, list):
                raise ConfigError("[schedule] table kind needs 's' and 'f' "
                                  "arrays or a 'csv' path")
            return schedule_from_table(ss, ff)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"[schedule]: {exc}") from exc
    raise ConfigError(f"unknown schedule kind '{kind}'")


def build_path(cfg: Config, model: ModelSpec | None = None) -> PathSpec:
    model = model if model is not None else build_model(cfg)
    schedule = build_schedule(cfg)
    sec = cfg.raw.get("path", {})
    if not isinstance(sec, dict):
        raise ConfigError("[path] must be a table")
    interpolation = _get(sec, "path", "interpolation", str, "linear")
    radius = sec.get("radius")
    if radius is not None and (not isinstance(radius, (int, float))
                               or isinstance(radius, bool)):
        raise ConfigError("[path] radius must be a number")
    ordering = sec.get("ordering", [])
    if not isinstance(ordering, list) or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in ordering):
        raise ConfigError("[path] ordering must be an array of integers")
    try:
        return PathSpec(model=model, ordering=tuple(ordering), schedule=schedule,
                        interpolation=interpolation,
                        localization_radius=None if radius is None else float(radius))
    except ValueError as exc:
        raise ConfigError(f"[path]: {exc}") from exc


# ---------------------------------------------------------------------------
# mcmc


def build_ising(cfg: Config) -> tuple[ClassicalIsing | np.ndarray, float]:
    """Returns (model-or-energies, beta) from the [mcmc] section."""
    sec = _section(cfg, "mcmc")
    beta = _get(sec, "mcmc", "beta", float)
    if "energies" in sec:
        energies = sec["energies"]
        if not isinstance(energies, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool)
                for x in energies):
            raise ConfigError("[mcmc] energies must be an array of numbers")
        return np.array(energies, dtype=float), beta
    n_spins = _get(sec, "mcmc", "n_spins", int)
    couplings = sec.get("couplings", [])
    fields = sec.get("fields", [])
    coup = []
    for k, row in enumerate(couplings):
        if (not isinstance(row, list) or len(row) != 3
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in row)):
            raise ConfigError(f"[mcmc] couplings[{k}] must be [i, j, J]")
        coup.append((int(row[0]), int(row[1]), float(row[2])))
    fl = []
    if fields and isinstance(fields[0], list):
        for k, row in enumerate(fields):
            if len(row) != 2:
                raise ConfigError(f"[mcmc] fields[{k}] must be [i, h]")
            fl.append((int(row[0]), float(row[1])))
    else:
        fl = [(i, float(h)) for i, h in enumerate(fields)]
    try:
        model = ClassicalIsing(n_spins=n_spins, couplings=tuple(coup),
                               fields=tuple(fl))
        model.energies()
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"[mcmc]: {exc}") from exc
    return model, beta
