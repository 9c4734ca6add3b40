"""Run configuration: a flat, sectioned INI file.

Example::

    [model]
    a = 1.0

    [mixing]
    family = gamma
    shape = 2.0
    rate = 2.0

    [data]
    y = y.csv
    x = x.csv

    [chain]
    algorithm = da
    iterations = 10000
    burn_in = 1000
    thin = 1
    seed = 12345

    [check]
    zeta = 1.5
    eta = 0.1

    [diagnose]
    max_lag = 20
    functional = beta[0,0]

    [output]
    dir = out
    formats = json, text

Data paths are resolved against the directory holding the config file.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from mixreg.chains import ALGORITHMS

SEED_ENV = "MIXREG_SEED"
FORMATS = ("json", "text")


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class ModelBlock:
    a: float = 1.0


@dataclass(frozen=True)
class DataBlock:
    y: str = "y.csv"
    x: str = "x.csv"


@dataclass(frozen=True)
class ChainBlock:
    algorithm: str = "da"
    iterations: int = 10_000
    burn_in: int = 1_000
    thin: int = 1
    seed: int = 0


@dataclass(frozen=True)
class CheckBlock:
    zeta: float = 1.5
    eta: float = 0.1
    rho: float | None = None
    tau: float | None = None
    search_eta: float | None = None
    grid_points: int = 400
    grid_beta_ses: float = 10.0
    grid_log_sigma_halfwidth: float = 6.0


@dataclass(frozen=True)
class DiagnoseBlock:
    max_lag: int = 20
    functional: str = "beta[0,0]"


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "out"
    formats: tuple = ("json", "text")


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    mixing: dict = field(default_factory=lambda: {"family": "gamma", "shape": 2.0, "rate": 2.0})
    data: DataBlock = field(default_factory=DataBlock)
    chain: ChainBlock = field(default_factory=ChainBlock)
    check: CheckBlock = field(default_factory=CheckBlock)
    diagnose: DiagnoseBlock = field(default_factory=DiagnoseBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    base_dir: str = "."

    # -- parsing / emitting --------------------------------------------------

    @classmethod
    def parse(cls, text: str, base_dir: str | os.PathLike = ".") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        known = {"model", "mixing", "data", "chain", "check", "diagnose", "output"}
        unknown = set(cp.sections()) - known
        if unknown:
            raise ConfigError(f"unknown section(s): {sorted(unknown)}")
        if "mixing" not in cp or "family" not in cp["mixing"]:
            raise ConfigError("[mixing] family is required")
        mixing = {"family": cp["mixing"]["family"].strip()}
        for k, v in cp["mixing"].items():
            if k.endswith("family"):
                mixing[k] = v.strip()
            else:
                mixing[k] = _number(v, f"mixing.{k}")
        blocks = {}
        for name, typ in (("model", ModelBlock), ("data", DataBlock), ("chain", ChainBlock),
                          ("check", CheckBlock), ("diagnose", DiagnoseBlock), ("output", OutputBlock)):
            sect = cp[name] if name in cp else {}
            blocks[name] = _block(typ, dict(sect), name)
        cfg = cls(mixing=mixing, base_dir=str(base_dir), **blocks)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.parse(text, path.parent)

    def emit(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["model"] = _emit_block(self.model)
        cp["mixing"] = {k: _fmt(v) for k, v in self.mixing.items()}
        for name in ("data", "chain", "check", "diagnose", "output"):
            cp[name] = _emit_block(getattr(self, name))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def validate(self):
        if self.chain.algorithm not in ALGORITHMS:
            raise ConfigError(f"chain.algorithm must be one of {ALGORITHMS}")
        if self.chain.thin < 1 or not (0 <= self.chain.burn_in < self.chain.iterations):
            raise ConfigError("need iterations > burn_in >= 0 and thin >= 1")
        if not 0 <= self.chain.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not 1.0 < self.check.zeta < 2.0:
            raise ConfigError("check.zeta must lie in (1, 2)")
        if (self.check.rho is None) != (self.check.tau is None):
            raise ConfigError("check.rho and check.tau must be given together")
        bad = set(self.output.formats) - set(FORMATS)
        if bad or not self.output.formats:
            raise ConfigError(f"output.formats must be a non-empty subset of {FORMATS}")
        # family parameters are validated by constructing the density
        self.mixing_density(d=1)

    # -- derived objects ---------------------------------------------------------

    def mixing_density(self, d: int):
        from mixreg.mixing import from_dict
        try:
            return from_dict(self.mixing, d=d)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"invalid mixing density: {exc}") from exc

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def load_data(self):
        """``(y, X)`` as float arrays, checking shapes."""
        y = read_matrix(self.resolve(self.data.y))
        X = read_matrix(self.resolve(self.data.x))
        if y.shape[0] != X.shape[0]:
            raise DataError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
        return y, X

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        return replace(self, chain=replace(self.chain, seed=int(seed)))

    def semantic_hash(self) -> str:
        """SHA-256 over the fields that change results, including data contents."""
        payload = {
            "model": _emit_block(self.model),
            "mixing": {k: _fmt(v) for k, v in self.mixing.items()},
            "chain": _emit_block(self.chain),
            "check": _emit_block(self.check),
            "data": {k: _file_digest(self.resolve(getattr(self.data, k))) for k in ("y", "x")},
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def effective_seed(cfg: RunConfig, flag: int | None) -> int:
    """Seed precedence: command-line flag, then ``MIXREG_SEED``, then the config."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return cfg.chain.seed


# -- helpers --------------------------------------------------------------------------

def _number(text, where):
    try:
        v = float(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from exc
    return v


def _block(typ, raw: dict, section: str):
    names = {f.name: f for f in fields(typ)}
    unknown = set(raw) - set(names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    kwargs = {}
    for key, text in raw.items():
        default = getattr(typ(), key)
        text = text.strip()
        where = f"{section}.{key}"
        if key == "formats":
            kwargs[key] = tuple(s.strip() for s in text.split(",") if s.strip())
        elif isinstance(default, bool):
            kwargs[key] = text.lower() in ("1", "true", "yes", "on")
        elif isinstance(default, int):
            try:
                kwargs[key] = int(text)
            except ValueError as exc:
                raise ConfigError(f"{where}: expected an integer, got {text!r}") from exc
        elif isinstance(default, float) or (default is None and key in ("rho", "tau", "search_eta")):
            kwargs[key] = None if text == "" else _number(text, where)
        else:
            kwargs[key] = text
    return typ(**kwargs)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(v)
    return str(v)


def _emit_block(block) -> dict:
    return {f.name: _fmt(getattr(block, f.name)) for f in fields(block)}


def _file_digest(path: Path) -> str:
    try:
        return hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError:
        return "missing"


def read_matrix(path) -> np.ndarray:
    """Headerless numeric CSV -> 2-d float array; errors name the row and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = []
    for i, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        vals = []
        for j, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {j}: non-numeric value {cell.strip()!r}") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: row {i}, column {j}: non-finite value {cell.strip()!r}")
            vals.append(v)
        if rows and len(vals) != len(rows[0]):
            raise DataError(f"{path}: row {i} has {len(vals)} columns, expected {len(rows[0])}")
        rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data")
    return np.array(rows, dtype=float)
