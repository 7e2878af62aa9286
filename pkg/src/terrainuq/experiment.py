"""Experiment configuration files.

The format is INI (``configparser``) with these sections::

    [experiment]   output_dir, seed, workers
    [terrain]      file = profile.csv   or   generator = wedge (+ generator keywords)
    [pwe]          PweConfig fields; ground = pec | lossy with eps_r, tan_delta
    [antenna]      nominal AntennaConfig fields
    [input.NAME]   one per uncertain antenna field: alpha, beta, lower, upper, unit
    [uq]           method, n_train, n_mc_reference, n_surrogate_mc, trials,
                   train_levels, methods, standard_order, sparse_order and the
                   ApceConfig fields

Relative paths are resolved against the directory holding the config file.
"""
from __future__ import annotations

import configparser
import hashlib
import inspect
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .apce import ApceConfig
from .errors import ConfigurationError
from .pwe.config import AntennaConfig, GroundModel, PweConfig
from .pwe.terrain import GENERATORS, TerrainProfile
from .stochastic import InputSpace, RandomInputSpec
from .uqstats import ANTENNA_FIELDS, Method

__all__ = ["UqSettings", "ExperimentConfig", "load_config", "parse_config"]


@dataclass(frozen=True)
class UqSettings:
    method: Method = Method.APCE
    n_train: int = 30
    n_mc_reference: int = 10_000
    n_surrogate_mc: int = 100_000
    trials: int = 30
    train_levels: tuple = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    methods: tuple = (Method.STANDARD, Method.SPARSE, Method.APCE)
    standard_order: int = 2
    sparse_order: int = 3
    apce: ApceConfig = field(default_factory=ApceConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    terrain: TerrainProfile
    pwe: PweConfig
    antenna_nominal: AntennaConfig
    input_space: InputSpace
    uq: UqSettings
    output_dir: Path
    seed: int = 0
    workers: int = 1
    source: str = ""

    def digest(self) -> str:
        """Hash of everything that influences results (not output paths or workers)."""
        payload = {
            "terrain": self.terrain.points.tolist(),
            "pwe": repr(self.pwe),
            "antenna": asdict(self.antenna_nominal),
            "space": self.input_space.digest(),
            "uq": repr(self.uq),
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)


class _Reader:
    """Typed access to one configparser section with file/field diagnostics."""

    def __init__(self, parser, section, source):
        self.parser, self.section, self.source = parser, section, source
        self.used = set()

    def has(self, key):
        return self.parser.has_option(self.section, key)

    def _fail(self, key, msg):
        raise ConfigurationError(f"{self.source}: [{self.section}] {key}: {msg}")

    def get(self, key, cast=str, default=...):
        self.used.add(key)
        if not self.has(key):
            if default is ...:
                self._fail(key, "required field is missing")
            return default
        raw = self.parser.get(self.section, key).strip()
        try:
            if cast is bool:
                return self.parser.getboolean(self.section, key)
            if cast is int:
                cast = _to_int
            return cast(raw)
        except ConfigurationError:
            raise
        except (TypeError, ValueError) as exc:
            self._fail(key, f"cannot parse {raw!r} ({exc})")

    def unknown(self):
        return sorted(set(self.parser.options(self.section)) - self.used)

    def reject_unknown(self):
        extra = self.unknown()
        if extra:
            self._fail(", ".join(extra), "unknown field(s)")


def _to_int(raw):
    value = float(raw)
    if not value.is_integer():
        raise ValueError("expected an integer")
    return int(value)


def _int_list(raw):
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _terrain(parser, base, source):
    if not parser.has_section("terrain"):
        raise ConfigurationError(f"{source}: missing [terrain] section")
    r = _Reader(parser, "terrain", source)
    if r.has("file"):
        path = Path(r.get("file"))
        path = path if path.is_absolute() else base / path
        if not path.exists():
            r._fail("file", f"terrain file {path} does not exist")
        r.reject_unknown()
        return TerrainProfile.from_csv(path)
    name = r.get("generator")
    if name not in GENERATORS:
        r._fail("generator", f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    gen = GENERATORS[name]
    kwargs = {}
    params = inspect.signature(gen).parameters
    for key in parser.options("terrain"):
        if key == "generator":
            continue
        if key not in params:
            r._fail(key, f"not a parameter of generator {name!r}")
        default = params[key].default
        if isinstance(default, tuple):
            kwargs[key] = tuple(float(x) for x in r.get(key).replace(",", " ").split())
        elif isinstance(default, int) and not isinstance(default, bool):
            kwargs[key] = r.get(key, int)
        else:
            kwargs[key] = r.get(key, float)
    return gen(**kwargs)


def _pwe(parser, source):
    if not parser.has_section("pwe"):
        return PweConfig()
    r = _Reader(parser, "pwe", source)
    kw = {}
    for f in fields(PweConfig):
        if f.name == "ground":
            continue
        if r.has(f.name):
            kw[f.name] = r.get(f.name, int if f.type in ("int", int) else float)
    kind = r.get("ground", str, "pec").lower()
    if kind == "pec":
        kw["ground"] = GroundModel.pec()
    elif kind in ("lossy", "lossydielectric"):
        kw["ground"] = GroundModel.lossy(r.get("eps_r", float, 4.5), r.get("tan_delta", float, 0.07))
    else:
        r._fail("ground", f"expected 'pec' or 'lossy', got {kind!r}")
    r.reject_unknown()
    return PweConfig(**kw)


def _antenna(parser, source, frequency_hz):
    defaults = {"tx_height_m": 11.0, "rx_height_m": 2.5, "elevation_deg": 0.0, "beamwidth_deg": 8.0,
                "frequency_hz": frequency_hz}
    if parser.has_section("antenna"):
        r = _Reader(parser, "antenna", source)
        for name in ANTENNA_FIELDS:
            defaults[name] = r.get(name, float, defaults[name])
        r.reject_unknown()
    return AntennaConfig(**defaults)


def _space(parser, source):
    specs = []
    for section in parser.sections():
        if not section.startswith("input."):
            continue
        name = section[len("input."):]
        r = _Reader(parser, section, source)
        if name not in ANTENNA_FIELDS:
            raise ConfigurationError(
                f"{source}: [{section}]: {name!r} is not an antenna field ({', '.join(ANTENNA_FIELDS)})")
        dist = r.get("distribution", str, "beta").lower()
        if dist != "beta":
            r._fail("distribution", f"only 'beta' is supported, got {dist!r}")
        specs.append(RandomInputSpec(name, r.get("alpha", float, 3.0), r.get("beta", float, 3.0),
                                     r.get("lower", float), r.get("upper", float), r.get("unit", str, "")))
        r.reject_unknown()
    if not specs:
        raise ConfigurationError(f"{source}: no [input.<name>] sections declare uncertain inputs")
    return InputSpace(specs)


def _uq(parser, source):
    if not parser.has_section("uq"):
        return UqSettings()
    r = _Reader(parser, "uq", source)
    d = UqSettings()
    apce_kw = {}
    for f in fields(ApceConfig):
        if r.has(f.name):
            apce_kw[f.name] = r.get(f.name, int if f.type in ("int", int) else float)
    methods = d.methods
    if r.has("methods"):
        methods = tuple(Method.parse(m) for m in r.get("methods").replace(",", " ").split())
    settings = UqSettings(
        method=Method.parse(r.get("method", str, d.method.value)),
        n_train=r.get("n_train", int, d.n_train),
        n_mc_reference=r.get("n_mc_reference", int, d.n_mc_reference),
        n_surrogate_mc=r.get("n_surrogate_mc", int, d.n_surrogate_mc),
        trials=r.get("trials", int, d.trials),
        train_levels=r.get("train_levels", _int_list, d.train_levels),
        methods=methods,
        standard_order=r.get("standard_order", int, d.standard_order),
        sparse_order=r.get("sparse_order", int, d.sparse_order),
        apce=ApceConfig(**apce_kw),
    )
    r.reject_unknown()
    if settings.trials < 1:
        r._fail("trials", "must be >= 1")
    return settings


def parse_config(text: str, base_dir=".", source="<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    base = Path(base_dir)
    known = {"experiment", "terrain", "pwe", "antenna", "uq"}
    for s in parser.sections():
        if s not in known and not s.startswith("input."):
            raise ConfigurationError(f"{source}: unknown section [{s}]")
    exp = _Reader(parser, "experiment", source) if parser.has_section("experiment") else None
    out = Path(exp.get("output_dir", str, "out")) if exp else Path("out")
    out = out if out.is_absolute() else base / out
    seed = exp.get("seed", int, 0) if exp else 0
    workers = exp.get("workers", int, 0) if exp else 0
    if exp:
        exp.reject_unknown()
    try:
        pwe = _pwe(parser, source)
        return _assemble(parser, base, source, pwe, out, seed, workers)
    except ConfigurationError as exc:
        if str(exc).startswith(source):
            raise
        raise ConfigurationError(f"{source}: {exc}") from exc


def _assemble(parser, base, source, pwe, out, seed, workers):
    return ExperimentConfig(
        terrain=_terrain(parser, base, source),
        pwe=pwe,
        antenna_nominal=_antenna(parser, source, pwe.frequency_hz),
        input_space=_space(parser, source),
        uq=_uq(parser, source),
        output_dir=out,
        seed=seed,
        workers=workers if workers > 0 else (os.cpu_count() or 1),
        source=source,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config ({exc})") from exc
    return parse_config(text, path.parent, str(path))
