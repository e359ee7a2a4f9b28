"""Run configuration: a TOML document with sections [grid], [model],
[evolution], [audits] and [output].

Every key is optional; :func:`parse_config` fills defaults and validates.
Errors carry the line and column of the offending key.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

import tomli

from . import model, spectral
from .errors import CQNLSError, ConfigError
from .evolution import SOLVERS, SimConfig

SCHEMA = {
    "grid": {"d": int, "m": int, "L": float},
    "model": {"beta": float, "alpha1": float, "alpha3": float, "alpha5": float},
    "evolution": {
        "eps": float,
        "sigma": float,
        "dt": float,
        "t_end": float,
        "cadence": float,
        "solver": str,
        "zero_mode": str,
        "dealias": bool,
        "linear": bool,
        "blowup_threshold": float,
        "max_dt": float,
        "dyadic_snapshots": bool,
        "checkpoint_every": float,
    },
    "audits": {
        "phases": list,
        "dyads": list,
        "thresholds": str,
        "sep": float,
        "narrow": float,
        "mixed_region_C": float,
        "samples": int,
        "dispersive_N": list,
        "dispersive_tmax": float,
        "dispersive_nt": int,
    },
    "output": {"dir": str, "seed": int, "plot": bool, "formats": list},
}


@dataclass
class AuditConfig:
    phases: list = field(default_factory=lambda: ["conj2", "plain2", "mixed"])
    dyads: list = field(default_factory=lambda: [0.125, 0.5, 2.0, 8.0])
    thresholds: str = "strict"
    sep: float | None = None
    narrow: float | None = None
    mixed_region_C: float | None = None
    samples: int = 100_000
    dispersive_N: list = field(default_factory=lambda: [1.0, 0.125])
    dispersive_tmax: float = 1000.0
    dispersive_nt: int = 16


@dataclass
class OutputConfig:
    dir: str = "cqnls-out"
    seed: int = 0
    plot: bool = False
    formats: list = field(default_factory=lambda: ["csv", "jsonl"])


@dataclass
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    audits: AuditConfig = field(default_factory=AuditConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    raw_model: dict | None = None

    def as_dict(self):
        sim = dataclasses.asdict(self.sim)
        ev = {k: sim[k] for k in SCHEMA["evolution"] if k in sim}
        mdl = {"beta": self.sim.beta}
        if self.raw_model:
            mdl.update(self.raw_model)
        return {
            "grid": {"d": self.sim.d, "m": self.sim.m, "L": self.sim.L},
            "model": mdl,
            "evolution": ev,
            "audits": dataclasses.asdict(self.audits),
            "output": dataclasses.asdict(self.output),
        }


def _locate(text, section, key=None):
    """(line, column) of ``key`` inside ``[section]``, or of the section header."""
    current = None
    sec_pos = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if m:
            current = m.group(1)
            if current == section and sec_pos is None:
                sec_pos = (i, m.start(1) + 1)
            continue
        if key is not None and current == section:
            m = re.match(r"\s*(\"?)([A-Za-z0-9_-]+)\1\s*=", line)
            if m and m.group(2) == key:
                return i, m.start(2) + 1
    return sec_pos or (None, None)


def _check_type(value, expected):
    if expected is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, expected)


def _decode_error_location(exc):
    m = re.search(r"line (\d+), column (\d+)", str(exc))
    if m:
        return int(m.group(1)), int(m.group(2))
    return None, None


def parse_config(text):
    """Parse and validate a configuration document; returns a :class:`RunConfig`."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line, col = _decode_error_location(exc)
        raise ConfigError(f"malformed document: {exc}", line, col, kind="ParseError") from None

    def err(msg, section, key=None, kind="ConfigError"):
        line, col = _locate(text, section, key)
        return ConfigError(msg, line, col, kind=kind)

    for section, body in doc.items():
        if section not in SCHEMA:
            raise err(f"unknown section [{section}]", section, kind="UnknownKey")
        if not isinstance(body, dict):
            raise err(f"[{section}] must be a table", section, kind="TypeMismatch")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise err(f"unknown key {section}.{key}", section, key, kind="UnknownKey")
            expected = SCHEMA[section][key]
            if not _check_type(value, expected):
                raise err(
                    f"{section}.{key} must be {expected.__name__}, got {type(value).__name__}",
                    section,
                    key,
                    kind="TypeMismatch",
                )

    g = doc.get("grid", {})
    mdl = doc.get("model", {})
    ev = doc.get("evolution", {})
    au = doc.get("audits", {})
    out = doc.get("output", {})

    sim_kwargs = {}
    for k in ("d", "m", "L"):
        if k in g:
            sim_kwargs[k] = float(g[k]) if k == "L" else g[k]
    m = sim_kwargs.get("m", SimConfig.m)
    if m < 2 or m & (m - 1):
        raise err(f"grid.m = {m} is not a power of two", "grid", "m", kind="NonPowerOfTwo")
    d = sim_kwargs.get("d", SimConfig.d)
    if d not in (1, 2, 3):
        raise err(f"grid.d = {d} must be 1, 2 or 3", "grid", "d", kind="ConstraintViolation")
    if sim_kwargs.get("L", 1.0) <= 0:
        raise err("grid.L must be positive", "grid", "L", kind="ConstraintViolation")
    if m**d > spectral.MAX_POINTS:
        raise err(f"grid of {m}^{d} points exceeds the limit", "grid", "m", kind="GridTooLarge")

    raw = None
    if any(k in mdl for k in ("alpha1", "alpha3", "alpha5")):
        if "beta" in mdl:
            raise err("give either model.beta or the alpha coefficients, not both", "model", "beta", kind="ConstraintViolation")
        missing = [k for k in ("alpha1", "alpha3", "alpha5") if k not in mdl]
        if missing:
            raise err(f"missing model coefficients {missing}", "model", kind="ConstraintViolation")
        raw = {k: float(mdl[k]) for k in ("alpha1", "alpha3", "alpha5")}
        try:
            sim_kwargs["beta"] = model.normalize(model.RawParams(**raw)).beta
        except CQNLSError as exc:
            raise err(str(exc), "model", "alpha1", kind=exc.code) from None
    elif "beta" in mdl:
        sim_kwargs["beta"] = float(mdl["beta"])

    for k, v in ev.items():
        sim_kwargs[k] = float(v) if SCHEMA["evolution"][k] is float else v
    sim = SimConfig(**sim_kwargs)
    if sim.solver not in SOLVERS:
        raise err(f"evolution.solver must be one of {SOLVERS}", "evolution", "solver", kind="ConstraintViolation")
    if sim.zero_mode not in ("track", "project"):
        raise err("evolution.zero_mode must be 'track' or 'project'", "evolution", "zero_mode", kind="ConstraintViolation")
    try:
        sim.validate()
    except ValueError as exc:
        key = next((k for k in ("dt", "t_end", "cadence", "checkpoint_every") if k in str(exc)), None)
        raise err(str(exc), "evolution", key, kind="ConstraintViolation") from None

    audits = AuditConfig(**{k: v for k, v in au.items()})
    for ph in audits.phases:
        if ph not in ("conj2", "plain2", "mixed"):
            raise err(f"unknown phase {ph!r}", "audits", "phases", kind="ConstraintViolation")
    for N in list(audits.dyads) + list(audits.dispersive_N):
        if not isinstance(N, (int, float)) or not spectral.is_dyadic(float(N)):
            key = "dyads" if N in audits.dyads else "dispersive_N"
            raise err(f"{N} is not a power of two", "audits", key, kind="DyadicOutOfRange")
    if audits.thresholds not in ("strict", "desk"):
        raise err("audits.thresholds must be 'strict' or 'desk'", "audits", "thresholds", kind="ConstraintViolation")
    if audits.samples <= 0:
        raise err("audits.samples must be positive", "audits", "samples", kind="ConstraintViolation")
    if audits.mixed_region_C is not None and not spectral.is_dyadic(audits.mixed_region_C):
        raise err("audits.mixed_region_C must be a power of two", "audits", "mixed_region_C", kind="DyadicOutOfRange")
    audits.dyads = [float(x) for x in audits.dyads]
    audits.dispersive_N = [float(x) for x in audits.dispersive_N]

    output = OutputConfig(**out)
    if not math.isfinite(output.seed) or output.seed < 0:
        raise err("output.seed must be nonnegative", "output", "seed", kind="ConstraintViolation")
    return RunConfig(sim=sim, audits=audits, output=output, raw_model=raw)


def load_config(path):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"configuration is not UTF-8: {exc}", kind="ParseError") from None
    return parse_config(text)


def thresholds_of(audits):
    """The resonance Thresholds selected by an AuditConfig."""
    from . import resonance

    base = resonance.STRICT if audits.thresholds == "strict" else resonance.DESK
    return resonance.Thresholds(
        sep=audits.sep if audits.sep is not None else base.sep,
        narrow=audits.narrow if audits.narrow is not None else base.narrow,
    )
