"""Run configuration: a flat sectioned key-value file that round-trips exactly."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import asdict, dataclass, field, fields, replace

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(v) for v in text.split(",") if v.strip()) if text else ()


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()


def _fmt_seq(vals) -> str:
    return ",".join(repr(v) for v in vals)


# section of each field in the file
_SECTIONS = {
    "code": "model",
    "channel": "model",
    "n": "model",
    "L": "model",
    "p": "model",
    "p2": "model",
    "reduce": "model",
    "betas": "grid",
    "ps": "grid",
    "sizes": "grid",
    "sweeps": "mc",
    "thermalization": "mc",
    "interval": "mc",
    "n_bins": "mc",
    "seed": "mc",
    "start": "mc",
    "observable": "mc",
    "pin_strength": "mc",
    "cap": "oracle",
    "out": "output",
    "format": "output",
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; ``hash()`` tags every output row."""

    code: str = "toric2d"
    channel: str = "phase"
    n: int = 2
    L: int = 4
    p: float = 0.1
    p2: float | None = None
    reduce: bool = False
    betas: tuple[float, ...] = ()
    ps: tuple[float, ...] = ()
    sizes: tuple[int, ...] = ()
    sweeps: int = 20000
    thermalization: int = 2000
    interval: int = 1
    n_bins: int = 16
    seed: int = 0
    start: str = "cold"
    observable: str = "auto"
    pin_strength: float = 20.0
    cap: int = 12
    out: str = ""
    format: str = "csv"
    extra: dict = field(default_factory=dict, compare=True)

    def __post_init__(self) -> None:
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        if self.n < 2:
            raise ConfigError("replica index n must be at least 2")

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {"schema": str(SCHEMA_VERSION)}
        for f in fields(self):
            if f.name == "extra":
                continue
            sec = _SECTIONS[f.name]
            if sec not in cp:
                cp[sec] = {}
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                cp[sec][f.name] = _fmt_seq(v)
            elif v is None:
                cp[sec][f.name] = ""
            else:
                cp[sec][f.name] = repr(v) if isinstance(v, float) else str(v)
        if self.extra:
            cp["extra"] = {k: str(v) for k, v in sorted(self.extra.items())}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        if cp.has_section("run"):
            schema = cp["run"].getint("schema", SCHEMA_VERSION)
            if schema != SCHEMA_VERSION:
                raise ConfigError(f"config schema {schema} is not {SCHEMA_VERSION}")
        kw = {}
        types = {f.name: f for f in fields(cls)}
        for name, sec in _SECTIONS.items():
            if not cp.has_option(sec, name):
                continue
            raw = cp.get(sec, name)
            default = types[name].default
            if name in ("betas", "ps"):
                kw[name] = _floats(raw)
            elif name == "sizes":
                kw[name] = _ints(raw)
            elif name == "p2":
                kw[name] = float(raw) if raw.strip() else None
            elif isinstance(default, bool):
                kw[name] = cp.getboolean(sec, name)
            elif isinstance(default, int):
                kw[name] = int(raw)
            elif isinstance(default, float):
                kw[name] = float(raw)
            else:
                kw[name] = raw
        known = set(_SECTIONS.values()) | {"run", "extra"}
        unknown = [s for s in cp.sections() if s not in known]
        if unknown:
            raise ConfigError(f"unknown config sections {unknown}")
        if cp.has_section("extra"):
            kw["extra"] = dict(cp["extra"])
        return cls(**kw)

    def hash(self) -> str:
        """Digest of everything that can change the numbers; the output path is left out."""
        return hashlib.sha256(replace(self, out="").to_text().encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        return asdict(self)


def load(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_text(fh.read())


def save(cfg: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
