"""Experiment configuration files.

One INI-style file per experiment, with ``[channel]``, ``[system]``, ``[sim]``
and ``[output]`` sections of ``key = value`` entries. Vectors are
comma-separated; matrix rows are separated by ``;``. See README.md for the
full schema.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import ChannelParams

OUTPUT_DIR_ENV = "SECRECY_ALOHA_OUTPUT_DIR"
FROM_CHANNEL = "from-channel"


class ConfigError(Exception):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass
class ChannelSection:
    params: ChannelParams
    n_samples: int
    seed: int
    positive_part: bool = False


@dataclass
class SystemSection:
    arrival: np.ndarray
    tx_prob: np.ndarray
    fail_prob: np.ndarray
    rho: Optional[np.ndarray]  # None means "from-channel"


@dataclass
class SimSection:
    n_slots: int
    seed: int
    warmup_slots: int = 0
    dominant_mode: bool = False
    replications: int = 1
    drift_threshold: float = 0.01
    trace: bool = False


@dataclass
class RunConfig:
    path: Path
    channel: Optional[ChannelSection]
    system: Optional[SystemSection]
    sim: Optional[SimSection]
    output_dir: Path
    output_format: str
    lines: dict

    def line_of(self, section: str, key: Optional[str] = None) -> Optional[int]:
        return self.lines.get((section, key))


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#\s][^=:]*?)\s*[=:]")


def _locate(text: str) -> dict:
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
            continue
        m = _KEY_RE.match(raw)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, lines: dict, section: str):
        self.sec = parser[section]
        self.lines = lines
        self.name = section

    def err(self, key, message):
        line = self.lines.get((self.name, key), self.lines.get((self.name, None)))
        return ConfigError(f"[{self.name}] {key}: {message}", line)

    def raw(self, key, default=None, required=True):
        if key not in self.sec:
            if required and default is None:
                raise ConfigError(f"[{self.name}] missing required key '{key}'",
                                  self.lines.get((self.name, None)))
            return default
        return self.sec[key].strip()

    def integer(self, key, default=None, minimum=None):
        value = self.raw(key, default)
        try:
            out = int(value)
        except (TypeError, ValueError):
            raise self.err(key, f"expected an integer, got {value!r}") from None
        if minimum is not None and out < minimum:
            raise self.err(key, f"must be >= {minimum}, got {out}")
        return out

    def real(self, key, default=None):
        value = self.raw(key, default)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise self.err(key, f"expected a number, got {value!r}") from None

    def boolean(self, key, default=False):
        if key not in self.sec:
            return default
        try:
            return self.sec.getboolean(key)
        except ValueError:
            raise self.err(key, f"expected true/false, got {self.sec[key]!r}") from None

    def vector(self, key, default=None, required=True):
        value = self.raw(key, default, required)
        if value is None:
            return None
        if not isinstance(value, str):
            return np.asarray(value, dtype=float)
        try:
            return np.array([float(v) for v in value.split(",") if v.strip()])
        except ValueError:
            raise self.err(key, f"expected comma-separated numbers, got {value!r}") from None

    def matrix(self, key):
        value = self.raw(key)
        try:
            rows = [[float(v) for v in row.split(",") if v.strip()] for row in value.split(";") if row.strip()]
            return np.array(rows, dtype=float)
        except ValueError:
            raise self.err(key, f"expected ';'-separated rows of numbers, got {value!r}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line) from None
    lines = _locate(text)

    known = {"channel", "system", "sim", "output"}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]", lines.get((name, None)))

    channel = _read_channel(_Reader(parser, lines, "channel")) if parser.has_section("channel") else None
    system = _read_system(_Reader(parser, lines, "system")) if parser.has_section("system") else None
    sim = _read_sim(_Reader(parser, lines, "sim")) if parser.has_section("sim") else None
    if system is not None and system.rho is None and channel is None:
        raise ConfigError("[system] rho = from-channel requires a [channel] section",
                          lines.get(("system", "rho")))

    out_dir, out_format = Path("results"), "both"
    if parser.has_section("output"):
        r = _Reader(parser, lines, "output")
        out_dir = Path(r.raw("dir", "results"))
        out_format = r.raw("format", "both").lower()
        if out_format not in ("csv", "json", "both"):
            raise r.err("format", f"must be csv, json or both, got {out_format!r}")
    if os.environ.get(OUTPUT_DIR_ENV):
        out_dir = Path(os.environ[OUTPUT_DIR_ENV])
    elif not out_dir.is_absolute():
        out_dir = path.parent / out_dir
    return RunConfig(path, channel, system, sim, out_dir, out_format, lines)


def _read_channel(r: _Reader) -> ChannelSection:
    n = r.integer("n_users", minimum=2)
    base = r.vector("mean_gain_base")
    cross = r.matrix("mean_gain_cross")
    if base.shape != (n,):
        raise r.err("mean_gain_base", f"expected {n} values, got {base.size}")
    if cross.shape != (n, n):
        raise r.err("mean_gain_cross", f"expected a {n}x{n} matrix, got shape {cross.shape}")
    power = r.real("power")
    try:
        params = ChannelParams(n, power, base, cross)
    except ValueError as exc:
        raise ConfigError(f"[channel] {exc}", r.lines.get(("channel", None))) from None
    return ChannelSection(
        params=params,
        n_samples=r.integer("n_samples", 100_000, minimum=1),
        seed=r.integer("seed"),
        positive_part=r.boolean("positive_part"),
    )


def _read_system(r: _Reader) -> SystemSection:
    arrival = r.vector("arrival")
    n = arrival.size
    tx = r.vector("tx_prob")
    pf = r.vector("fail_prob", np.zeros(n))
    rho_raw = r.raw("rho", required=False)
    if rho_raw is None:
        rho = np.ones(n)
    elif rho_raw.lower() == FROM_CHANNEL:
        rho = None
    else:
        rho = r.vector("rho")
    for key, vec in (("tx_prob", tx), ("fail_prob", pf), ("rho", rho)):
        if vec is not None and vec.size != n:
            raise r.err(key, f"expected {n} values to match arrival, got {vec.size}")
    return SystemSection(arrival, tx, pf, rho)


def _read_sim(r: _Reader) -> SimSection:
    n_slots = r.integer("n_slots", minimum=1)
    warmup = r.integer("warmup_slots", 0, minimum=0)
    if warmup >= n_slots:
        raise r.err("warmup_slots", f"must be smaller than n_slots ({n_slots})")
    return SimSection(
        n_slots=n_slots,
        seed=r.integer("seed"),
        warmup_slots=warmup,
        dominant_mode=r.boolean("dominant_mode"),
        replications=r.integer("replications", 1, minimum=1),
        drift_threshold=r.real("drift_threshold", 0.01),
        trace=r.boolean("trace"),
    )
