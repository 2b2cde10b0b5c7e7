"""Experiment configuration in INI form.

Sections: ``[weight]`` (``kind`` plus kind-specific parameters), ``[space]``
(``mode``, ``p``, ``x_max``, ``step``), ``[run]`` (``seed``, ``out``) and one
optional section per command. Every error names the offending line.

Example::

    [weight]
    kind = spike_train
    decay = 1

    [space]
    mode = Lp
    p = 1
    x_max = 60
    step = 0.01
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .space import Mode, SpaceSpec
from .weights import WeightFunction, WeightKind

__all__ = ["ExperimentConfig", "load_config", "parse_config", "parse_times", "parse_function"]

_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _line_map(text):
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = no
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[:1].isspace():
            where[(section, m.group(1).strip().lower())] = no
    return where


@dataclass
class ExperimentConfig:
    """Parsed configuration with line-aware typed accessors."""

    sections: dict
    lines: dict
    sha256: str
    source: str = "<string>"
    seed: int = 0
    weight: WeightFunction = None
    space: SpaceSpec = None
    extra: dict = field(default_factory=dict)

    def line(self, section, key=None):
        return self.lines.get((section, key)) or self.lines.get((section, None))

    def has(self, section, key=None):
        if key is None:
            return section in self.sections
        return key in self.sections.get(section, {})

    def raw(self, section, key, default=None):
        sec = self.sections.get(section, {})
        if key not in sec:
            if default is None:
                raise ConfigError(f"missing [{section}] {key}", self.line(section))
            return default
        return sec[key]

    def _convert(self, section, key, default, conv, what):
        text = self.raw(section, key, default if default is None else str(default))
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}] {key} = {text!r} is not {what} ({exc})",
                              self.line(section, key)) from None

    def get_float(self, section, key, default=None):
        val = self._convert(section, key, default, float, "a number")
        if not math.isfinite(val):
            raise ConfigError(f"[{section}] {key} must be finite", self.line(section, key))
        return val

    def get_int(self, section, key, default=None):
        return self._convert(section, key, default, lambda s: int(str(s).strip()), "an integer")

    def get_str(self, section, key, default=None):
        return str(self.raw(section, key, default)).strip()

    def get_bool(self, section, key, default=None):
        def conv(s):
            s = str(s).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected true/false")
        return self._convert(section, key, default, conv, "a boolean")

    def get_floats(self, section, key, default=None):
        return self._convert(section, key, default,
                             lambda s: [float(x) for x in re.split(r"[,\s]+", str(s).strip()) if x],
                             "a list of numbers")

    def get_times(self, section, key, default=None):
        """Times as a comma list or ``start:stop:step`` range, checked against the grid."""
        text = self.raw(section, key, default)
        try:
            ts = parse_times(text)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", self.line(section, key)) from None
        for t in ts:
            try:
                self.space.steps(t)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: {t} is not a multiple of step "
                                  f"{self.space.step}", self.line(section, key)) from None
        return ts

    def grid_value(self, section, key, default=None):
        val = self.get_float(section, key, default)
        try:
            self.space.steps(val)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {val} is not a multiple of step "
                              f"{self.space.step}", self.line(section, key)) from None
        return val

    def function(self, section, key, default=None):
        text = self.get_str(section, key, default)
        try:
            return parse_function(text, self.space)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", self.line(section, key)) from None


def parse_times(text):
    text = str(text).strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError("range must be start:stop:step with step > 0")
        start, stop, inc = parts
        n = int(math.floor((stop - start) / inc + 1e-9))
        return [round(start + k * inc, 12) for k in range(n + 1)]
    out = [float(x) for x in re.split(r"[,\s]+", text) if x]
    if not out:
        raise ValueError("empty time list")
    return out


def parse_function(text, spec):
    """Build a grid function from a tiny expression language.

    Terms joined by ``+``: ``zero``, ``indicator a b [h]``, ``tent a b [h]``,
    ``bump a b [h]`` (indicator in ``Lp``, tent in ``C0v``) and
    ``const h``.
    """
    total = np.zeros(spec.n_cells + 1)
    kinds = set()
    for term in text.split("+"):
        tok = term.split()
        if not tok:
            raise ValueError(f"empty term in {text!r}")
        name, args = tok[0].lower(), [float(x) for x in tok[1:]]
        if name == "zero" and not args:
            continue
        if name == "const" and len(args) == 1:
            f = spec.from_samples(np.full(spec.n_cells + 1, args[0]))
        elif name in ("indicator", "tent", "bump") and len(args) in (2, 3):
            f = getattr(spec, name)(*args)
        else:
            raise ValueError(f"cannot parse term {term.strip()!r}")
        kinds.add(f.interpretation)
        total = total + f.samples
    if len(kinds) > 1:
        raise ValueError("cannot mix step and piecewise-linear terms")
    return spec.from_samples(total, kinds.pop() if kinds else None)


def _weight_from_section(cfg):
    sec = cfg.sections.get("weight")
    if sec is None:
        raise ConfigError("missing [weight] section", None)
    try:
        kind = WeightKind(sec.get("kind", "").strip().lower())
    except ValueError:
        raise ConfigError(f"unknown weight kind {sec.get('kind')!r}", cfg.line("weight", "kind")) from None
    mapping = {"kind": kind.value}
    if kind is WeightKind.CONSTANT:
        mapping["c"] = cfg.get_float("weight", "c", 1.0)
    elif kind is WeightKind.EXPONENTIAL:
        mapping["base"] = cfg.get_float("weight", "base")
    elif kind is WeightKind.SPIKE_TRAIN:
        for k in ("decay", "gap", "first"):
            mapping[k] = cfg.get_float("weight", k, 1.0)
        if cfg.has("weight", "positions"):
            mapping["positions"] = cfg.get_floats("weight", "positions")
    elif kind is WeightKind.TABULATED:
        if cfg.has("weight", "table"):
            path = Path(cfg.get_str("weight", "table"))
            if not path.is_absolute() and cfg.source not in ("<string>",):
                path = Path(cfg.source).parent / path
            try:
                data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read weight table: {exc}", cfg.line("weight", "table")) from None
            mapping["xs"], mapping["values"] = data[:, 0], data[:, 1]
        else:
            mapping["xs"] = cfg.get_floats("weight", "xs")
            mapping["values"] = cfg.get_floats("weight", "values")
    try:
        return WeightFunction.from_mapping(mapping)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad weight: {exc}", cfg.line("weight")) from None


def _space_from_section(cfg, weight):
    if "space" not in cfg.sections:
        raise ConfigError("missing [space] section", None)
    try:
        mode = Mode(cfg.get_str("space", "mode", "Lp"))
    except ValueError:
        raise ConfigError("mode must be Lp or C0v", cfg.line("space", "mode")) from None
    p = cfg.get_float("space", "p", 1.0)
    x_max = cfg.get_float("space", "x_max")
    step = cfg.get_float("space", "step")
    if not step > 0:
        raise ConfigError("step must be positive", cfg.line("space", "step"))
    if not p > 0:
        raise ConfigError("p must be positive", cfg.line("space", "p"))
    try:
        return SpaceSpec(mode, weight, x_max, step, p)
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.line("space")) from None


def parse_config(text, source="<string>", seed=None):
    """Parse INI text into an :class:`ExperimentConfig`.

    ``seed`` overrides ``[run] seed``.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", lineno) from None

    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    cfg = ExperimentConfig(
        sections=sections,
        lines=_line_map(text),
        sha256=hashlib.sha256(text.encode()).hexdigest(),
        source=source,
    )
    cfg.seed = seed if seed is not None else cfg.get_int("run", "seed", 0)
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative", cfg.line("run", "seed"))
    cfg.weight = _weight_from_section(cfg)
    cfg.space = _space_from_section(cfg, cfg.weight)
    return cfg


def load_config(path, seed=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path), seed=seed)
