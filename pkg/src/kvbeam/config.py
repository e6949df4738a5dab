"""Reading :class:`~kvbeam.model.TransmissionConfig` from TOML-style text.

Format::

    L = 1.25            # required: L, l, alpha, beta
    l = 1.0
    alpha = 0.25
    beta = 0.75
    p1 = 1.0            # scalar: constant on its side of the interface
    q1 = "0:1.0, 0.25:2.0, 0.75:1.0"   # piecewise: value v_i from x_i on
    a = 1.0             # scalar damping: value on (alpha, beta), zero elsewhere
    c0 = 1e-8

    [transversal]       # overrides applied when parsing for that motion kind
    q2 = 2.0

Moduli default to 1 and damping to 1 on ``(alpha, beta)``.  Every error is a
:class:`~kvbeam.errors.ConfigurationError` whose message starts with
``path:line:``.
"""

from __future__ import annotations

import re
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .errors import ConfigurationError
from .model import (
    DEFAULT_C0,
    CoefficientProfile,
    MotionKind,
    TransmissionConfig,
    damping_profile,
    hard_failures,
    validate,
)

__all__ = ["parse_config", "parse_config_text", "default_config_path", "GEOMETRY_KEYS", "COEFFICIENT_KEYS"]

GEOMETRY_KEYS = ("L", "l", "alpha", "beta")
COEFFICIENT_KEYS = ("p1", "p2", "q1", "q2", "a", "b")
OPTIONAL_KEYS = ("c0",)
SECTIONS = tuple(k.value for k in MotionKind)
_ALLOWED = set(GEOMETRY_KEYS) | set(COEFFICIENT_KEYS) | set(OPTIONAL_KEYS)


def default_config_path() -> Path:
    """The shipped default configuration file."""
    return Path(__file__).with_name("data") / "default.toml"


class _Locator:
    """Line numbers of ``key = ...`` assignments per section."""

    _section = re.compile(r"^\s*\[\s*([^\]\s]+)\s*\]")
    _assign = re.compile(r"^\s*([A-Za-z0-9_\-]+|\"[^\"]*\")\s*=")

    def __init__(self, text: str):
        self.lines: dict[tuple[str | None, str], int] = {}
        self.sections: dict[str, int] = {}
        self.duplicates: list[tuple[str | None, str, int]] = []
        section = None
        for no, line in enumerate(text.splitlines(), start=1):
            m = self._section.match(line)
            if m:
                section = m.group(1)
                self.sections.setdefault(section, no)
                continue
            m = self._assign.match(line)
            if m:
                key = (section, m.group(1).strip('"'))
                if key in self.lines:
                    self.duplicates.append((section, key[1], no))
                self.lines.setdefault(key, no)

    def line(self, section: str | None, key: str | None = None) -> int:
        if key is None:
            return self.sections.get(section, 1) if section else 1
        return self.lines.get((section, key), self.sections.get(section, 1) if section else 1)


def _fail(source: str, line: int, msg: str) -> ConfigurationError:
    return ConfigurationError(f"{source}:{line}: {msg}")


def _number(value, source: str, line: int, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(source, line, f"{key}: expected a number, got {value!r}")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise _fail(source, line, f"{key}: value must be finite")
    return value


def _piecewise(text: str, lo: float, hi: float, source: str, line: int, key: str) -> CoefficientProfile:
    pts, vals = [], []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise _fail(source, line, f"{key}: empty entry in piecewise list")
        parts = item.split(":")
        if len(parts) != 2:
            raise _fail(source, line, f"{key}: entry {item!r} is not of the form x:value")
        try:
            x, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise _fail(source, line, f"{key}: cannot parse number in {item!r}") from None
        pts.append(x)
        vals.append(v)
    if abs(pts[0] - lo) > 1e-12 * max(1.0, abs(lo)):
        raise _fail(source, line, f"{key}: first breakpoint must be {lo:g}, got {pts[0]:g}")
    if any(b <= a for a, b in zip(pts, pts[1:])) or pts[-1] >= hi:
        raise _fail(source, line, f"{key}: breakpoints must increase strictly inside [{lo:g}, {hi:g})")
    return CoefficientProfile(tuple(pts) + (hi,), tuple(vals))


def _merge(doc: dict, kind: MotionKind | None, source: str, loc: _Locator) -> dict[str, tuple[object, int]]:
    merged: dict[str, tuple[object, int]] = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise _fail(source, loc.line(key), f"unknown section [{key}] (allowed: {', '.join(SECTIONS)})")
            for sub in value:
                if sub not in _ALLOWED:
                    raise _fail(source, loc.line(key, sub), f"unknown key {sub!r} in [{key}]")
            continue
        if key not in _ALLOWED:
            raise _fail(source, loc.line(None, key), f"unknown key {key!r}")
        merged[key] = (value, loc.line(None, key))
    if kind is not None:
        for sub, value in doc.get(kind.value, {}).items():
            if isinstance(value, dict):
                raise _fail(source, loc.line(kind.value, sub), f"nested table {sub!r} not allowed")
            merged[sub] = (value, loc.line(kind.value, sub))
    return merged


def parse_config_text(text: str, kind: MotionKind | str | None = None, source: str = "<config>") -> TransmissionConfig:
    """Parse configuration text; ``kind`` selects which override section applies."""
    kind = None if kind is None else MotionKind.parse(kind)
    loc = _Locator(text)
    for section, key, line in loc.duplicates:
        where = f" in [{section}]" if section else ""
        raise _fail(source, line, f"duplicate key {key!r}{where} (first set on line {loc.line(section, key)})")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else max(1, len(text.rstrip("\n").splitlines()))
        raise _fail(source, line, str(exc)) from None
    merged = _merge(doc, kind, source, loc)

    geo = {}
    for key in GEOMETRY_KEYS:
        if key not in merged:
            raise _fail(source, 1, f"missing required key {key!r}")
        value, line = merged[key]
        geo[key] = _number(value, source, line, key)
    if "c0" in merged:
        value, line = merged["c0"]
        c0 = _number(value, source, line, "c0")
    else:
        c0 = DEFAULT_C0
    L, l, alpha, beta = geo["L"], geo["l"], geo["alpha"], geo["beta"]
    if not (0.0 <= alpha < beta <= l < L):
        line = merged["beta"][1] if beta <= alpha else merged["l"][1]
        raise _fail(
            source, line, f"geometry must satisfy 0 <= alpha < beta <= l < L (got L={L:g}, l={l:g}, alpha={alpha:g}, beta={beta:g})"
        )

    domains = {"p1": (0.0, l), "q1": (0.0, l), "a": (0.0, l), "b": (0.0, l), "p2": (l, L), "q2": (l, L)}
    profiles = {}
    for key in COEFFICIENT_KEYS:
        value, line = merged.get(key, (1.0, 1))
        lo, hi = domains[key]
        if isinstance(value, str):
            profiles[key] = _piecewise(value, lo, hi, source, line, key)
        else:
            v = _number(value, source, line, key)
            profiles[key] = damping_profile(l, alpha, beta, v) if key in ("a", "b") else CoefficientProfile.constant(lo, hi, v)
    cfg = TransmissionConfig(L=L, l=l, alpha=alpha, beta=beta, c0=c0, **profiles)

    for k in [kind] if kind is not None else list(MotionKind):
        bad = hard_failures(validate(cfg, k))
        if bad:
            raise _fail(source, 1, "; ".join(f"{c.name}: {c.detail}" for c in bad))
    return cfg


def parse_config(path: str | Path | None = None, kind: MotionKind | str | None = None) -> TransmissionConfig:
    """Parse the file at ``path`` (the shipped default when ``None``)."""
    path = default_config_path() if path is None else Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"{path}:0: cannot read config ({exc.strerror or exc})") from None
    return parse_config_text(text, kind, str(path))
