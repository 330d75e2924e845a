"""Scenario configuration: INI-style sections, one scenario each.

A section header names a kind and an identifier, `[certificate hemi]`;
the body is flat `key = value` pairs.  Full-line comments start with '#'.
Errors carry the 1-based line number of the offending line and render as
"line N: message".
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["Scenario", "parse_config", "parse_config_text", "KINDS", "curvature_value"]

KINDS = {
    "certificate": {
        "criterion",
        "domain",
        "n",
        "nodes",
        "curvature",
        "safety",
        "q",
        "h_condition",
        "vol_omega",
        "vol_m",
    },
    "bvp": {"domain", "n", "nodes", "curvature", "target", "tol"},
    "annulus-scan": {
        "n",
        "inner",
        "outer",
        "curvature",
        "target",
        "slope_max",
        "points",
        "grid",
    },
    "quotient": {"domain", "n", "nodes", "curvature", "schedule", "max_iter"},
    "lapse-check": {"domain", "n", "nodes", "curvature", "field", "zero_tol"},
}


@dataclass
class Scenario:
    kind: str
    ident: str
    line: int
    params: dict = field(default_factory=dict)  # key -> (value, line)

    def get(self, key, default=None):
        if key in self.params:
            return self.params[key][0]
        return default

    def require(self, key):
        if key not in self.params:
            raise ConfigError(self.line, f"scenario '{self.ident}' is missing key '{key}'")
        return self.params[key][0]

    def get_float(self, key, default=None):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(self.params[key][1], f"'{key}' must be a number, got {raw!r}")

    def get_int(self, key, default=None):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(self.params[key][1], f"'{key}' must be an integer, got {raw!r}")

    def key_line(self, key):
        return self.params[key][1] if key in self.params else self.line


def parse_config_text(text: str):
    """Parse scenario sections from config text, preserving file order."""
    scenarios = []
    seen = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(lineno, "unterminated section header")
            tokens = line[1:-1].split()
            if len(tokens) != 2:
                raise ConfigError(lineno, "section header must be '[<kind> <id>]'")
            kind, ident = tokens
            if kind not in KINDS:
                known = ", ".join(sorted(KINDS))
                raise ConfigError(lineno, f"unknown kind {kind!r} (known: {known})")
            if ident in seen:
                raise ConfigError(
                    lineno, f"duplicate scenario id {ident!r} (first at line {seen[ident]})"
                )
            seen[ident] = lineno
            current = Scenario(kind=kind, ident=ident, line=lineno)
            scenarios.append(current)
            continue
        if "=" not in line:
            raise ConfigError(lineno, "expected 'key = value'")
        if current is None:
            raise ConfigError(lineno, "key outside any section")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in KINDS[current.kind]:
            allowed = ", ".join(sorted(KINDS[current.kind]))
            raise ConfigError(
                lineno, f"key {key!r} not valid for kind {current.kind!r} (allowed: {allowed})"
            )
        if key in current.params:
            raise ConfigError(lineno, f"duplicate key {key!r} in scenario {current.ident!r}")
        if not value:
            raise ConfigError(lineno, f"empty value for key {key!r}")
        current.params[key] = (value, lineno)
    if not scenarios:
        raise ConfigError(1, "config defines no scenarios")
    return scenarios


def parse_config(path):
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(0, f"cannot read config: {err}")
    return parse_config_text(text)


def apply_overrides(scenarios, overrides):
    """Apply --set overrides.  'id.key=value' targets one scenario, 'key=value' all."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(0, f"override {item!r} must look like [id.]key=value")
        lhs, _, value = item.partition("=")
        lhs = lhs.strip()
        value = value.strip()
        if not lhs or not value:
            raise ConfigError(0, f"override {item!r} must look like [id.]key=value")
        if "." in lhs:
            ident, _, key = lhs.partition(".")
            targets = [s for s in scenarios if s.ident == ident]
            if not targets:
                raise ConfigError(0, f"override targets unknown scenario id {ident!r}")
        else:
            key, targets = lhs, list(scenarios)
        key = key.lower()
        touched = False
        for s in targets:
            if key in KINDS[s.kind]:
                s.params[key] = (value, s.key_line(key))
                touched = True
        if not touched:
            raise ConfigError(0, f"override key {key!r} fits no selected scenario")
    return scenarios


def curvature_value(spec: str, line: int) -> float:
    """Background/target curvature shorthand: flat, constant:<c>, round-sphere:<n>."""
    spec = spec.strip()
    if spec == "flat":
        return 0.0
    head, _, arg = spec.partition(":")
    if head == "constant" and arg:
        try:
            return float(arg)
        except ValueError:
            raise ConfigError(line, f"bad constant curvature {arg!r}")
    if head == "round-sphere" and arg:
        try:
            k = int(arg)
        except ValueError:
            raise ConfigError(line, f"bad sphere dimension {arg!r}")
        if k < 2:
            raise ConfigError(line, "round-sphere dimension must be >= 2")
        return float(k * (k - 1))
    raise ConfigError(
        line,
        f"unknown curvature {spec!r} (use flat, constant:<c>, round-sphere:<n>)",
    )
