"""Reader for the flat ``key = value`` scenario files.

Grammar (one entry per line)::

    line    := blank | comment | entry
    comment := '#' anything
    entry   := key '=' value
    value   := scalar | '[' [scalar (',' scalar)*] ']'

Recognised keys for ``run`` files: ``parties``, ``universal``, ``set.<i>``,
``leader``, ``prime``, ``seed``, ``q``, ``leader_encodes`` and
``byzantine.{party,mode,blocks,delta,shift,seed}``. Summation files use
``modulus``, ``input.<i>``, ``leader`` and ``seed``. Either all ``set.<i>``
entries are given or none, in which case sets are drawn with probability
``q``.
"""

from __future__ import annotations

import re
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ScenarioParseError, ValidationError
from .protocol import ByzantineSpec, Scenario, SummationConfig, TamperMode

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)?$")

_RUN_KEYS = {"parties", "universal", "leader", "prime", "seed", "q", "leader_encodes"}
_BYZ_KEYS = {"party", "mode", "blocks", "delta", "shift", "seed"}
_SUM_KEYS = {"modulus", "leader", "seed"}


@dataclass(frozen=True)
class Entry:
    line: int
    value: str | list[str]


def read_entries(path: str | Path) -> dict[str, Entry]:
    path = str(path)
    text = Path(path).read_text(encoding="utf-8")
    entries: dict[str, Entry] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioParseError(path, n, f"expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if not _KEY.match(key):
            raise ScenarioParseError(path, n, f"malformed key {key!r}")
        if key in entries:
            raise ScenarioParseError(path, n, f"duplicate key {key!r} (first on line {entries[key].line})")
        entries[key] = Entry(n, _parse_value(path, n, value))
    return entries


def _parse_value(path: str, n: int, value: str) -> str | list[str]:
    if value.startswith("["):
        if not value.endswith("]"):
            raise ScenarioParseError(path, n, "unterminated list")
        body = value[1:-1].strip()
        if not body:
            return []
        items = [item.strip() for item in body.split(",")]
        if any(not item for item in items):
            raise ScenarioParseError(path, n, "empty list item")
        return items
    if not value:
        raise ScenarioParseError(path, n, "missing value")
    return value


def _convert(path: str, key: str, entry: Entry, kind: Callable[[str], Any], want_list: bool = False):
    if want_list != isinstance(entry.value, list):
        raise ScenarioParseError(path, entry.line, f"{key} must be a {'list' if want_list else 'scalar'}")
    try:
        if want_list:
            return [kind(v) for v in entry.value]
        return kind(entry.value)
    except ValueError as exc:
        raise ScenarioParseError(path, entry.line, f"bad value for {key}: {exc}") from None


def parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _indexed(path: str, entries: dict[str, Entry], prefix: str) -> dict[int, tuple[str, Entry]]:
    out = {}
    for key, entry in entries.items():
        if key.startswith(prefix + "."):
            suffix = key[len(prefix) + 1 :]
            if not suffix.isdigit():
                raise ScenarioParseError(path, entry.line, f"{prefix} index must be an integer: {key!r}")
            out[int(suffix)] = (key, entry)
    return out


def _require(path: str, entries: dict[str, Entry], key: str) -> Entry:
    if key not in entries:
        raise ValidationError("required_key", f"{path}: missing required key {key!r}")
    return entries[key]


def parse_scenario(path: str | Path) -> Scenario:
    path = str(path)
    entries = read_entries(path)
    for key, entry in entries.items():
        head, _, tail = key.partition(".")
        known = (
            key in _RUN_KEYS
            or (head == "set" and tail)
            or (head == "byzantine" and tail in _BYZ_KEYS)
        )
        if not known:
            raise ScenarioParseError(path, entry.line, f"unknown key {key!r}")

    N = _convert(path, "parties", _require(path, entries, "parties"), int)
    universe = _convert(path, "universal", _require(path, entries, "universal"), str, want_list=True)
    sets = _indexed(path, entries, "set")
    party_sets = None
    if sets:
        if sorted(sets) != list(range(N)):
            raise ValidationError("party_sets_count", f"{path}: need set.0 .. set.{N - 1}, got {sorted(sets)}")
        party_sets = tuple(
            tuple(_convert(path, key, entry, str, want_list=True)) for _, (key, entry) in sorted(sets.items())
        )

    kwargs: dict[str, Any] = {}
    for key, field_name, kind in (
        ("leader", "leader", int),
        ("prime", "prime_override", int),
        ("seed", "master_seed", int),
        ("q", "q", float),
        ("leader_encodes", "leader_encodes", parse_bool),
    ):
        if key in entries:
            kwargs[field_name] = _convert(path, key, entries[key], kind)

    byz = {k.split(".", 1)[1]: (k, e) for k, e in entries.items() if k.startswith("byzantine.")}
    if byz:
        for required in ("party", "mode", "blocks"):
            if required not in byz:
                raise ValidationError("required_key", f"{path}: missing byzantine.{required}")
        spec_args: dict[str, Any] = {
            "blocks": tuple(_convert(path, *byz["blocks"], int, want_list=True)),
            "party": _convert(path, *byz["party"], int),
        }
        mode = _convert(path, *byz["mode"], str).upper()
        if mode not in TamperMode.__members__:
            raise ValidationError("byzantine_mode", f"{path}: unknown mode {mode!r}")
        spec_args["mode"] = TamperMode[mode]
        for name in ("delta", "shift", "seed"):
            if name in byz:
                spec_args[name] = _convert(path, *byz[name], int)
        kwargs["byzantine"] = ByzantineSpec(**spec_args)

    return Scenario(N=N, universal_set=tuple(universe), party_sets=party_sets, **kwargs)


def parse_summation(path: str | Path) -> SummationConfig:
    path = str(path)
    entries = read_entries(path)
    for key, entry in entries.items():
        if key not in _SUM_KEYS and not key.startswith("input."):
            raise ScenarioParseError(path, entry.line, f"unknown key {key!r}")
    P = _convert(path, "modulus", _require(path, entries, "modulus"), int)
    inputs = _indexed(path, entries, "input")
    if not inputs or sorted(inputs) != list(range(len(inputs))):
        raise ValidationError("party_sets_count", f"{path}: inputs must be input.0 .. input.<N-1>")
    rows = tuple(
        tuple(_convert(path, key, entry, int, want_list=True)) for _, (key, entry) in sorted(inputs.items())
    )
    kwargs = {}
    if "leader" in entries:
        kwargs["leader"] = _convert(path, "leader", entries["leader"], int)
    if "seed" in entries:
        kwargs["master_seed"] = _convert(path, "seed", entries["seed"], int)
    return SummationConfig(P=P, inputs=rows, **kwargs)
