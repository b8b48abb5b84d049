"""
Provides the DottedDict class used for the layered run configuration.

A run configuration is a shallow tree (``grid``, ``flow``, ``error``, ...)
whose leaves are addressed by dotted keys such as ``flow.s1``. The text config
format, the environment variables and the CLI all speak in dotted keys, while
the pyproject section arrives as nested tables; DottedDict lets both meet in
one structure.

NOTE: This module ENFORCES string keys for all operations.
"""

from collections.abc import Iterator, Mapping
from typing import Any


def _check_key(key: Any) -> None:
    if not isinstance(key, str):
        raise TypeError(f"DottedDict only accepts string keys, got {type(key)}")


class DottedDict(dict):
    """
    Dictionary with dotted key lookup and assignment for nested sections.

    Example:
        cfg = DottedDict({"flow": {"s1": 100.0}})
        assert cfg["flow.s1"] == 100.0
        cfg["grid.n"] = 256
        assert cfg["grid"]["n"] == 256
        assert dict(cfg.flatten()) == {"flow.s1": 100.0, "grid.n": 256}
    """

    def __init__(self, mapping=None, **kwargs):
        super().__init__()
        if mapping is not None:
            self.update(mapping)
        if kwargs:
            self.update(kwargs)

    def _convert_dict(self, d: Mapping) -> "DottedDict":
        result = DottedDict()
        for k, v in d.items():
            result[k] = v
        return result

    def __setitem__(self, key: str, value: Any) -> None:
        _check_key(key)
        if isinstance(value, Mapping) and not isinstance(value, DottedDict):
            value = self._convert_dict(value)

        if "." not in key:
            super().__setitem__(key, value)
            return

        head, _, rest = key.partition(".")
        if not isinstance(self.get(head), DottedDict):
            super().__setitem__(head, DottedDict())
        super().__getitem__(head)[rest] = value

    def __getitem__(self, key: str) -> Any:
        _check_key(key)
        if "." not in key:
            return super().__getitem__(key)

        current: Any = self
        for part in key.split("."):
            if isinstance(current, Mapping) and part in current:
                current = current[part]
            else:
                raise KeyError(key)
        return current

    def __contains__(self, key: str) -> bool:
        _check_key(key)
        if "." not in key:
            return super().__contains__(key)
        try:
            self[key]
            return True
        except KeyError:
            return False

    def get(self, key, default=None):
        """Return the value at a (possibly dotted) key, or default."""
        _check_key(key)
        try:
            return self[key]
        except KeyError:
            return default

    def update(self, *args, **kwargs):
        d = dict()
        d.update(*args, **kwargs)
        for k, v in d.items():
            self[k] = v

    def merge(self, other: Mapping) -> "DottedDict":
        """Overlay ``other`` leaf by leaf, skipping None values.

        Unlike update, nested sections are merged instead of replaced, so a
        source that only sets ``flow.s0`` keeps the other ``flow`` keys.
        """
        for key, value in DottedDict(other).flatten():
            if value is not None:
                self[key] = value
        return self

    def flatten(self, prefix: str = "") -> Iterator[tuple[str, Any]]:
        """Yield ``(dotted_key, leaf_value)`` pairs in insertion order."""
        for k, v in self.items():
            key = f"{prefix}{k}"
            if isinstance(v, DottedDict):
                yield from v.flatten(prefix=f"{key}.")
            else:
                yield key, v
