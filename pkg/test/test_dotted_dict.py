import copy

import pytest

from solab.util.dotted_dict import DottedDict

NON_STRING_KEYS = [
    1,  # integer
    (1, 2),  # tuple
    True,  # boolean
    3.14,  # float
    None,  # None
    b"bytes",  # bytes
]


# ----------------------------
# lookup and assignment
# ----------------------------
@pytest.mark.parametrize(
    "data,key,expected,desc",
    [
        ({"grid": 1, "flow": 2}, "grid", 1, "top level"),
        ({"flow": {"s1": 100.0}}, "flow.s1", 100.0, "one section"),
        ({"output": {"plots": {"dpi": 72}}}, "output.plots.dpi", 72, "two sections"),
    ],
)
def test_lookup(data, key, expected, desc):
    d = DottedDict(data)
    assert d[key] == expected, f"{desc}: item lookup"
    assert d.get(key) == expected, f"{desc}: get"


@pytest.mark.parametrize(
    "data,key",
    [
        ({"grid": 1}, "flow"),
        ({"flow": {"s1": 10}}, "flow.s0"),
        ({"flow": {"s1": 10}}, "flow.s1.x"),
    ],
)
def test_missing_key_raises(data, key):
    d = DottedDict(data)
    with pytest.raises(KeyError):
        _ = d[key]
    assert d.get(key, "default") == "default"


@pytest.mark.parametrize(
    "initial,key,value,expected,desc",
    [
        ({}, "n", 64, {"n": 64}, "top level"),
        ({}, "grid.n", 64, {"grid": {"n": 64}}, "new section"),
        ({"grid": {"n": 64}}, "grid.n", 128, {"grid": {"n": 128}}, "overwrite"),
        ({"grid": {"n": 64}}, "grid.zmax", "auto", {"grid": {"n": 64, "zmax": "auto"}}, "sibling"),
        ({"grid": 1}, "grid.n", 64, {"grid": {"n": 64}}, "through a leaf"),
    ],
)
def test_setitem(initial, key, value, expected, desc):
    d = DottedDict(initial)
    d[key] = value
    assert d[key] == value, f"{desc}: read back"
    assert d == expected, f"{desc}: structure"


@pytest.mark.parametrize("key", NON_STRING_KEYS)
def test_rejects_non_string_keys(key):
    d = DottedDict({"a": 1})
    for op in (lambda: d[key], lambda: d.get(key), lambda: key in d, lambda: d.__setitem__(key, 1)):
        with pytest.raises(TypeError) as excinfo:
            op()
        assert "string keys" in str(excinfo.value)


def test_nested_mappings_are_converted():
    d = DottedDict({"flow": {"seed": {"profile": "cylinder"}}})
    assert isinstance(d["flow"], DottedDict)
    assert isinstance(d["flow.seed"], DottedDict)
    assert d["flow.seed.profile"] == "cylinder"


def test_contains():
    d = DottedDict({"grid": {"n": 64}})
    assert "grid" in d
    assert "grid.n" in d
    assert "grid.zmax" not in d
    assert "flow.s1" not in d


def test_deep_copy_is_independent():
    d1 = DottedDict({"output": {"formats": ["csv", "json"]}})
    d2 = copy.deepcopy(d1)
    d1["output.formats"].append("svg")
    assert d2["output.formats"] == ["csv", "json"]


def test_update_accepts_dotted_keys():
    d = DottedDict({"grid": {"n": 64}})
    d.update({"flow.s1": 200.0}, closure=3)
    assert d["flow"]["s1"] == 200.0
    assert d["closure"] == 3
    assert d["grid.n"] == 64


# ----------------------------
# merge and flatten
# ----------------------------
def test_merge_keeps_untouched_siblings():
    base = DottedDict({"flow": {"s1": 100.0, "s0": 50.0}, "grid": {"n": 64}})
    base.merge({"flow": {"s0": 10.0}})
    assert base["flow.s1"] == 100.0
    assert base["flow.s0"] == 10.0
    assert base["grid.n"] == 64


def test_merge_skips_none():
    base = DottedDict({"output": {"dir": "solab-out"}})
    base.merge({"output.dir": None})
    assert base["output.dir"] == "solab-out"


def test_merge_is_ordered_by_call():
    base = DottedDict({"grid": {"n": 64}})
    base.merge({"grid.n": 128}).merge({"grid": {"n": 256}})
    assert base["grid.n"] == 256


def test_flatten():
    d = DottedDict({"grid": {"n": 64, "zmax": "auto"}, "error": {"model": "zero"}, "tag": "x"})
    assert dict(d.flatten()) == {
        "grid.n": 64,
        "grid.zmax": "auto",
        "error.model": "zero",
        "tag": "x",
    }
    assert list(DottedDict().flatten()) == []
