"""Test records, commands and artifact versions."""

import json

import pytest

from gridnadir.base import Record
from gridnadir.base.error import DataError, UsageError
from gridnadir.commands import resolve
from gridnadir.commands.simulate import Simulate
from gridnadir.definition import current_version, is_supported
from gridnadir.efc import EfcCosts, HvdcLine
from gridnadir.seeds import derive_seed, rng_for


def test_record_serialize_and_deserialize():
    line = HvdcLine(id="L1", from_area="A", to_area="B", capacity=300.0)
    serialized = line.serialize()
    assert "epc_max" not in serialized
    assert HvdcLine.deserialize(serialized) == line
    with pytest.raises(DataError) as info:
        HvdcLine.deserialize({"id": "L1", "from_area": "A", "to_area": "B"})
    assert info.value.error_code == "validation"


def test_frozen_record_is_immutable():
    costs = EfcCosts()
    with pytest.raises(TypeError):
        costs.epc = 1.0


def test_record_file_errors(tmp_path):
    with pytest.raises(DataError):
        EfcCosts.from_file(tmp_path / "missing.json")
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(DataError):
        EfcCosts.from_file(path)


def test_record_file_is_sorted(tmp_path):
    class Pair(Record):
        b: int
        a: int

    path = Pair(b=1, a=2).to_file(tmp_path / "nested" / "pair.json")
    assert list(json.loads(path.read_text())) == ["a", "b"]
    assert Pair.from_file(path) == Pair(a=2, b=1)


def test_command_name_is_set():
    command = Simulate.deserialize({"model": "m.json", "imbalance": -100, "out": "t.csv"})
    assert command.command == "simulate"
    assert command.serialize()["imbalance"] == -100.0


def test_command_rejects_bad_arguments():
    with pytest.raises(UsageError):
        Simulate.deserialize({"command": "plan", "model": "m.json", "imbalance": 1, "out": "t"})
    with pytest.raises(UsageError):
        Simulate.deserialize({"model": "m.json", "out": "t.csv"})
    with pytest.raises(UsageError):
        resolve("unknown")
    assert resolve("simulate") is Simulate


def test_versions():
    assert current_version("plan") == "1.0"
    assert is_supported("dataset", "1.0")
    assert is_supported("dataset", "1")
    assert not is_supported("dataset", "2.0")
    assert not is_supported("dataset", "")
    assert not is_supported("unknown", "1.0")
    with pytest.raises(KeyError):
        current_version("unknown")


def test_derived_seeds():
    assert derive_seed(7, "wodt", 3) == derive_seed(7, "wodt", 3)
    assert derive_seed(7, "wodt", 3) != derive_seed(7, "wodt", 4)
    assert derive_seed(7, "wodt") != derive_seed(8, "wodt")
    assert rng_for(1, "a").random() == rng_for(1, "a").random()
