import numpy as np
import pytest

from evowalker.checkpoint import (FORMAT_VERSION, MAGIC, CheckpointError,
                                  load_checkpoint, save_checkpoint)

HASH = "a" * 64


def test_roundtrip(tmp_path):
    path = str(tmp_path / "x.ckpt")
    payload = {"arr": np.arange(5.0), "nested": {"k": 3}}
    save_checkpoint(path, "policy", payload, HASH)
    kind, loaded, h = load_checkpoint(path)
    assert kind == "policy"
    assert h == HASH
    assert np.array_equal(loaded["arr"], np.arange(5.0))
    assert loaded["nested"] == {"k": 3}


def test_magic_and_version_in_file(tmp_path):
    path = str(tmp_path / "x.ckpt")
    save_checkpoint(path, "student", {}, HASH)
    blob = open(path, "rb").read()
    assert blob[:8] == MAGIC
    assert len(MAGIC) == 8
    assert int.from_bytes(blob[8:12], "little") == FORMAT_VERSION


def test_bad_magic_rejected(tmp_path):
    path = str(tmp_path / "junk.ckpt")
    open(path, "wb").write(b"NOTMINE!" + b"\x00" * 100)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_wrong_version_rejected(tmp_path):
    path = str(tmp_path / "x.ckpt")
    save_checkpoint(path, "policy", {}, HASH)
    blob = bytearray(open(path, "rb").read())
    blob[8] = 99
    open(path, "wb").write(bytes(blob))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_wrong_kind_rejected(tmp_path):
    path = str(tmp_path / "x.ckpt")
    save_checkpoint(path, "policy", {}, HASH)
    with pytest.raises(CheckpointError, match="expected"):
        load_checkpoint(path, expected_kind="evolution")


def test_missing_file_message_names_path(tmp_path):
    with pytest.raises(CheckpointError, match="nope.ckpt"):
        load_checkpoint(str(tmp_path / "nope.ckpt"))


def test_unknown_kind_rejected_on_save(tmp_path):
    with pytest.raises(ValueError):
        save_checkpoint(str(tmp_path / "x.ckpt"), "mystery", {}, HASH)
