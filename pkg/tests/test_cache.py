import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernstein_lab.cache import ENV_VAR, ProfileCache, decode_record, encode_record, resolve_cache_dir
from bernstein_lab.errors import CacheCorrupt
from bernstein_lab.functions import EntireFunctionSpec as E, HSpec, growth_profile, profile_key

GRID = [2.0, 3.0, 4.0, 5.0]


@pytest.fixture(scope="module")
def profile():
    return growth_profile(E.f_h(HSpec.power(1.5)), GRID, 512)


@given(st.binary(max_size=2000))
def test_record_round_trip(payload):
    assert decode_record(encode_record(payload)) == payload


@given(st.binary(min_size=1, max_size=200), st.integers(0, 10 ** 6))
def test_record_detects_flipped_byte(payload, where):
    blob = bytearray(encode_record(payload))
    i = where % len(blob)
    blob[i] ^= 0x01
    with pytest.raises(CacheCorrupt):
        decode_record(bytes(blob))


def test_hit_is_bit_identical(tmp_path, profile):
    cache = ProfileCache(tmp_path)
    key = profile_key(E.f_h(HSpec.power(1.5)), GRID, 512)
    path = cache.store(key, profile)
    first = path.read_bytes()
    hit = cache.lookup(key, 512)
    assert hit == profile
    cache.store(key, hit)
    assert path.read_bytes() == first


def test_precision_increase_misses(tmp_path, profile):
    cache = ProfileCache(tmp_path)
    key = profile_key(E.f_h(HSpec.power(1.5)), GRID, 512)
    cache.store(key, profile)
    assert cache.lookup(key, 1024) is None


def test_corrupt_file_warns_and_misses(tmp_path, profile):
    cache = ProfileCache(tmp_path)
    key = "k" * 64
    path = cache.store(key, profile)
    blob = bytearray(path.read_bytes())
    blob[20] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.warns(RuntimeWarning):
        assert cache.lookup(key, 512) is None


def test_missing_key_misses(tmp_path):
    assert ProfileCache(tmp_path).lookup("0" * 64, 512) is None


def test_env_var_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "env"))
    assert resolve_cache_dir("elsewhere") == tmp_path / "env"
    monkeypatch.delenv(ENV_VAR)
    assert str(resolve_cache_dir("elsewhere")) == "elsewhere"
    assert resolve_cache_dir(None) is None
