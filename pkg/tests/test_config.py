import pytest
from hypothesis import given
from hypothesis import strategies as st

from stabsm.config import SCHEMA_VERSION, ConfigError, RunConfig, load, save

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
configs = st.builds(
    RunConfig,
    code=st.sampled_from(["toric2d", "toric3d", "xcube", "cblt"]),
    channel=st.sampled_from(["phase", "bitflip", "both", "y"]),
    n=st.integers(2, 6),
    L=st.integers(2, 32),
    p=st.floats(0, 0.5),
    p2=st.none() | st.floats(0, 0.5),
    reduce=st.booleans(),
    betas=st.lists(finite, max_size=5).map(tuple),
    sizes=st.lists(st.integers(2, 64), max_size=4).map(tuple),
    seed=st.integers(0, 2**31),
    start=st.sampled_from(["cold", "hot"]),
    format=st.sampled_from(["csv", "json"]),
    extra=st.dictionaries(st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True), st.from_regex(r"[a-z0-9.]{1,6}", fullmatch=True), max_size=3),
)


@given(configs)
def test_text_roundtrip_is_exact(cfg):
    text = cfg.to_text()
    back = RunConfig.from_text(text)
    assert back == cfg
    assert back.to_text() == text
    assert back.hash() == cfg.hash()


def test_hash_tracks_every_field():
    base = RunConfig()
    assert base.hash() != RunConfig(seed=1).hash()
    assert base.hash() != RunConfig(extra={"note": "x"}).hash()
    assert base.hash() == RunConfig(out="elsewhere.csv").hash()
    assert len(base.hash()) == 16


def test_file_roundtrip(tmp_path):
    cfg = RunConfig(code="xcube", channel="phase", sizes=(4, 6), betas=(0.2, 0.554))
    path = tmp_path / "run.ini"
    save(cfg, str(path))
    assert load(str(path)) == cfg
    assert f"schema = {SCHEMA_VERSION}" in path.read_text()


@pytest.mark.parametrize(
    "text",
    [
        "[run]\nschema = 99\n",
        "[mystery]\nx = 1\n",
        "[output]\nformat = xml\n",
        "[model]\nn = 1\n",
        "not a config",
    ],
)
def test_bad_files_raise(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


def test_partial_file_uses_defaults():
    cfg = RunConfig.from_text("[model]\ncode = xcube\n")
    assert cfg.code == "xcube" and cfg.L == RunConfig().L
