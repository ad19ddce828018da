import pytest

from relindex.config import FIELDS, ExperimentConfig, dump_config, parse_config, parse_config_text
from relindex.errors import ConfigError


def test_minimal_file_defaults():
    cfg = parse_config_text("kind: index-identities\n")
    assert cfg == ExperimentConfig(kind="index-identities")
    for key, (_, default, _, _) in FIELDS.items():
        if key != "kind":
            assert getattr(cfg, key) == default


def test_comments_and_blank_lines():
    cfg = parse_config_text("# sweep\n\nkind: spectral-flow   # inline\ncount: 7\n")
    assert (cfg.kind, cfg.count) == ("spectral-flow", 7)


def test_unknown_key_names_key_and_line():
    with pytest.raises(ConfigError, match=r"line 2: unknown key 'colour'") as exc:
        parse_config_text("kind: dual-solve\ncolour: red\n")
    assert exc.value.line == 2


@pytest.mark.parametrize(
    "text, line, pattern",
    [
        ("kind: dual-solve\nn: many\n", 2, "expected int"),
        ("kind: dual-solve\nT: -1\n", 2, "out of range"),
        ("kind: nope\n", 1, "out of range"),
        ("kind: dual-solve\nplots: maybe\n", 2, "expected bool"),
        ("kind: dual-solve\nr nothing\n", 2, "key: value"),
        ("kind: dual-solve\nseed: 1\nseed: 2\n", 3, "duplicate"),
        ("kind: dual-solve\nr: 2.0\n", 2, "r < r1 < r2"),
        ("kind: dual-solve\nr: nan\n", 2, "expected float"),
    ],
)
def test_errors_are_line_numbered(text, line, pattern):
    with pytest.raises(ConfigError, match=pattern) as exc:
        parse_config_text(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")


def test_missing_kind():
    with pytest.raises(ConfigError, match="kind"):
        parse_config_text("seed: 3\n")


def test_hamiltonian_round_trip(tmp_path):
    text = "kind: hamiltonian-witness\nr: 0.5\nr1: 1\nr2: 2\nb_max: 3\nT: 6\nn: 2000\nN: 1\n"
    p = tmp_path / "w.cfg"
    p.write_text(text)
    cfg = parse_config(p)
    assert (cfg.r, cfg.r1) == (0.5, 1.0)
    again = parse_config_text(dump_config(cfg))
    assert again == cfg
    assert "r: 0.5\n" in dump_config(cfg) and "r1: 1.0\n" in dump_config(cfg)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.cfg")


def test_seed_accepts_hex_u64():
    assert parse_config_text("kind: dual-solve\nseed: 0xFFFFFFFFFFFFFFFF\n").seed == 2**64 - 1
    with pytest.raises(ConfigError):
        parse_config_text("kind: dual-solve\nseed: -1\n")
