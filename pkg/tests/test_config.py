import textwrap
from pathlib import Path

import pytest

from covbasis.config import DEFAULT_SEED, OUTPUT_DIR_ENV, TASKS, load_config, parse_config
from covbasis.errors import ConfigParseError

EXAMPLE = Path(__file__).resolve().parent.parent / "configs" / "example.toml"

MINIMAL = """
[[scenario]]
name = "a"
task = "chern"
[scenario.family]
kind = "two_level_sphere"
"""


def parse(text):
    return parse_config(textwrap.dedent(text))


def test_example_config_loads():
    cfg = load_config(EXAMPLE)
    assert len(cfg.scenarios) == 9
    assert {s.task for s in cfg.scenarios} == set(TASKS)
    assert cfg.source == str(EXAMPLE)


def test_defaults():
    cfg = parse(MINIMAL)
    sc = cfg.scenarios[0]
    assert cfg.seed == DEFAULT_SEED and sc.seed == DEFAULT_SEED
    assert sc.output_format == "json" and sc.output_path is None
    assert cfg.output_dir == "."


def test_run_seed_propagates_unless_overridden():
    cfg = parse("[run]\nseed = 7\n" + MINIMAL + "[[scenario]]\nname = 'b'\ntask = 'chern'\n"
                "[scenario.family]\nkind = 'two_level_sphere'\n[scenario.params]\nseed = 3\n")
    assert [s.seed for s in cfg.scenarios] == [7, 3]


def test_output_dir_env_override(monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, "/tmp/elsewhere")
    assert parse("[run]\noutput_dir = 'x'\n" + MINIMAL).output_dir == "/tmp/elsewhere"
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert parse("[run]\noutput_dir = 'x'\n" + MINIMAL).output_dir == "x"


@pytest.mark.parametrize("text, field, line", [
    ("[run]\nfoo = 1\n" + MINIMAL, "run.foo", 2),
    ("bogus = 1\n" + MINIMAL, "bogus", 1),
    ("[run]\nseed = 'x'\n" + MINIMAL, "run.seed", 2),
    ("[run]\nseed = 1\n", "scenario", None),
    ("[[scenario]]\nname = 'a'\n[scenario.family]\nkind = 'rotating2d'\n", "scenario[0].task", 1),
    ("[[scenario]]\nname = 'a'\ncolour = 'red'\ntask = 'chern'\n[scenario.family]\nkind = 'two_level_sphere'\n",
     "scenario[0].colour", 1),
    (MINIMAL + MINIMAL, "scenario[1].name", 8),
    ("[[scenario]]\nname = 'a'\ntask = 'dance'\n[scenario.family]\nkind = 'rotating2d'\n", "scenario[0].task", 3),
    ("[[scenario]]\nname = 'a'\ntask = 'chern'\nfamily = 3\n", "scenario[0].family", 1),
    (MINIMAL + "[scenario.params]\ndt = -0.1\n", "scenario[0].params.dt", 8),
    (MINIMAL + "[scenario.params]\npoints = 2.5\n", "scenario[0].params.points", 8),
    (MINIMAL + "[scenario.output]\nformat = 'xml'\n", "scenario[0].output.format", 8),
    (MINIMAL + "[scenario.output]\npath = 3\n", "scenario[0].output.path", 2),
    ("[[scenario]]\nname = 'a'\ntask = 'curvature'\n[scenario.family]\nkind = 'rotating2d'\n",
     "scenario[0].family.kind", 5),
])
def test_errors_name_field_and_line(text, field, line):
    with pytest.raises(ConfigParseError) as info:
        parse(text)
    assert info.value.field == field
    assert info.value.line == line
    assert f"field '{field}'" in str(info.value)


def test_line_numbers_point_into_the_right_scenario():
    text = MINIMAL + "[scenario.params]\nn_phi = 4\n" + MINIMAL.replace('"a"', '"b"') + "[scenario.params]\nn_phi = -4\n"
    with pytest.raises(ConfigParseError) as info:
        parse(text)
    assert info.value.field == "scenario[1].params.n_phi"
    assert text.split("\n")[info.value.line - 1].startswith("n_phi = -4")


def test_malformed_toml_reports_line():
    with pytest.raises(ConfigParseError) as info:
        parse("[[scenario]]\nname = 'a'\ntask = \n")
    assert info.value.line == 3
    assert "malformed" in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParseError):
        load_config(tmp_path / "nope.toml")
