import pytest

from config import load_config, parse_config
from errors import ConfigValidationError
from solver import Scheme

MINIMAL = """
[geometry]
amplitude = 0
straight_from = 0

[flow]
flux = 1.0

[mesh]
half_length = 3
h = 0.25
"""

BUMP = """
[geometry]
amplitude = 0.2
straight_from = 1.5

[flow]
flux = 0.5

[carrier]
epsilon = {epsilon}
dist = auto

[mesh]
half_length = {half_length}
h = 0.25
"""


def test_minimal_config_resolves_auto_cutoffs():
    config = parse_config(MINIMAL)
    assert config.cutoffs.epsilon == pytest.approx(0.45)
    assert config.cutoffs.dist == 1.0
    assert config.flux == 1.0
    assert config.seed == 0
    assert config.solver.scheme == Scheme.PICARD
    assert config.analysis.samples == 50
    assert len(config.fingerprint) == 64
    assert config.resolved()["cutoffs"]["epsilon"] == pytest.approx(0.45)
    assert "fingerprint" not in config.resolved()


def test_bump_auto_dist():
    config = parse_config(BUMP.format(epsilon="0.2", half_length=10))
    assert config.cutoffs.dist == 3.0
    assert config.carrier_params.cutoffs.epsilon == 0.2


def test_sections_parse_lists_and_options():
    text = MINIMAL + "\n[analysis]\nepsilon_grid = 0.4, 0.2 0.1\n\n[solver]\nscheme = oseen\nmax_iters = 7\n"
    config = parse_config(text)
    assert config.analysis.epsilon_grid == [0.4, 0.2, 0.1]
    assert config.solver.scheme == Scheme.OSEEN
    assert config.solver.max_iters == 7


def test_epsilon_out_of_range():
    with pytest.raises(ConfigValidationError) as info:
        parse_config(BUMP.format(epsilon="-0.1", half_length=10))
    assert info.value.exit_code == 1
    assert any("[carrier] epsilon" in p and "(0, 1)" in p for p in info.value.problems)


def test_short_domain():
    with pytest.raises(ConfigValidationError) as info:
        parse_config(BUMP.format(epsilon="auto", half_length=1.5))
    assert any("T >= L + 1" in p for p in info.value.problems)


def test_problems_are_aggregated():
    text = BUMP.format(epsilon="2.0", half_length=1.5) + "\n[bogus]\nx = 1\n\n[run]\nseed = -1\n"
    with pytest.raises(ConfigValidationError) as info:
        parse_config(text)
    problems = info.value.problems
    assert any("unknown section [bogus]" in p for p in problems)
    assert any(p.startswith("[carrier] epsilon") for p in problems)
    assert any(p.startswith("[run] seed") for p in problems)
    assert any("T >= L + 1" in p for p in problems)
    assert str(len(problems)) in str(info.value)


def test_unknown_key_rejected():
    with pytest.raises(ConfigValidationError) as info:
        parse_config(MINIMAL.replace("h = 0.25", "h = 0.25\nsize = 3"))
    assert any(p.startswith("[mesh] size") for p in info.value.problems)


def test_missing_required_field():
    with pytest.raises(ConfigValidationError) as info:
        parse_config(MINIMAL.replace("flux = 1.0", ""))
    assert any(p.startswith("[flow] flux") for p in info.value.problems)


def test_narrow_geometry_reported():
    text = MINIMAL.replace("amplitude = 0\nstraight_from = 0", "amplitude = -0.6\nstraight_from = 1")
    with pytest.raises(ConfigValidationError) as info:
        parse_config(text)
    assert any("degenerate geometry" in p for p in info.value.problems)


def test_dev_mode_coarsens():
    config = parse_config(MINIMAL, dev=True)
    assert config.dev
    assert config.mesh.h == 0.5
    assert config.analysis.samples == 10


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigValidationError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(MINIMAL)
    assert load_config(path).fingerprint == parse_config(MINIMAL).fingerprint
