import pytest
from hypothesis import given
from hypothesis import strategies as st

from laserleak.config import (
    RunConfig, default_config_path, parse_config, parse_config_text, serialize_config,
)
from laserleak.errors import ParseError, ValidationError
from laserleak.params import LaserParams


def test_shipped_file_is_the_documented_default():
    cfg = parse_config(default_config_path())
    assert cfg == RunConfig()
    assert cfg.laser == LaserParams()
    assert parse_config_text(serialize_config(cfg)) == cfg


def test_empty_file_lacks_laser_section():
    with pytest.raises(ValidationError) as exc:
        parse_config_text("")
    assert exc.value.field == "laser"


def test_gamma_bound():
    with pytest.raises(ValidationError) as exc:
        parse_config_text("[laser]\nGamma = 1.5\n")
    assert exc.value.field == "Gamma"


def test_laser_errors_use_config_key_names():
    with pytest.raises(ValidationError) as exc:
        parse_config_text("[laser]\nlambda_m = -1\n")
    assert exc.value.field == "lambda_m"


@pytest.mark.parametrize("text,field", [
    ("[laser]\nV = 2e-18\n", "V"),
    ("[laser]\n[drive]\nfwhm_ns = 0.5\n", "fwhm_ns"),
    ("[laser]\n[drive]\nfwhm = 500\n", "fwhm"),
    ("[laser]\nbogus = 1\n", "bogus"),
])
def test_unit_suffixes_are_checked(text, field):
    with pytest.raises(ValidationError) as exc:
        parse_config_text(text)
    assert exc.value.field == field


@pytest.mark.parametrize("text,line", [
    ("[laser]\nGamma 0.05\n", 2),
    ("[laser]\n\n[nowhere]\n", 3),
    ("[laser]\nGamma = 0.05\nGamma = 0.04\n", 3),
    ("[laser]\n[laser]\n", 2),
    ("[laser]\n[experiment]\nslots = 1.5\n", 3),
    ("[laser]\n[experiment]\nintervals_ns = 2, x\n", 3),
    ("[laser]\nkappa = nan\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as exc:
        parse_config_text(text)
    assert exc.value.line == line


@pytest.mark.parametrize("text,field", [
    ("[laser]\n[drive]\nrise_fall_ps = 600\n", "rise_fall_ps"),
    ("[laser]\n[experiment]\nintervals_ns = 2, 20\n", "intervals_ns"),
    ("[laser]\n[experiment]\ngap_cap = 1\n", "gap_cap"),
    ("[laser]\n[experiment]\nclock_mhz = 0\n", "clock_mhz"),
    ("[run]\nseed = -3\n[laser]\n", "seed"),
])
def test_cross_field_validation(text, field):
    with pytest.raises(ValidationError) as exc:
        parse_config_text(text)
    assert exc.value.field == field


def test_comments_and_partial_sections():
    cfg = parse_config_text("# note\n[laser]  # defaults\nA_per_s = 2e8\n[run]\nseed = 5\n")
    assert cfg.laser.A == 2e8 and cfg.seed == 5 and cfg.drive == RunConfig().drive


@given(
    a=st.floats(1e7, 1e9), tau=st.floats(1e-12, 5e-12), seed=st.integers(0, 2**64 - 1),
    fwhm=st.floats(200, 1000), dcs=st.lists(st.floats(0, 0.95), min_size=1, max_size=5),
)
def test_round_trip(a, tau, seed, fwhm, dcs):
    base = RunConfig()
    cfg = base.replace(laser=base.laser.replace(A=a, tau_p=tau), seed=seed,
                       drive=type(base.drive)(fwhm_ps=fwhm),
                       experiment=type(base.experiment)(dc_fracs=tuple(dcs)))
    assert parse_config_text(serialize_config(cfg)) == cfg
