import pytest

from nermine.config import (
    ConfigError,
    PipelineConfig,
    build_config,
    load_config,
    parse_config,
)


def test_defaults_are_valid():
    cfg = PipelineConfig()
    assert cfg.mode == "intersected"
    assert cfg.iterations == 5
    assert cfg.keep_fraction == 0.35
    assert cfg.no_entity_rate == 0.01
    assert cfg.split_ratios() == (0.98, 0.01, 0.01)
    assert cfg.seed == 0
    assert cfg.jobs == 1


def test_parse_config_reads_comments_and_blanks():
    text = "# corpus\nbitext = data/pairs.tsv\n\nmode=forward_only\niterations = 3\n"
    values = parse_config(text)
    assert values == {
        "bitext": "data/pairs.tsv",
        "mode": "forward_only",
        "iterations": "3",
    }


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("bogus=1\n")


def test_parse_config_rejects_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("seed=1\nseed=2\n")


def test_parse_config_rejects_missing_equals():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("seed=1\nnonsense\n")


def test_build_config_coerces_types():
    cfg = build_config(
        {
            "iterations": "7",
            "use_null": "false",
            "keep_fraction": "0.5",
            "vocab_cap": "100",
            "jobs": "4",
        },
        {},
    )
    assert cfg.iterations == 7
    assert cfg.use_null is False
    assert cfg.keep_fraction == 0.5
    assert cfg.vocab_cap == 100
    assert cfg.jobs == 4


def test_build_config_override_wins():
    cfg = build_config({"seed": "1", "mode": "forward_only"}, {"seed": 9})
    assert cfg.seed == 9
    assert cfg.mode == "forward_only"


def test_build_config_none_override_is_skipped():
    cfg = build_config({"seed": "3"}, {"seed": None, "jobs": None})
    assert cfg.seed == 3
    assert cfg.jobs == 1


def test_build_config_bad_value_reports_key():
    with pytest.raises(ConfigError, match="iterations"):
        build_config({"iterations": "many"}, {})


def test_bad_mode_rejected():
    with pytest.raises(ConfigError, match="mode"):
        build_config({}, {"mode": "union"})


def test_split_ratios_must_sum_to_one():
    with pytest.raises(ConfigError, match="sum to 1"):
        build_config({}, {"split_train": 0.5, "split_dev": 0.2, "split_test": 0.2})


def test_split_ratios_reject_negative():
    with pytest.raises(ConfigError):
        build_config({}, {"split_train": 1.2, "split_dev": -0.1, "split_test": -0.1})


def test_em_validation_surfaces_as_config_error():
    with pytest.raises(ConfigError):
        build_config({}, {"iterations": 0})
    with pytest.raises(ConfigError):
        build_config({}, {"keep_fraction": 0.0})


def test_jobs_must_be_positive():
    with pytest.raises(ConfigError, match="jobs"):
        build_config({}, {"jobs": 0})


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("bitext=x.tsv\nseed=42\nno_entity_rate=0.05\n", encoding="utf-8")
    cfg = build_config(load_config(path), {})
    assert cfg.bitext == "x.tsv"
    assert cfg.seed == 42
    assert cfg.no_entity_rate == 0.05


def test_workpath_joins_workdir(tmp_path):
    cfg = build_config({}, {"workdir": str(tmp_path)})
    assert cfg.workpath("scores.tsv") == tmp_path / "scores.tsv"


def test_sub_configs_carry_values():
    cfg = build_config(
        {}, {"iterations": 2, "prob_floor": 1e-9, "use_null": False, "seed": 5}
    )
    em = cfg.em_config()
    assert em.iterations == 2
    assert em.prob_floor == 1e-9
    assert em.use_null is False
    fc = cfg.filter_config()
    assert fc.seed == 5
