import pytest

from metermarket.config import (
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
    load_config,
    parse_config_text,
)


def test_empty_text_gives_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("# nothing overridden\n\n")
    config = load_config(path)
    assert config == ExperimentConfig()
    assert config.prices().underage == pytest.approx(0.08)


def test_values_comments_and_lists():
    text = (
        "retail = 0.25        # EUR/kWh\n"
        "gamma_grid = 0.0, 0.5, 1.0\n"
        "scenarios = uni,rand\n"
        "n_trials=7\n"
    )
    config = config_from_mapping(parse_config_text(text))
    assert config.retail == 0.25
    assert config.gamma_grid == (0.0, 0.5, 1.0)
    assert config.scenarios == ("uni", "rand")
    assert config.n_trials == 7


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown configuration keys: retial"):
        config_from_mapping({"retial": "0.2"})


def test_syntax_errors_name_the_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("retail = 0.2\nnonsense line\n")
    with pytest.raises(ConfigError, match="duplicate key 'retail'"):
        parse_config_text("retail = 0.2\nretail = 0.3\n")


def test_type_errors_are_specific():
    with pytest.raises(ConfigError, match="n_trials: cannot parse 'many' as int"):
        config_from_mapping({"n_trials": "many"})
    with pytest.raises(ConfigError, match="retail: cannot parse"):
        config_from_mapping({"retail": "cheap"})


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"confidence": "1.5"}, "confidence"),
        ({"gamma_grid": "-0.5, 1.0"}, "gamma_grid"),
        ({"scenarios": "uni, nope"}, "scenarios"),
        ({"metrics": "dp, exact"}, "metrics"),
        ({"lag_preset": "hourly"}, "lag_preset"),
        ({"bid_rule": "oracle"}, "bid_rule"),
        ({"k_policy": "magic"}, "k_policy"),
        ({"epochs": "0"}, "epochs"),
        ({"learning_rate": "0"}, "learning_rate"),
        ({"dp_delta": "2"}, "dp_delta"),
    ],
)
def test_validation_battery(overrides, message):
    with pytest.raises(ConfigError, match=message):
        config_from_mapping(overrides)


def test_missing_config_file_raises_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError, match="config file not found"):
        load_config(tmp_path / "absent.cfg")


def test_referenced_files_resolve_against_config_dir(tmp_path):
    (tmp_path / "meters.csv").write_text("id,timestamp,kwh\n")
    path = tmp_path / "run.cfg"
    path.write_text("data_csv = meters.csv\n")
    config = load_config(path)
    assert config.data_csv == str(tmp_path / "meters.csv")


def test_missing_referenced_file_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("data_csv = nowhere.csv\n")
    with pytest.raises(ConfigError, match="data_csv points to a missing file"):
        load_config(path)


def test_none_literal_clears_path():
    config = config_from_mapping({"data_csv": "none"})
    assert config.data_csv is None
