import pytest

import config
from config import Config, get_config, overridden


def test_testing_environment_is_selected():
    cfg = get_config()
    assert isinstance(cfg, config.TestingConfig)
    assert cfg is get_config()
    assert cfg.validate_config()


def test_with_overrides_returns_copy():
    cfg = get_config()
    changed = cfg.with_overrides(decomposition_tol="1e-6")
    assert changed.DECOMPOSITION_TOL == 1e-6
    assert cfg.DECOMPOSITION_TOL == Config.DECOMPOSITION_TOL
    with pytest.raises(KeyError):
        cfg.with_overrides(not_a_setting=1)


def test_overridden_restores_values():
    cfg = get_config()
    before = cfg.IQ_TOL
    with overridden(iq_tol=0.5) as active:
        assert active is cfg
        assert cfg.IQ_TOL == 0.5
    assert cfg.IQ_TOL == before
    assert "IQ_TOL" not in vars(cfg)


def test_overridden_restores_on_error():
    cfg = get_config()
    with pytest.raises(RuntimeError):
        with overridden(tie_tolerance=1e-3):
            raise RuntimeError("boom")
    assert cfg.TIE_TOLERANCE == Config.TIE_TOLERANCE


def test_search_config_from_settings():
    search = get_config().get_search_config(restarts=3, seed=11)
    assert search.restarts == 3
    assert search.seed == 11
    assert get_config().get_search_config().restarts == config.TestingConfig.SEARCH_RESTARTS


def test_tolerances_listing():
    tolerances = get_config().get_tolerances()
    assert set(tolerances) == {name.lower() for name in Config.TOLERANCE_NAMES}
    assert all(value > 0 for value in tolerances.values())


def test_invalid_settings_fail_validation():
    assert not get_config().with_overrides(search_decay=1.5).validate_config()
