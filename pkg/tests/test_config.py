# tests/test_config.py

import pytest

from config import Config, TestingConfig
from texlayout import create_app
from texlayout.services.exceptions import ConfigError
from texlayout.settings import PipelineSettings


def test_settings_from_config_reads_texlayout_keys():
    settings = PipelineSettings.from_config({
        'TEXLAYOUT_RASTER_DPI': 300,
        'TEXLAYOUT_CACHE_DIR': None,
        'TEXLAYOUT_LATEX_ENGINE': 'lualatex',
        'SECRET': 'ignored',
    })

    assert settings.raster_dpi == 300
    assert settings.latex_engine == 'lualatex'
    assert settings.cache_dir is None
    assert settings.diff_threshold == 16


def test_settings_overrides_skip_none():
    settings = PipelineSettings(scratch_root='/tmp/x').with_overrides(raster_dpi=72, cache_dir=None)

    assert settings.raster_dpi == 72
    assert settings.compile_cache_dir.as_posix() == '/tmp/x/texlayout-cache'


def test_testing_app_settings(app):
    settings = PipelineSettings.from_config(app.config)

    assert app.testing
    assert settings.render_workers == 2
    assert settings.keep_scratch is False


def test_apply_file_converts_types(app, tmp_path):
    path = tmp_path / 'settings.env'
    path.write_text('TEXLAYOUT_COLUMN_GAP_RATIO=0.1\nTEXLAYOUT_KEEP_SCRATCH=true\nTEXLAYOUT_LATEX_PASSES=3\n')

    Config.apply_file(app, str(path))

    assert app.config['TEXLAYOUT_COLUMN_GAP_RATIO'] == 0.1
    assert app.config['TEXLAYOUT_KEEP_SCRATCH'] is True
    assert app.config['TEXLAYOUT_LATEX_PASSES'] == 3


@pytest.mark.parametrize('line, key', [
    ('TEXLAYOUT_RASTER_DPI=many', 'TEXLAYOUT_RASTER_DPI'),
    ('TEXLAYOUT_DIFF_THRESHOLD=300', 'TEXLAYOUT_DIFF_THRESHOLD'),
    ('TEXLAYOUT_COLUMN_GAP_RATIO=1.5', 'TEXLAYOUT_COLUMN_GAP_RATIO'),
    ('TEXLAYOUT_LATEX_TEMPLATE={cmd} paper.tex', 'TEXLAYOUT_LATEX_TEMPLATE'),
    ('TEXLAYOUT_NOISE_POLICY=/nonexistent/policy.env', 'TEXLAYOUT_NOISE_POLICY'),
])
def test_apply_file_rejects_bad_values(app, tmp_path, line, key):
    path = tmp_path / 'settings.env'
    path.write_text(line + '\n')

    with pytest.raises(ConfigError) as excinfo:
        Config.apply_file(app, str(path))

    assert key in excinfo.value.errors
    assert excinfo.value.exit_code == 3


def test_apply_file_missing(app, tmp_path):
    with pytest.raises(ConfigError):
        Config.apply_file(app, str(tmp_path / 'absent.env'))


def test_create_app_validates_configuration(monkeypatch):
    monkeypatch.setattr(TestingConfig, 'TEXLAYOUT_RENDER_WORKERS', 0)

    with pytest.raises(ConfigError) as excinfo:
        create_app('testing')

    assert 'TEXLAYOUT_RENDER_WORKERS' in excinfo.value.errors
