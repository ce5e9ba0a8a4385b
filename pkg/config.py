# config.py
import os
import logging # Used for logging issues during config loading itself
import tempfile
from dotenv import load_dotenv, dotenv_values

# Configure a basic logger for early messages from this config file.
# This helps diagnose issues if .env loading fails before the application
# logger is fully set up.
config_module_logger = logging.getLogger(__name__)

# Determine the absolute path to the project root directory.
# This assumes config.py is located directly in the project root.
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
# Construct the path to the .env file located in the project root.
DOTENV_PATH = os.path.join(PROJECT_ROOT, '.env')

if os.path.exists(DOTENV_PATH):
    load_dotenv(DOTENV_PATH)
    config_module_logger.info(f"[config.py] Loaded environment variables from: {DOTENV_PATH}")
else:
    config_module_logger.debug(f"[config.py] .env file not found at '{DOTENV_PATH}'. "
                               f"Relying on the process environment and defaults.")


def _env_bool(name: str, default: str = 'false') -> bool:
    return os.environ.get(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


# Types of the settings that may be overridden from a --config file.
SETTING_TYPES: dict[str, type] = {
    'TEXLAYOUT_LATEX_ENGINE': str,
    'TEXLAYOUT_LATEX_TEMPLATE': str,
    'TEXLAYOUT_LATEX_TIMEOUT': float,
    'TEXLAYOUT_LATEX_PASSES': int,
    'TEXLAYOUT_RASTERIZER': str,
    'TEXLAYOUT_RASTER_DPI': int,
    'TEXLAYOUT_DIFF_THRESHOLD': int,
    'TEXLAYOUT_COLUMN_GAP_RATIO': float,
    'TEXLAYOUT_FIGURE_CONVERTER': str,
    'TEXLAYOUT_FIGURE_TEMPLATE': str,
    'TEXLAYOUT_FIGURE_TIMEOUT': float,
    'TEXLAYOUT_SCRATCH_ROOT': str,
    'TEXLAYOUT_CACHE_DIR': str,
    'TEXLAYOUT_RENDER_WORKERS': int,
    'TEXLAYOUT_NOISE_POLICY': str,
    'TEXLAYOUT_REFS_DIR': str,
    'TEXLAYOUT_KEEP_SCRATCH': bool,
    'LOG_LEVEL': str,
    'LOG_FILE': str,
}


class Config:
    """
    Base configuration class for the annotation pipeline.

    Every value is read from an environment variable with a default, so a
    `.env` file or the shell can retune the pipeline without code changes.

    Attributes:
        TEXLAYOUT_LATEX_ENGINE (str): LaTeX compiler binary.
        TEXLAYOUT_LATEX_TEMPLATE (str): Compile command template with {cmd} and {main}.
        TEXLAYOUT_LATEX_TIMEOUT (float): Seconds per compiler invocation.
        TEXLAYOUT_LATEX_PASSES (int): Compiler passes for the baseline render.
        TEXLAYOUT_RASTERIZER (str): 'pymupdf' or a command template with {pdf}, {dpi}, {out}.
        TEXLAYOUT_RASTER_DPI (int): Page raster resolution.
        TEXLAYOUT_DIFF_THRESHOLD (int): Gray-level difference (0-255) counted as ink.
        TEXLAYOUT_COLUMN_GAP_RATIO (float): Horizontal gap, as a fraction of page
                                            width, that splits a unit into columns.
        TEXLAYOUT_FIGURE_CONVERTER (str): Binary converting graphics to PNG.
        TEXLAYOUT_FIGURE_TEMPLATE (str): Converter command template with {cmd}, {in}, {out}.
        TEXLAYOUT_FIGURE_TIMEOUT (float): Seconds per figure conversion.
        TEXLAYOUT_SCRATCH_ROOT (str): Parent directory of per-compile scratch dirs.
        TEXLAYOUT_CACHE_DIR (str): Compile cache; defaults under the scratch root.
        TEXLAYOUT_RENDER_WORKERS (int): Parallel variant compiles per document.
        TEXLAYOUT_NOISE_POLICY (str): Path of the noise-token policy file.
        TEXLAYOUT_REFS_DIR (str): Directory of `<doc_id>.refs.json` reference boxes.
        TEXLAYOUT_KEEP_SCRATCH (bool): Keep scratch dirs for debugging.
        LOG_LEVEL (str): Logging level for the application logger.
        LOG_FILE (str, optional): Rotating log file; defaults to instance/logs/texlayout.log.
    """
    # --- External tools ---
    TEXLAYOUT_LATEX_ENGINE: str = os.environ.get('TEXLAYOUT_LATEX_ENGINE', 'pdflatex')
    TEXLAYOUT_LATEX_TEMPLATE: str = os.environ.get('TEXLAYOUT_LATEX_TEMPLATE', '{cmd} -interaction=nonstopmode {main}')
    TEXLAYOUT_LATEX_TIMEOUT: float = float(os.environ.get('TEXLAYOUT_LATEX_TIMEOUT', 300))
    TEXLAYOUT_LATEX_PASSES: int = int(os.environ.get('TEXLAYOUT_LATEX_PASSES', 2))
    TEXLAYOUT_RASTERIZER: str = os.environ.get('TEXLAYOUT_RASTERIZER', 'pymupdf')
    TEXLAYOUT_FIGURE_CONVERTER: str = os.environ.get('TEXLAYOUT_FIGURE_CONVERTER', 'convert')
    TEXLAYOUT_FIGURE_TEMPLATE: str = os.environ.get('TEXLAYOUT_FIGURE_TEMPLATE', '{cmd} {in} {out}')
    TEXLAYOUT_FIGURE_TIMEOUT: float = float(os.environ.get('TEXLAYOUT_FIGURE_TIMEOUT', 60))

    # --- Box extraction ---
    TEXLAYOUT_RASTER_DPI: int = int(os.environ.get('TEXLAYOUT_RASTER_DPI', 150))
    TEXLAYOUT_DIFF_THRESHOLD: int = int(os.environ.get('TEXLAYOUT_DIFF_THRESHOLD', 16))
    TEXLAYOUT_COLUMN_GAP_RATIO: float = float(os.environ.get('TEXLAYOUT_COLUMN_GAP_RATIO', 0.05))

    # --- Working directories and data ---
    TEXLAYOUT_SCRATCH_ROOT: str = os.environ.get('TEXLAYOUT_SCRATCH_ROOT', tempfile.gettempdir())
    TEXLAYOUT_CACHE_DIR: str | None = os.environ.get('TEXLAYOUT_CACHE_DIR')
    TEXLAYOUT_RENDER_WORKERS: int = int(os.environ.get('TEXLAYOUT_RENDER_WORKERS', os.cpu_count() or 1))
    TEXLAYOUT_NOISE_POLICY: str = os.environ.get(
        'TEXLAYOUT_NOISE_POLICY', os.path.join(PROJECT_ROOT, 'texlayout', 'data', 'noise_policy.env'))
    TEXLAYOUT_REFS_DIR: str | None = os.environ.get('TEXLAYOUT_REFS_DIR')
    TEXLAYOUT_KEEP_SCRATCH: bool = _env_bool('TEXLAYOUT_KEEP_SCRATCH')

    # --- Application Behavior Configurations ---
    LOG_LEVEL: str = os.environ.get('LOG_LEVEL', 'INFO').upper()
    LOG_FILE: str | None = os.environ.get('LOG_FILE')

    @staticmethod
    def init_app(app):
        """
        Validates the loaded values once the Flask app exists and its
        `app.config` has been populated from this Config object.

        Args:
            app (Flask): The Flask application instance.

        Raises:
            ConfigError: If a value is out of range.
        """
        from texlayout.services.exceptions import ConfigError

        app_logger = app.logger
        problems = {}

        for key in ('TEXLAYOUT_RASTER_DPI', 'TEXLAYOUT_LATEX_TIMEOUT', 'TEXLAYOUT_FIGURE_TIMEOUT',
                    'TEXLAYOUT_RENDER_WORKERS', 'TEXLAYOUT_LATEX_PASSES'):
            if app.config.get(key) is None or app.config[key] <= 0:
                problems[key] = f"must be positive, got {app.config.get(key)!r}"

        threshold = app.config.get('TEXLAYOUT_DIFF_THRESHOLD')
        if threshold is None or not 0 <= threshold <= 255:
            problems['TEXLAYOUT_DIFF_THRESHOLD'] = f"must lie in [0, 255], got {threshold!r}"

        gap_ratio = app.config.get('TEXLAYOUT_COLUMN_GAP_RATIO')
        if gap_ratio is None or not 0 < gap_ratio < 1:
            problems['TEXLAYOUT_COLUMN_GAP_RATIO'] = f"must lie in (0, 1), got {gap_ratio!r}"

        for key, placeholders in (('TEXLAYOUT_LATEX_TEMPLATE', ('{main}',)),
                                  ('TEXLAYOUT_FIGURE_TEMPLATE', ('{in}', '{out}'))):
            template = app.config.get(key) or ''
            missing = [placeholder for placeholder in placeholders if placeholder not in template]
            if missing:
                problems[key] = f"template is missing {', '.join(missing)}"

        if not os.path.isfile(app.config.get('TEXLAYOUT_NOISE_POLICY') or ''):
            problems['TEXLAYOUT_NOISE_POLICY'] = f"policy file not found: {app.config.get('TEXLAYOUT_NOISE_POLICY')!r}"

        if problems:
            app_logger.critical(f"Invalid configuration: {problems}")
            raise ConfigError(
                message="The pipeline configuration is invalid: " + "; ".join(f"{key} {reason}" for key, reason in problems.items()),
                errors=problems,
            )

        app_logger.debug("Config.init_app() validated the pipeline settings.")

    @classmethod
    def apply_file(cls, app, path: str) -> None:
        """
        Overlays a dotenv-format settings file (the `--config` option) onto
        `app.config`, converting each known key to its type, then re-validates.

        Args:
            app (Flask): The Flask application instance.
            path (str): File with KEY=value lines.

        Raises:
            ConfigError: If the file is unreadable or a value does not convert.
        """
        from texlayout.services.exceptions import ConfigError

        if not os.path.isfile(path):
            raise ConfigError(message=f"Configuration file not found: {path}")

        problems = {}
        for key, raw_value in dotenv_values(path).items():
            value_type = SETTING_TYPES.get(key)
            if value_type is None:
                app.logger.warning(f"Ignoring unknown configuration key '{key}' in {path}")
                continue
            try:
                if value_type is bool:
                    app.config[key] = str(raw_value).strip().lower() in ('1', 'true', 'yes', 'on')
                else:
                    app.config[key] = value_type(raw_value)
            except (TypeError, ValueError) as e:
                problems[key] = f"cannot convert {raw_value!r} to {value_type.__name__}: {e}"

        if problems:
            raise ConfigError(message=f"Invalid values in configuration file {path}", errors=problems)

        app.logger.info(f"Applied configuration file {path}")
        cls.init_app(app)


class DevelopmentConfig(Config):
    """
    Configuration for interactive use: verbose logging and scratch
    directories kept for inspection.
    """
    DEBUG: bool = True
    LOG_LEVEL: str = os.environ.get('LOG_LEVEL_DEV', 'DEBUG').upper()
    TEXLAYOUT_KEEP_SCRATCH: bool = _env_bool('TEXLAYOUT_KEEP_SCRATCH', 'true')


class ProductionConfig(Config):
    """
    Configuration for batch dataset builds.
    """
    DEBUG: bool = False
    LOG_LEVEL: str = os.environ.get('LOG_LEVEL_PROD', 'INFO').upper()


class TestingConfig(Config):
    """
    Configuration for the test suite. File logging is skipped by the logger
    when TESTING is set; the compile cache lives in a dedicated temp dir.
    """
    TESTING: bool = True
    DEBUG: bool = True
    LOG_LEVEL: str = 'DEBUG'
    TEXLAYOUT_RENDER_WORKERS: int = 2
    TEXLAYOUT_KEEP_SCRATCH: bool = False
    TEXLAYOUT_REFS_DIR: str | None = None


# Dictionary to map configuration names to their respective classes.
# The application factory selects one by name.
config: dict[str, type[Config]] = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': ProductionConfig # Configuration to use if TEXLAYOUT_CONFIG is not set or invalid.
}
