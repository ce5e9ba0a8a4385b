# texlayout/__init__.py
from flask import Flask

# config.py lives at the project root
from config import config

from .logger import setup_logger, get_logger


def create_app(config_name: str = 'default') -> Flask:
    """
    Application Factory Function.
    Creates, configures, and returns the Flask application whose CLI exposes
    the pipeline commands. Several apps with different configurations can
    coexist in one process, which the test suite relies on.

    Args:
        config_name (str): The name of the configuration to use ('development',
                           'production', 'testing'). Corresponds to keys in the
                           `config` dict from `config.py`. Defaults to 'default'.

    Returns:
        Flask: The configured Flask application instance.

    Raises:
        ConfigError: If the selected configuration holds invalid values.
    """
    app = Flask(__name__, instance_relative_config=False)

    selected_config_obj = config.get(config_name, config['default'])
    app.config.from_object(selected_config_obj)

    setup_logger(app)
    logger = get_logger()

    if hasattr(selected_config_obj, 'init_app'):
        selected_config_obj.init_app(app)

    logger.info(f"Flask application '{app.name}' created using '{config_name}' configuration.")
    logger.debug(f"Application Testing Mode: {app.testing}")
    logger.debug(f"LaTeX engine: {app.config['TEXLAYOUT_LATEX_ENGINE']}, rasterizer: {app.config['TEXLAYOUT_RASTERIZER']}, "
                 f"dpi: {app.config['TEXLAYOUT_RASTER_DPI']}")

    logger.info("Registering command blueprints...")

    from .pipeline import pipeline_bp

    app.register_blueprint(pipeline_bp)
    logger.debug(f"Registered blueprint: '{pipeline_bp.name}'")

    from .evaluation import evaluation_bp

    app.register_blueprint(evaluation_bp)
    logger.debug(f"Registered blueprint: '{evaluation_bp.name}'")

    logger.info("All blueprints registered.")
    return app
