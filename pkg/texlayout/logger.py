# texlayout/logger.py

import os
import sys
import logging
import contextvars
from contextlib import contextmanager
from flask import current_app, has_app_context
from logging.handlers import RotatingFileHandler # For file logging

_MAIN_APP_LOGGER_NAME = 'texlayout' # Default name, updated by setup_logger

# Document currently processed by this thread; '-' outside a document.
_current_doc = contextvars.ContextVar('texlayout_doc', default='-')

LOG_FORMAT = '%(asctime)s [%(levelname)s] [%(doc)s] [%(name)s:%(funcName)s:%(lineno)d] %(message)s'


class DocumentContextFilter(logging.Filter):
    """Stamps every record with the id of the document being processed (`%(doc)s`)."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, 'doc'):
            record.doc = _current_doc.get()
        return True


@contextmanager
def document_context(doc: str):
    """
    Tags log records emitted inside the block with `doc`.

    Worker threads do not inherit the tag; submit work through
    `contextvars.copy_context().run` to carry it over.
    """
    token = _current_doc.set(str(doc))
    try:
        yield
    finally:
        _current_doc.reset(token)


def _file_handler(app, formatter: logging.Formatter, log_level: int):
    """Rotating file handler at LOG_FILE, or instance/logs/texlayout.log; None if the directory is unusable."""
    log_file_path = app.config.get('LOG_FILE') or os.path.join(app.instance_path, 'logs', 'texlayout.log')
    log_dir = os.path.dirname(os.path.abspath(log_file_path))
    try:
        os.makedirs(log_dir, exist_ok=True)
    except OSError as e:
        app.logger.error(f"Could not create log directory {log_dir}: {e}", exc_info=True)
        return None

    file_handler = RotatingFileHandler(
        log_file_path,
        maxBytes=1024 * 1024 * 5,  # 5 MB per file
        backupCount=5              # Keep 5 backup files
    )
    file_handler.setLevel(log_level)
    file_handler.setFormatter(formatter)
    return file_handler


def setup_logger(app):
    """
    Configures the application logger (app.logger, named 'texlayout').

    Console output goes to stderr so that command results on stdout stay
    machine-readable JSON. Outside of tests a rotating log file is added.
    Every handler carries a DocumentContextFilter, so batch logs from
    parallel workers stay attributable to their document. Pre-existing
    handlers are removed first: tests build many apps in one process.

    Args:
        app (Flask): The Flask application instance.
    """
    log_level_str = app.config.get('LOG_LEVEL', 'INFO').upper()
    log_level = getattr(logging, log_level_str, logging.INFO)

    for handler in list(app.logger.handlers):
        app.logger.removeHandler(handler)
        handler.close()

    for log_filter_item in list(app.logger.filters):
        app.logger.removeFilter(log_filter_item)

    app.logger.setLevel(log_level)
    formatter = logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')
    context_filter = DocumentContextFilter()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(context_filter)
    app.logger.addHandler(console_handler)

    if not app.config.get('TESTING'): # Don't create log files during testing
        file_handler = _file_handler(app, formatter, log_level)
        if file_handler is not None:
            file_handler.addFilter(context_filter)
            app.logger.addHandler(file_handler)
            app.logger.debug(f"File logging enabled. Log file: {file_handler.baseFilename}")
        else:
            app.logger.warning("File logging disabled; console only.")

    # Module loggers (texlayout.services.*) reach these handlers as children.
    app.logger.propagate = False

    global _MAIN_APP_LOGGER_NAME
    _MAIN_APP_LOGGER_NAME = app.logger.name

    app.logger.debug(f"Application logger '{_MAIN_APP_LOGGER_NAME}' configured. Level: {log_level_str}.")


def get_logger(name: str = None) -> logging.Logger:
    """
    Retrieves a logger instance.
    If 'name' is None, it returns the current app's configured logger.
    If 'name' is provided, it returns a logger with that specific name.

    Works outside an application context too, so services stay usable from
    plain Python.

    Args:
        name (str, optional): The name of the logger. If None, defaults to the main app logger.

    Returns:
        logging.Logger: The logger instance.
    """
    if name is None:
        if has_app_context() and hasattr(current_app, 'logger'):
            return current_app.logger
        return logging.getLogger(_MAIN_APP_LOGGER_NAME)

    return logging.getLogger(name)
