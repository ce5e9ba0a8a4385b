# texlayout/services/exceptions.py

class AppException(Exception):
    """
    Base class for custom pipeline exceptions.
    This allows for consistent error handling across the stages and lets the
    command layer turn any failure into a structured message and a process
    exit code.

    Attributes:
        exit_code (int): The process exit code the command layer should use
                         when this exception reaches it uncaught.
        user_message (str): A short message describing the error, safe to print
                            on the command line.
        errors (dict): A dictionary that can hold field-specific error messages,
                       particularly useful for schema validation failures.
        log_message (str): A more detailed message intended for the log file.
        original_exception (Exception): If this exception wraps another caught
                                        exception, the original is kept here.
    """
    exit_code = 1
    user_message = "The annotation pipeline failed. See the log for details."

    def __init__(self, message: str = None, exit_code: int = None,
                 errors: dict = None, log_message: str = None,
                 original_exception: Exception = None):
        """
        Initializes the AppException instance.

        Args:
            message (str, optional): Overrides the default user_message for this instance.
            exit_code (int, optional): Overrides the default exit_code for this instance.
            errors (dict, optional): Field-specific error messages,
                                     e.g., {"relations[3].to_unit": "unknown unit 42"}.
            log_message (str, optional): A specific message for logging. If None, the
                                         user-facing message is used.
            original_exception (Exception, optional): The exception that triggered this one.
        """
        super().__init__(message if message is not None else self.user_message)

        if exit_code is not None:
            self.exit_code = exit_code

        self.user_facing_message = message if message is not None else self.user_message
        self.errors = errors if errors is not None else {}
        self.log_message = log_message or self.user_facing_message
        self.original_exception = original_exception

    @property
    def code(self) -> str:
        """Short error code used in warning strings, e.g. 'CompileFailure'."""
        return type(self).__name__

    def to_dict(self) -> dict:
        """
        Serializes the exception information to a dictionary for JSON output
        on the command line.

        Returns:
            dict: The error code, the user-facing message and any field errors.
        """
        response = {"error": self.code, "message": self.user_facing_message}
        if self.errors:
            response["errors"] = self.errors
        return response


class ConfigError(AppException):
    """Raised when configuration values are missing or out of range."""
    user_message = "The pipeline configuration is invalid."
    exit_code = 3


# --- Ingest and preprocessing ---

class IngestError(AppException):
    """Base class for failures that prevent a source tree from being loaded."""
    user_message = "The LaTeX source could not be ingested."


class SourceIOError(IngestError):
    """The input path is missing or unreadable."""
    user_message = "The source path could not be read."


class MalformedArchive(IngestError):
    """The tar or gzip container is corrupt."""
    user_message = "The source archive is corrupt or not a tar/gzip file."


class EmptySource(IngestError):
    """The source contains no .tex file."""
    user_message = "The source contains no .tex files."


class NoMainFile(IngestError):
    """No file carries a document-class declaration."""
    user_message = "No main LaTeX file (with \\documentclass) was found."


class IncludeCycle(IngestError):
    """\\input/\\include chains loop back onto a file already being expanded."""
    user_message = "The \\input/\\include graph contains a cycle."

    def __init__(self, chain: list = None, message: str = None, **kwargs):
        self.chain = list(chain or [])
        if message is None and self.chain:
            message = "Include cycle: " + " -> ".join(self.chain)
        super().__init__(message=message, **kwargs)


class IngestFailed(IngestError):
    """Pipeline-level wrapper: nothing could be emitted for the document."""
    user_message = "The document could not be ingested; no genome was produced."


# --- Segmentation ---

class SegmentationError(AppException):
    """The flattened source cannot be segmented (e.g. no document environment)."""
    user_message = "The LaTeX source does not contain exactly one document environment."


# --- Validation ---

class ValidationError(AppException):
    """Custom exception specifically for input validation failures."""
    user_message = "The input contains errors. Please check the details and try again."

    def __init__(self, message: str = None, errors: dict = None,
                 log_message: str = None, original_exception: Exception = None):
        super().__init__(
            message=(message or self.user_message),
            errors=errors,
            log_message=log_message,
            original_exception=original_exception
        )


class SchemaViolation(ValidationError):
    """A serialized genome does not match the canonical schema."""
    user_message = "The genome record violates the schema."


class LengthMismatch(ValidationError):
    """Prediction and ground-truth sequences differ in length."""
    user_message = "Predictions and ground truth have different lengths."


class PageMismatch(ValidationError):
    """Variant and baseline rasters differ in page count or page size."""
    user_message = "Variant and baseline pages do not have the same geometry."


# --- Rendering ---

class RenderError(AppException):
    """Base class for compile, raster and diff failures."""
    user_message = "Rendering failed."


class CompileFailure(RenderError):
    """The external LaTeX engine failed, timed out, or produced no PDF."""
    user_message = "The LaTeX engine failed to produce a PDF."

    def __init__(self, message: str = None, cause: str = "exit", log_tail: str = "", **kwargs):
        self.cause = cause
        self.log_tail = log_tail
        super().__init__(message=message, **kwargs)


class RasterFailure(RenderError):
    """The PDF could not be rasterized or has no pages."""
    user_message = "The PDF could not be rasterized."


class WrapFailure(RenderError):
    """Colour wrapping broke compilation for one unit's variant."""
    user_message = "The isolation variant for this unit did not compile."


class EmptyDiff(RenderError):
    """No pixel differs between a unit's variant and the baseline."""
    user_message = "The unit produced no visible ink."


class ConversionFailed(RenderError):
    """A graphic asset could not be converted to PNG."""
    user_message = "A figure could not be converted to PNG."
