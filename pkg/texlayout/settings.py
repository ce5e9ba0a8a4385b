# texlayout/settings.py

import os
import tempfile
from pathlib import Path
from dataclasses import dataclass, replace, fields
from typing import Mapping, Optional

from texlayout.logger import get_logger

logger = get_logger(__name__)

DEFAULT_NOISE_POLICY = str(Path(__file__).parent / 'data' / 'noise_policy.env')


@dataclass(frozen=True)
class PipelineSettings:
    """
    Every tunable the services read. Built from the Flask `app.config` by the
    command layer (see `from_config`) so services never import Flask.
    """
    latex_engine: str = 'pdflatex'
    latex_template: str = '{cmd} -interaction=nonstopmode {main}'
    latex_timeout: float = 300.0
    latex_passes: int = 2
    rasterizer: str = 'pymupdf'
    raster_dpi: int = 150
    diff_threshold: int = 16
    column_gap_ratio: float = 0.05
    figure_converter: str = 'convert'
    figure_template: str = '{cmd} {in} {out}'
    figure_timeout: float = 60.0
    scratch_root: str = tempfile.gettempdir()
    cache_dir: Optional[str] = None
    render_workers: int = os.cpu_count() or 1
    noise_policy: str = DEFAULT_NOISE_POLICY
    refs_dir: Optional[str] = None
    keep_scratch: bool = False

    @property
    def compile_cache_dir(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else Path(self.scratch_root) / 'texlayout-cache'

    @classmethod
    def from_config(cls, config: Mapping) -> "PipelineSettings":
        """
        Reads the TEXLAYOUT_* keys of a Flask config (or any mapping).

        Args:
            config (Mapping): Usually `current_app.config`.

        Returns:
            PipelineSettings: Settings with defaults for absent keys.
        """
        values = {}
        for settings_field in fields(cls):
            key = f"TEXLAYOUT_{settings_field.name.upper()}"
            if key in config and config[key] is not None:
                values[settings_field.name] = config[key]
        return cls(**values)

    def with_overrides(self, **overrides) -> "PipelineSettings":
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})
