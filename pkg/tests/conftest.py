# tests/conftest.py

import io
import re
import shutil
import tarfile
from pathlib import Path

import numpy as np
import pytest

from texlayout import create_app
from texlayout.models.page import PageImage
from texlayout.models.source import FlatSource, SourceTree
from texlayout.services import preprocess_service, render_service
from texlayout.services.exceptions import CompileFailure
from texlayout.settings import DEFAULT_NOISE_POLICY, PipelineSettings

GOLDEN_TEX = r"""\documentclass{article}
\usepackage{amsmath}
\title{A Study of Layouts}
\begin{document}
\maketitle
\begin{abstract}
We label documents.
\end{abstract}
\section{Introduction}\label{sec:intro}
Layouts matter, see Figure~\ref{fig:one} and $x^2$.

\begin{figure}[t]
\centering
\includegraphics[width=0.5\linewidth]{plot}
\caption{A plot.}\label{fig:one}
\end{figure}

\begin{equation}
E = mc^2 \label{eq:energy}
\end{equation}
As shown in Section~\ref{sec:intro}.
\section{Method}
We follow Eq.~\eqref{eq:energy}.
\end{document}
"""

# Attribute names of GOLDEN_TEX units in reading order.
GOLDEN_ATTRIBUTES = ['PaperTitle', 'Abstract', 'Title', 'Text-EQ', 'Figure', 'Caption',
                     'Equation', 'Text', 'Title', 'Text']

BROKEN_TEX = r"""\documentclass{article}
\begin{document}
\section{Broken}
This paragraph uses \brokenmacro{} which no package defines.
\end{document}
"""

FAKE_PAGE_SIZE = (200, 300)  # width, height
FULL_RENDER_UNITS = 10


def fake_unit_box(unit_id: int):
    """(x0, y0, x1, y1) of the ink the fake rasterizer draws for a unit."""
    return 10, 10 + 8 * unit_id, 60, 15 + 8 * unit_id


def preprocessed(text: str) -> FlatSource:
    """A single-file main.tex run through the default preprocessing chain."""
    policy = preprocess_service.load_noise_policy(DEFAULT_NOISE_POLICY)
    return preprocess_service.preprocess_source(SourceTree(files={'main.tex': text.encode('utf-8')}), 'main.tex', policy)


def write_tree(root: Path, files: dict) -> Path:
    """Materializes {relative path: str | bytes} under root."""
    for relative, content in files.items():
        path = root / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, str):
            path.write_text(content, encoding='utf-8')
        else:
            path.write_bytes(content)
    return root


def make_tar(path: Path, files: dict, gzip: bool = True) -> Path:
    with tarfile.open(path, 'w:gz' if gzip else 'w') as archive:
        for relative, content in files.items():
            data = content.encode('utf-8') if isinstance(content, str) else content
            info = tarfile.TarInfo(relative)
            info.size = len(data)
            archive.addfile(info, io.BytesIO(data))
    return path


@pytest.fixture
def settings(tmp_path):
    return PipelineSettings(
        scratch_root=str(tmp_path / 'scratch'),
        cache_dir=str(tmp_path / 'cache'),
        render_workers=2,
    )


@pytest.fixture
def app(tmp_path):
    app = create_app('testing')
    app.config.update(
        TEXLAYOUT_SCRATCH_ROOT=str(tmp_path / 'scratch'),
        TEXLAYOUT_CACHE_DIR=str(tmp_path / 'cache'),
    )
    return app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def golden_doc(tmp_path):
    return write_tree(tmp_path / 'docs' / 'golden', {'main.tex': GOLDEN_TEX})


@pytest.fixture
def fake_latex(monkeypatch):
    """
    Replaces the LaTeX engine and the rasterizer. The fake "PDF" is the
    source text; rasterizing it draws one band per black unit, read from the
    isolation marker: nothing for the baseline, the target unit for a
    variant, the first FULL_RENDER_UNITS bands for the full render. Sources containing
    \\brokenmacro fail to compile.
    """
    calls = {'compile': 0}

    def compile_pdf(src, workdir, settings, tree=None, main_file='main.tex', passes=None, aux_seed=None):
        calls['compile'] += 1
        if '\\brokenmacro' in src.text:
            raise CompileFailure(message="LaTeX engine exited with status 1 (pass 1)", cause='exit',
                                 log_tail="! Undefined control sequence.")
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        pdf = workdir / Path(main_file).with_suffix('.pdf').name
        pdf.write_text(src.text, encoding='utf-8')
        return pdf

    def rasterize(pdf, dpi, settings=None):
        text = Path(pdf).read_text(encoding='utf-8')
        target = re.search(r'target=(\w+)', text).group(1)
        width, height = FAKE_PAGE_SIZE
        pixels = np.full((height, width), 255, dtype=np.uint8)
        if target == 'all':
            inked = range(FULL_RENDER_UNITS)
        elif target == 'none':
            inked = []
        else:
            inked = [int(target)]
        for unit_id in inked:
            x0, y0, x1, y1 = fake_unit_box(unit_id)
            pixels[y0:y1, x0:x1] = 0
        return [PageImage(0, dpi, pixels)]

    monkeypatch.setattr(render_service, 'compile_pdf', compile_pdf)
    monkeypatch.setattr(render_service, 'rasterize', rasterize)
    return calls


requires_latex = pytest.mark.skipif(shutil.which('pdflatex') is None, reason="pdflatex not installed")
