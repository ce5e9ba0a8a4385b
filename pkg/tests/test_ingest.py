# tests/test_ingest.py

import gzip

import pytest

from texlayout.models.source import SourceTree
from texlayout.services import ingest_service
from texlayout.services.exceptions import ConversionFailed, EmptySource, MalformedArchive, NoMainFile, SourceIOError

from conftest import GOLDEN_TEX, make_tar, write_tree


def test_ingest_directory_collects_files_and_figures(tmp_path):
    root = write_tree(tmp_path / 'paper', {
        'main.tex': GOLDEN_TEX,
        'sections/intro.tex': 'Intro.',
        'figs/plot.pdf': b'%PDF-1.4',
        'figs/photo.png': b'\x89PNG',
    })

    tree = ingest_service.ingest_archive(root)

    assert tree.tex_files == ['main.tex', 'sections/intro.tex']
    assert tree.figures == ['figs/photo.png', 'figs/plot.pdf']
    assert tree.files['main.tex'] == GOLDEN_TEX.encode('utf-8')


def test_ingest_bare_tex_file(tmp_path):
    path = tmp_path / 'note.tex'
    path.write_text(GOLDEN_TEX, encoding='utf-8')

    tree = ingest_service.ingest_archive(path)

    assert list(tree.files) == ['note.tex']


def test_ingest_tarball_skips_unsafe_members(tmp_path):
    archive = make_tar(tmp_path / '2101.00001.tar.gz', {
        './main.tex': GOLDEN_TEX,
        'plot.png': b'\x89PNG',
        '../evil.tex': 'escape',
    })

    tree = ingest_service.ingest_archive(archive)

    assert sorted(tree.files) == ['main.tex', 'plot.png']
    assert any(warning.startswith('UnsafePath') for warning in tree.warnings)


def test_ingest_gzipped_single_file_becomes_main_tex(tmp_path):
    path = tmp_path / '2101.00002.gz'
    path.write_bytes(gzip.compress(GOLDEN_TEX.encode('utf-8')))

    tree = ingest_service.ingest_archive(path)

    assert tree.files == {'main.tex': GOLDEN_TEX.encode('utf-8')}


def test_ingest_rejects_oversized_gzip(tmp_path, monkeypatch):
    monkeypatch.setattr(ingest_service, 'MAX_GZIP_SOURCE_BYTES', 1024)
    path = tmp_path / '2101.00003.gz'
    path.write_bytes(gzip.compress(('% filler line\n' * 400).encode('utf-8')))

    with pytest.raises(MalformedArchive) as excinfo:
        ingest_service.ingest_archive(path)

    assert excinfo.value.errors == {'size': '> 1024'}


def test_ingest_errors(tmp_path):
    with pytest.raises(SourceIOError):
        ingest_service.ingest_archive(tmp_path / 'missing.tar.gz')

    corrupt = tmp_path / 'corrupt.tar.gz'
    corrupt.write_bytes(b'definitely not an archive')
    with pytest.raises(MalformedArchive):
        ingest_service.ingest_archive(corrupt)

    no_tex = write_tree(tmp_path / 'figures-only', {'plot.png': b'\x89PNG'})
    with pytest.raises(EmptySource):
        ingest_service.ingest_archive(no_tex)


def test_source_tree_rejects_escaping_paths():
    with pytest.raises(ValueError):
        SourceTree(files={'../outside.tex': b''})


def test_detect_main_file_single_candidate():
    tree = SourceTree(files={'main.tex': GOLDEN_TEX.encode(), 'intro.tex': b'Some text.'})

    selection = ingest_service.detect_main_file(tree)

    assert selection.path == 'main.tex'
    assert not selection.ambiguous


def test_detect_main_file_prefers_candidate_with_document_body():
    tree = SourceTree(files={
        'a_template.tex': b'\\documentclass{article}\n% no body here\n',
        'paper.tex': GOLDEN_TEX.encode(),
    })

    selection = ingest_service.detect_main_file(tree)

    assert selection.path == 'paper.tex'
    assert selection.ambiguous
    assert selection.candidates == ('a_template.tex', 'paper.tex')


def test_detect_main_file_honours_readme_hint():
    tree = SourceTree(files={'a.tex': GOLDEN_TEX.encode(), 'b.tex': GOLDEN_TEX.encode()}, root_hint='b.tex')

    selection = ingest_service.detect_main_file(tree)

    assert selection.path == 'b.tex'
    assert not selection.ambiguous


def test_detect_main_file_ignores_commented_declaration():
    tree = SourceTree(files={'main.tex': b'% \\documentclass{article}\nHello.\n'})

    with pytest.raises(NoMainFile):
        ingest_service.detect_main_file(tree)


def test_normalize_figures_rewrites_references(settings, monkeypatch):
    monkeypatch.setattr(ingest_service, 'convert_figure', lambda data, extension, settings: b'converted')
    text = '\\documentclass{article}\n\\begin{document}\n\\includegraphics[width=2cm]{figs/plot}\n\\end{document}\n'
    tree = SourceTree(files={'main.tex': text.encode(), 'figs/plot.eps': b'%!PS'})

    normalized = ingest_service.normalize_figures(tree, settings)

    assert normalized.figures == ['figs/plot.png']
    assert normalized.files['figs/plot.png'] == b'converted'
    assert b'\\includegraphics[width=2cm]{figs/plot.png}' in normalized.files['main.tex']
    assert 'figs/plot.eps' in tree.files


def test_normalize_figures_substitutes_placeholder_on_failure(settings, monkeypatch):
    def failing(data, extension, settings):
        raise ConversionFailed(message="converter exited with 1")

    monkeypatch.setattr(ingest_service, 'convert_figure', failing)
    text = '\\documentclass{article}\n\\begin{document}\n\\includegraphics{chart.pdf}\n\\end{document}\n'
    tree = SourceTree(files={'main.tex': text.encode(), 'chart.pdf': b'%PDF'})

    normalized = ingest_service.normalize_figures(tree, settings)

    assert normalized.files['chart.png'].startswith(b'\x89PNG')
    assert b'{chart.png}' in normalized.files['main.tex']
    assert any(warning.startswith('ConversionFailed: chart.pdf') for warning in normalized.warnings)


def test_normalize_figures_uses_shipped_png_rendition(settings, monkeypatch):
    monkeypatch.setattr(ingest_service, 'convert_figure', lambda *args: pytest.fail("should not convert"))
    tree = SourceTree(files={'main.tex': GOLDEN_TEX.encode(), 'plot.pdf': b'%PDF', 'plot.png': b'\x89PNG'})

    normalized = ingest_service.normalize_figures(tree, settings)

    assert normalized.figures == ['plot.png']
