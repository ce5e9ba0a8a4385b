# tests/test_tex_scanner.py

import pytest

from texlayout.services import tex_scanner
from texlayout.services.tex_scanner import Mark, RangeSet, UnbalancedArgument


def test_marks_report_controls_comments_and_structure():
    text = 'a \\textbf{b} % c\n$x$'

    found = list(tex_scanner.marks(text))

    assert found == [
        Mark('control', 2, 9, 'textbf'),
        Mark('char', 9, 10, '{'),
        Mark('char', 11, 12, '}'),
        Mark('comment', 13, 16, '% c'),
        Mark('char', 16, 17, '\n'),
        Mark('char', 17, 18, '$'),
        Mark('char', 19, 20, '$'),
    ]


def test_marks_name_control_symbols():
    names = [mark.value for mark in tex_scanner.marks('\\% \\\\ \\,') if mark.kind == 'control']

    assert names == ['%', '\\', ',']


def test_match_group_skips_escaped_braces_and_comments():
    text = '{a \\} % }\n b} tail'

    assert tex_scanner.match_group(text, 0) == text.index(' tail')
    assert tex_scanner.match_group('{never closed', 0) is None
    assert tex_scanner.match_group('x{}', 0) is None


def test_match_group_brackets_skip_brace_groups():
    text = '[key={a]b}, c] rest'

    assert tex_scanner.match_group(text, 0, '[', ']') == text.index(' rest')


def test_parse_command_reads_star_optional_and_mandatory_arguments():
    text = '\\section*[Short]{Long {title}} rest'

    call = tex_scanner.parse_command(text, 0, 'section')

    assert call.star
    assert text[slice(*call.optional[0])] == 'Short'
    assert call.arg_text(text) == 'Long {title}'
    assert call.end == text.index(' rest')


def test_parse_command_unbalanced_argument():
    with pytest.raises(UnbalancedArgument) as excinfo:
        tex_scanner.parse_command('\\section{open', 0, 'section')

    assert excinfo.value.name == 'section'
    assert excinfo.value.position == 0


def test_scan_regions_finds_comments_and_verbatim_like_regions():
    text = ('A % note\n'
            '\\begin{verbatim}\n50% \\end{itemize}\n\\end{verbatim}\n'
            '\\verb|%| and \\url{a%20b}\n')
    verbatim_start = text.index('\\begin{verbatim}')
    verbatim_end = text.index('\\end{verbatim}') + len('\\end{verbatim}')
    verb_start = text.index('\\verb')
    url_brace = text.index('{a%20b}')

    regions = tex_scanner.scan_regions(text)

    assert regions.comments == [(2, 8)]
    assert regions.verbatim == [
        (verbatim_start, verbatim_end),
        (verb_start, verb_start + len('\\verb|%|')),
        (url_brace, url_brace + len('{a%20b}')),
    ]


def test_range_set_queries():
    ranges = RangeSet([(10, 20), (2, 5)])

    assert ranges.contains(3) and not ranges.contains(5)
    assert ranges.enclosing(15) == (10, 20)
    assert ranges.overlaps(4, 11) and not ranges.overlaps(5, 10)
    assert list(ranges.gaps(0, 25)) == [(0, 2), (5, 10), (20, 25)]


def test_find_commands_ignores_protected_text():
    text = '\\label{a} % \\label{b}\n\\label{c}'

    found = tex_scanner.find_commands(text, ('label',), max_optional=0)

    assert [call.arg_text(text) for call in found] == ['a', 'c']


def test_match_environment_honours_nesting():
    text = '\\begin{itemize}\\begin{itemize}x\\end{itemize}\\end{itemize} after'

    span = tex_scanner.match_environment(text, 0)

    assert span.name == 'itemize'
    assert span.closed
    assert span.end == text.index(' after')
    assert text[span.body_start:span.body_end] == '\\begin{itemize}x\\end{itemize}'


def test_match_environment_truncates_unclosed():
    text = '\\begin{figure}dangling'

    span = tex_scanner.match_environment(text, 0)

    assert not span.closed
    assert span.end == len(text)
    assert tex_scanner.match_environment('no environment', 0) is None


def test_verbatim_environment_ends_at_first_end():
    text = '\\begin{verbatim}\\begin{verbatim}\\end{verbatim}tail\\end{verbatim}'

    span = tex_scanner.match_environment(text, 0)

    assert span.end == text.index('tail')


def test_find_environment_skips_commented_begin():
    text = '% \\begin{document}\n\\begin{document}Body\\end{document}'

    span = tex_scanner.find_environment(text, 'document')

    assert span.start == text.index('\\begin{document}', 3)
    assert text[span.body_start:span.body_end] == 'Body'


def test_count_environment_tokens_outside_protected_ranges():
    text = ('\\begin{table}x\\end{table}\n'
            '\\begin{verbatim}\\begin{table}\\end{verbatim}\n'
            '% \\end{table}\n')
    protected = tex_scanner.scan_regions(text).protected

    assert tex_scanner.count_environment_tokens(text, 'table', protected) == (1, 1)


def test_blank_line_end():
    assert tex_scanner.blank_line_end('a\n  \nb', 1) == 5
    assert tex_scanner.blank_line_end('a\nb', 1) is None
    assert tex_scanner.blank_line_end('a\n\nb', 1, limit=2) is None
