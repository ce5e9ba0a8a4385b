# texlayout/utils.py

import os
import re
import math
import hashlib
import shlex
import signal
import tempfile
import subprocess
from fractions import Fraction
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple
from werkzeug.utils import secure_filename                              # For file-safe document ids
from texlayout.logger import get_logger                                 # Application logger

logger = get_logger(__name__) # Logger for this module

_ARXIV_NEW_ID = re.compile(r'(?<![\d.])(\d{4}\.\d{4,5})(?:v\d+)?(?![\d])')
_ARXIV_OLD_ID = re.compile(r'\b([a-z\-]+(?:\.[A-Z]{2})?/\d{7})(?:v\d+)?\b')

ARCHIVE_SUFFIXES = ('.tar.gz', '.tgz', '.tar', '.gz')


def normalize_whitespace(text):
    """
    Normalizes all whitespace in a string.
    """
    if not isinstance(text, str):
        return text
    normalized_text = re.sub(r'\s+', ' ', text)
    return normalized_text.strip()


def decode_tex_bytes(data: bytes) -> str:
    """
    Decodes LaTeX source bytes. arXiv sources are mostly UTF-8 but older
    papers are Latin-1; the fallback never fails.
    """
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError:
        return data.decode('latin-1')


def tex_encoding(data: bytes) -> str:
    """The codec decode_tex_bytes used for data."""
    try:
        data.decode('utf-8')
        return 'utf-8'
    except UnicodeDecodeError:
        return 'latin-1'


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_files(files: Iterable[Tuple[str, bytes]]) -> str:
    """
    Content hash over (path, bytes) pairs, independent of iteration order.

    Args:
        files: Pairs of relative path and content.

    Returns:
        str: 'sha256:<hex>'.
    """
    hasher = hashlib.sha256()
    for path, content in sorted(files, key=lambda item: item[0]):
        hasher.update(path.encode('utf-8'))
        hasher.update(b'\0')
        hasher.update(hashlib.sha256(content).digest())
    return f"sha256:{hasher.hexdigest()}"


def atomic_write_bytes(path, data: bytes) -> Path:
    """
    Writes data to path via a temp file in the same directory and os.replace,
    so concurrent readers never observe a partial file.

    Args:
        path (str | Path): Destination file.
        data (bytes): Content.

    Returns:
        Path: The destination path.
    """
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{destination.name}.", suffix=".tmp", dir=destination.parent)
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(data)
        os.replace(tmp_name, destination)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return destination


def canonical_float(value: float, digits: int = 9) -> float:
    """Rounds a fraction to at most `digits` significant digits."""
    if value is None:
        return None
    return float(f"{float(value):.{digits}g}")


def strip_archive_suffix(name: str) -> str:
    lowered = name.lower()
    for suffix in ARCHIVE_SUFFIXES:
        if lowered.endswith(suffix):
            return name[: -len(suffix)]
    return name


def find_arxiv_id(*texts: str):
    """
    Returns the first arXiv identifier (new or old style, version dropped)
    found in the given strings, or None.
    """
    for text in texts:
        if not text:
            continue
        match = _ARXIV_NEW_ID.search(text) or _ARXIV_OLD_ID.search(text)
        if match:
            return match.group(1)
    return None


def make_doc_id(input_path, preamble: str = "") -> str:
    """
    Document id: an arXiv identifier when the input name or the preamble
    carries one, otherwise the input filename stem made file-safe.

    Args:
        input_path (str | Path): The document directory or archive.
        preamble (str): Text before \\begin{document} of the main file.

    Returns:
        str: A non-empty identifier safe to use as a file name.
    """
    stem = strip_archive_suffix(Path(input_path).name)
    preamble_mention = re.search(r'arXiv:\s*\S+', preamble or "")
    arxiv_id = find_arxiv_id(stem, preamble_mention.group(0) if preamble_mention else "")
    if arxiv_id:
        return secure_filename(arxiv_id.replace('/', '_'))
    return secure_filename(stem) or "document"


def round_half_up(value) -> int:
    """Exact round-half-up for ints, floats and Fractions."""
    return math.floor(Fraction(value) + Fraction(1, 2))


def expand_command_template(template: str, cmd: str, **placeholders) -> List[str]:
    """
    Turns a command template such as '{cmd} -interaction=nonstopmode {main}'
    into an argv list. `{cmd}` may expand to several words; every other
    placeholder is substituted inside a single word.

    Args:
        template (str): Shell-like template, split with shlex.
        cmd (str): Value of {cmd}.
        **placeholders: Values for the other placeholders ({in} is passed as in_).

    Returns:
        list: The argv.
    """
    values = {f"{{{key.rstrip('_')}}}": str(value) for key, value in placeholders.items()}
    argv = []
    for token in shlex.split(template):
        if token == '{cmd}':
            argv.extend(shlex.split(cmd))
            continue
        token = token.replace('{cmd}', cmd)
        for placeholder, value in values.items():
            token = token.replace(placeholder, value)
        argv.append(token)
    return argv


@dataclass
class ProcessResult:
    returncode: Optional[int]
    output: str
    timed_out: bool = False
    missing_binary: bool = False

    @property
    def ok(self) -> bool:
        return self.returncode == 0 and not self.timed_out


def _kill_process_group(process: subprocess.Popen):
    """Kills the child and everything it started; the child leads its own session."""
    try:
        os.killpg(process.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        process.kill()


def run_external(argv: List[str], cwd, timeout: float, env: Optional[Dict[str, str]] = None) -> ProcessResult:
    """
    Runs an external tool with a wall-clock limit, capturing stdout and
    stderr together. The tool runs in a new session; when the limit passes
    the whole process group is killed, including anything a wrapper such
    as latexmk or a shell template started.
    """
    logger.debug(f"Running external command {argv} in {cwd} (timeout {timeout}s)")
    run_env = dict(os.environ)
    if env:
        run_env.update(env)
    try:
        process = subprocess.Popen(
            argv, cwd=cwd, env=run_env, stdin=subprocess.DEVNULL,
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, start_new_session=True,
        )
    except (FileNotFoundError, PermissionError) as e:
        return ProcessResult(None, str(e), missing_binary=True)

    try:
        stdout, _ = process.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        _kill_process_group(process)
        stdout, _ = process.communicate()
        logger.warning(f"External command {argv[0]} exceeded {timeout}s; process group {process.pid} killed")
        return ProcessResult(None, (stdout or b'').decode('utf-8', 'replace'), timed_out=True)
    return ProcessResult(process.returncode, stdout.decode('utf-8', 'replace'))


def tail_lines(text: str, count: int = 40) -> str:
    return '\n'.join(text.splitlines()[-count:])
