"""Small file-writing helper shared by model persistence and the CLI."""

import os
import tempfile


def atomic_write_text(path, text):
    """Write text to `path` via a temp file + rename, or not at all.

    Guarantees no partially written file is left behind on error.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
