import os
import subprocess
import sys
from typing import Optional, TextIO


def term_support_color(stream: Optional[TextIO] = None) -> bool:
    """True when ANSI colors should be emitted on 'stream' (stdout by default)"""
    stream = stream if stream is not None else sys.stdout
    if os.environ.get("NO_COLOR"):
        return False
    try:
        if not stream.isatty():
            return False
    except (AttributeError, ValueError):
        return False
    try:
        result = subprocess.run(["tput", "colors"], capture_output=True, text=True).stdout
    except OSError:
        return False
    return result.strip().isdigit() and int(result.strip()) >= 8
