# utils/console.py
"""Status lines for the command line and guarded status callbacks for library code."""

import sys
from typing import Callable, Optional

from colorama import Fore, Style, just_fix_windows_console

just_fix_windows_console()


def emit_status(callback: Optional[Callable[[str], None]], message: str) -> None:
    if callback:
        try:
            callback(str(message))
        except Exception:
            pass


def _line(icon: str, color: str, message: str, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"{color}{icon} {message}{Style.RESET_ALL}", file=stream)


def info(message: str) -> None:
    _line("🧭", Fore.CYAN, message)


def success(message: str) -> None:
    _line("✅", Fore.GREEN, message)


def warn(message: str) -> None:
    _line("⚠️", Fore.YELLOW, message, sys.stderr)


def error(message: str) -> None:
    _line("❌", Fore.RED, message, sys.stderr)


def start(message: str) -> None:
    _line("🚀", Fore.MAGENTA, message)
