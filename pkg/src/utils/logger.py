import datetime
from enum import Enum
import os
import re
import sys
from sys import stderr, stdout
import time
from typing import Dict, Optional, Tuple

CRASH_LOG_DIR = os.path.join(
    os.environ.get("XDG_CACHE_HOME", os.path.expanduser("~/.cache")),
    "maxmin-alloc",
    "crashes"
)

def emergency_log(message: str, stack: str = "") -> None:
    """Emergency logging for crashes and fatal signals"""
    try:
        os.makedirs(CRASH_LOG_DIR, exist_ok=True)
        crash_file = os.path.join(
            CRASH_LOG_DIR,
            f"crash_{datetime.datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
        )
        with open(crash_file, "w") as f:
            f.write(f"CRASH: {message}\n")
            f.write(f"Python: {sys.version}\n")
            f.write(f"Stack:\n{stack}\n")
    except Exception:
        pass

from utils.arg_parser import ArgParse
from tools.terminal import term_support_color


class LogLevel(Enum):
    Debug = 3
    Info = 2
    Warn = 1
    Error = 0


def get_current_time():
    now = datetime.datetime.now()
    ms = int((time.time() * 1000) % 1000)
    return f"{now.minute:02}:{now.second:02}:{ms:03}"


# ? rationals like 17/4, decimals and bare integers of three or more digits
NUMBER_PATTERN = re.compile(r"(?<![\w.])(\d+/\d+|\d+\.\d+|\d{3,})(?![\w.])")


class Logger:
    def __init__(self, arg_parser: ArgParse) -> None:
        should_log = arg_parser.find_arg(("-l", "--log"))
        log_option: Optional[str] = (
            arg_parser.option_arg(("-l", "--log")) if should_log else None
        )

        # Masks numbers so logs of confidential instances can be shared
        self.__should_mask: bool = arg_parser.find_arg(("-q", "--quiet-numbers"))

        self.__should_log: bool = should_log
        self.__log_level: int = LogLevel.Debug.value
        self.__add_color: bool = term_support_color(stderr)
        self.__log_file = None
        self.__labels: Dict[LogLevel, Tuple[str, str]] = {
            LogLevel.Info: (
                "\x1b[1;37m[\x1b[1;32mINFO\x1b[1;37m]:\x1b[0;0;0m", "[INFO]:"
            ),
            LogLevel.Error: (
                "\x1b[1;37m[\x1b[1;31mERROR\x1b[1;37m]:\x1b[0;0;0m", "[ERROR]:"
            ),
            LogLevel.Debug: (
                "\x1b[1;37m[\x1b[1;36mDEBUG\x1b[1;37m]:\x1b[0;0;0m", "[DEBUG]:"
            ),
            LogLevel.Warn: (
                "\x1b[1;37m[\x1b[1;33mWARNING\x1b[1;37m]:\x1b[0;0;0m", "[WARNING]:"
            ),
        }

        if log_option is None:
            return
        if log_option.isdigit():
            digit = int(log_option)
            if digit in range(4):
                self.__log_level = digit
            else:
                self.log(LogLevel.Error, f"Invalid log level provided: {digit}")
        else:
            mode = "a" if os.path.isfile(log_option) else "x"
            self.__log_file = open(log_option, mode)

    @classmethod
    def quiet(cls) -> "Logger":
        """A logger that only reports errors, used by library callers and tests"""
        return cls(ArgParse(["maxmin-alloc"]))

    def __del__(self):
        if getattr(self, "_Logger__log_file", None) is not None:
            self.__log_file.close()

    def __mask_numbers(self, message: str) -> str:
        if not self.__should_mask:
            return message
        return NUMBER_PATTERN.sub("#", message)

    def log(self, log_level: LogLevel, message: str):
        """Logs messages to a stream based on user arg

        Args:
            log_level (LogLevel): the log level, which consists of Debug, Info, Warn, Error
            message (str): the log message
        """
        label = self.__labels[log_level][0 if self.__add_color else 1]
        fmt = f"{get_current_time()} {label} {self.__mask_numbers(message)}"

        if log_level != LogLevel.Error and not self.__should_log:
            return
        if log_level.value > self.__log_level:
            return

        if self.__log_file is not None:
            print(fmt, file=self.__log_file, flush=True)
        print(fmt, file=stderr if log_level in (LogLevel.Error, LogLevel.Warn) else stdout)
