#!/usr/bin/env python3

import os
import signal
import sys
import traceback

from setproctitle import setproctitle

from utils.arg_parser import ArgParse
from utils.dependencies import check_all_dependencies
from utils.errors import MaxMinError
from utils.logger import LogLevel, Logger, emergency_log
from utils.settings import load_settings


def signal_handler(sig, frame):
    """Writes a crash record and leaves with a failure code"""
    emergency_log(f"Signal {sig} received", "".join(traceback.format_stack(frame)))

    if sig in (signal.SIGSEGV, signal.SIGABRT):
        emergency_log("Critical error occurred", "")
    # an interrupted solve never produced a result
    sys.exit(1)


def parse_arguments() -> ArgParse:
    arg_parser = ArgParse(sys.argv)

    if arg_parser.find_arg(("-h", "--help")):
        arg_parser.print_help_msg(sys.stdout)

    if arg_parser.positional(0) is None:
        arg_parser.print_help_msg(sys.stderr)

    return arg_parser


def setup_logging(arg_parser: ArgParse) -> Logger:
    logger = Logger(arg_parser)
    logger.log(LogLevel.Info, f"Starting maxmin-alloc {arg_parser.positional(0)}")
    return logger


def initialize_and_start():
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)
    signal.signal(signal.SIGSEGV, signal_handler)
    signal.signal(signal.SIGABRT, signal_handler)

    os.environ["PYTHONUNBUFFERED"] = "1"

    arg_parser = parse_arguments()
    logger = setup_logging(arg_parser)

    if (
        not arg_parser.find_arg(("-f", "--force"))
        and not check_all_dependencies(logger)
    ):
        logger.log(
            LogLevel.Error,
            "Missing required dependencies. Please install them and try again or use -f to skip the check.",
        )
        sys.exit(1)

    settings = load_settings(logger, arg_parser.option_arg(("-c", "--config")))
    setproctitle(f"maxmin-alloc {arg_parser.positional(0)}")

    try:
        # ? imported late so a missing backend is reported by the check above
        from tools.commands import dispatch

        code = dispatch(arg_parser, settings, logger)
    except MaxMinError as e:
        logger.log(LogLevel.Error, f"{type(e).__name__}: {e}")
        sys.exit(e.exit_code)
    except Exception as e:
        logger.log(LogLevel.Error, f"Fatal error: {e}")
        traceback.print_exc()
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    initialize_and_start()
