"""
spconv - Exact singular values of periodic convolutional layers
Main entry point for the command-line tool

License: MIT
"""

import logging
import pathlib
import sys
from typing import Dict, Optional, Sequence

import colorlog

from modules.config import ConfigManager, DEFAULT_CONFIG_FILE, Settings
from modules.executor import Executor
from modules.parser import CommandParser, UnknownCommandError

logger = logging.getLogger("spconv")

EXIT_PARSE_ERROR = 2
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """
    Configure root logging

    Console records go to stderr so that CSV on stdout stays clean.
    """
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(colorlog.ColoredFormatter(
        "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s",
        log_colors={
            "DEBUG": "cyan",
            "INFO": "green",
            "WARNING": "yellow",
            "ERROR": "red",
            "CRITICAL": "red,bg_white",
        },
    ))
    handlers = [console]

    if log_file:
        path = pathlib.Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)

    logging.basicConfig(level=level, handlers=handlers, force=True)


def resolve_settings(options: Dict) -> Settings:
    """Settings from --config (or config/spconv.yaml), environment and flags"""
    config_path = options.get("config")
    if config_path:
        path = pathlib.Path(config_path)
        manager, filename = ConfigManager(str(path.parent)), path.name
    else:
        manager, filename = ConfigManager(), DEFAULT_CONFIG_FILE

    overrides = {"threads": options.get("threads"), "log_file": options.get("log_file")}
    if options.get("verbose"):
        overrides["log_level"] = "DEBUG"
    elif options.get("quiet"):
        overrides["log_level"] = "WARNING"
    return manager.get_settings(filename, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main application entry point"""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = CommandParser()

    try:
        command = parser.parse(argv)
    except UnknownCommandError as e:
        setup_logging()
        logger.error(str(e))
        return EXIT_PARSE_ERROR
    except SystemExit as e:
        # argparse exits 0 for --help and 2 for usage errors
        return int(e.code or 0)

    settings = resolve_settings(command["options"])
    setup_logging(settings.log_level, settings.log_file)
    logger.debug(f"Effective settings: {settings.to_dict()}")

    executor = Executor(settings)
    exit_code = executor.execute(command)
    logger.debug(f"{command['intent']} finished with exit code {exit_code}")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
