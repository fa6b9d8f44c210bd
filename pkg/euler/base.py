"""EULER base module.

Holds the configuration read at load time, the logging setup used by the
command-line entry points and the exception hierarchy shared by every module.

"""

import os
import logging
import logging.config
import configparser
from pathlib import Path

DEFAULTS = {
    "experiment": {
        "algorithm": "euler_bernstein",
        "delta": "0.05",
        "seed": "0",
        "eval_stride": "1",
        "check_brackets": "yes",
    },
    "tolerance": {
        "probability": "1e-9",
        "bracket": "1e-9",
    },
    "parallel": {
        "n_jobs": "-1",
    },
    "output": {
        "precision": "17",
    },
}
"""Built-in configuration, overridden by ``conf/euler.conf``."""


def get_toplevel_path() -> Path:
    """Get project toplevel path."""
    return Path(__file__).parent.parent


def read_config(filepath=None):
    """Read configuration file at module load time.

    :param filepath: Optional path of an INI file to read instead of
                     ``conf/euler.conf``.

    :returns: :py:class:`configparser.ConfigParser` with defaults applied.

    """
    if filepath is None:
        filepath = os.path.join(get_toplevel_path(), "conf", "euler.conf")

    # Logging format strings contain '%(...)s', so interpolation stays off.
    euler_config = configparser.ConfigParser(interpolation=None)
    euler_config.read_dict(DEFAULTS)
    euler_config.read([filepath])
    return euler_config


config = read_config()  # pylint: disable=invalid-name


def configure_logging(level=None):
    """Configure logging from the logging sections of the configuration.

    Library modules only create loggers; handlers are installed here, by the
    command-line entry points.

    :param level: Optional level name forced onto the ``euler`` logger.

    """
    if config.has_section("loggers"):
        logging.config.fileConfig(config, disable_existing_loggers=False)
    else:
        logging.basicConfig()

    if level is not None:
        logging.getLogger("euler").setLevel(level)


class EulerError(Exception):
    """Root of the exceptions raised by this package."""


class InvalidArgumentError(EulerError, ValueError):
    """Raised when a numeric input violates an operation's precondition."""


class InvalidMDPError(InvalidArgumentError):
    """Raised when a tabular MDP violates one of its invariants."""


class InvalidStateError(EulerError):
    """Raised when the agent's sufficient statistics are inconsistent."""


class ConfigError(EulerError):
    """Raised for invalid experiment configurations and flag conflicts."""

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        elif isinstance(messages, dict):
            messages = flatten_messages(messages)
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


def flatten_messages(messages, prefix=""):
    """Flatten nested marshmallow error messages into ``field: message`` strings."""
    flat = []
    for key, value in messages.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.extend(flatten_messages(value, prefix=f"{name}."))
        elif isinstance(value, (list, tuple)):
            flat.extend(f"{name}: {message}" for message in value)
        else:
            flat.append(f"{name}: {value}")
    return flat
