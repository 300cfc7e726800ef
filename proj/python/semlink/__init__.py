# SPDX-License-Identifier: Apache-2.0
"""Python access to the semlink simulator, trainer and command-line tool."""

from ._semlink import (
    Config,
    ConfigError,
    IoError,
    NumericError,
    UsageError,
    evaluate,
    realize_channel,
    run_cli,
    sample,
    svd_bound,
)

__all__ = [
    "Config",
    "ConfigError",
    "IoError",
    "NumericError",
    "UsageError",
    "evaluate",
    "realize_channel",
    "run_cli",
    "sample",
    "svd_bound",
]
