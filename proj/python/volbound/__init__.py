"""Python bindings for the volbound library."""

import json

from ._volbound import (
    ConfigError,
    bessel_k,
    call_price,
    commands,
    implied_vol,
    mc_call_price,
    norm_cdf,
    norm_pdf,
    phi,
    verify_phi,
)
from ._volbound import run as _run

__all__ = [
    "ConfigError",
    "RunError",
    "bessel_k",
    "call_price",
    "commands",
    "implied_vol",
    "mc_call_price",
    "norm_cdf",
    "norm_pdf",
    "phi",
    "run",
    "verify_phi",
]


class RunError(RuntimeError):
    def __init__(self, exit_code, message):
        super().__init__(message)
        self.exit_code = exit_code


def run(command, config="", overrides=None, *, seed=None, paths=None, dt=None, workers=None,
        check=False):
    """Run a lab subcommand and return (exit_code, report dict).

    `overrides` may be a list of "key=value" strings or a dict. With check=True
    a config or I/O error raises RunError.
    """
    if isinstance(overrides, dict):
        overrides = [f"{k}={v}" for k, v in overrides.items()]
    code, report, error = _run(command, config, list(overrides or []), seed, paths, dt, workers)
    if check and code >= 2:
        raise RunError(code, error)
    return code, json.loads(report) if report and report != "null" else {}
