"""INI configuration for the command line tools.

Sections and keys (all optional; defaults come from IterationConfig):

    [grid]       x_points, x_length, p_max, n_p
    [physics]    lambda, theta, m, T, epsilon, epsilon0, M, L, amplitude,
                 source (Maxwell source preset: vacuum or oscillating)
    [iteration]  dt, max_iterations, tolerance, cg_tol
    [output]     directory
"""

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .driver import IterationConfig
from .errors import ConfigurationError, InvalidArgumentError

_KEYS = {
    "grid": {"x_points": ("x_points", int), "x_length": ("x_length", float),
             "p_max": ("p_max", float), "n_p": ("n_p", int)},
    "physics": {"lambda": ("lam", float), "theta": ("theta", float), "m": ("m", int),
                "t": ("T", float), "epsilon": ("epsilon", float), "epsilon0": ("epsilon0", float),
                "m_const": ("M", float), "l": ("L", float), "amplitude": ("amplitude", float),
                "source": ("source", str)},
    "iteration": {"dt": ("dt", float), "max_iterations": ("max_iterations", int),
                  "tolerance": ("tolerance", float), "cg_tol": ("cg_tol", float)},
    "output": {"directory": ("directory", str)},
}

MAXWELL_SOURCES = ("vacuum", "oscillating")


@dataclass(frozen=True)
class RunSettings:
    iteration: IterationConfig
    directory: str = "rvml-out"
    source: str = "vacuum"


def _case_sensitive_parser():
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    return cp


def load_settings(path=None):
    """Parse an INI file into RunSettings; None gives the defaults.

    Raises ConfigurationError for a missing file, unknown sections or keys,
    unparseable values, or values the iteration config rejects.
    """
    base = IterationConfig()
    if path is None:
        return RunSettings(base)
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {path} not found")
    cp = _case_sensitive_parser()
    try:
        cp.read(p, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    values = {}
    directory = "rvml-out"
    source = "vacuum"
    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigurationError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            # M and L collide with m and l once lower-cased, so they get explicit names
            lookup = {"M": "m_const", "L": "l", "T": "t"}.get(key, key.lower())
            if lookup not in _KEYS[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            name, kind = _KEYS[section][lookup]
            try:
                val = kind(raw)
            except ValueError as exc:
                raise ConfigurationError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from exc
            if name == "directory":
                directory = val
            elif name == "source":
                if val not in MAXWELL_SOURCES:
                    raise ConfigurationError(f"unknown Maxwell source {val!r}; expected one of {MAXWELL_SOURCES}")
                source = val
            else:
                values[name] = val
    nx = values.pop("x_points", None)
    length = values.pop("x_length", None)
    if nx is not None:
        values["x_shape"] = (1, 1, nx)
    if length is not None:
        values["x_lengths"] = (1.0, 1.0, length)
    try:
        cfg = replace(base, **values)
    except (InvalidArgumentError, TypeError) as exc:
        raise ConfigurationError(str(exc)) from exc
    return RunSettings(cfg, directory, source)
