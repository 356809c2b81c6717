"""Run configuration: flat ``key = value`` files, flag overrides and validation.

File format::

    # comment
    M = 0.05
    l = 1
    m = 2
    h_list = 0.2, 0.15, 0.1, 0.08, 0.06

Precedence is flags > file > defaults.  The output directory may also be
set through the ``SADS_DIRAC_OUTPUT_DIR`` environment variable, which
beats the file but not an explicit ``--out_dir`` flag.
"""
import configparser
import math
import os
from dataclasses import dataclass, fields

from .errors import ConfigurationError
from .geometry import SpacetimeParams

OUTPUT_ENV = "SADS_DIRAC_OUTPUT_DIR"
MANDATORY = ("M", "l", "m")
_AUTO = "auto"


def _float(key, raw):
    try:
        val = float(raw)
    except ValueError:
        raise ConfigurationError(f"{key}: expected a number, got {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigurationError(f"{key}: must be finite")
    return val


def _opt_float(key, raw):
    return None if raw.strip().lower() == _AUTO else _float(key, raw)


def _int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{key}: expected an integer, got {raw!r}") from None


def _floats(key, raw):
    parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ConfigurationError(f"{key}: empty list")
    return tuple(_float(key, p) for p in parts)


def _n(key, raw):
    return _AUTO if raw.strip().lower() == _AUTO else _int(key, raw)


def _window(key, raw):
    if raw.strip().lower() == _AUTO:
        return None
    vals = _floats(key, raw)
    if len(vals) != 2:
        raise ConfigurationError(f"{key}: expected 'a, b'")
    return vals


def _text(key, raw):
    return raw.strip()


# key -> (parser, default as text)
SCHEMA = {
    "M": (_float, None),
    "l": (_float, None),
    "m": (_float, None),
    "h": (_float, "0.1"),
    "h_list": (_floats, "0.2, 0.15, 0.1, 0.08, 0.06"),
    "certify_h": (_floats, "0.15, 0.1"),
    "n": (_n, "4000"),
    "x_min": (_opt_float, _AUTO),
    "x_cut": (_float, "-1e-3"),
    "graded": (_float, "0"),
    "margin": (_float, "2.0"),
    "S": (_opt_float, _AUTO),
    "T": (_opt_float, _AUTO),
    "delta": (_float, "4.0"),
    "chi_band": (_floats, "0.1, 0.4"),
    "K": (_window, _AUTO),
    "t_max": (_opt_float, _AUTO),
    "dt": (_opt_float, _AUTO),
    "snapshots": (_int, "40"),
    "workers": (_int, "1"),
    "seed": (_int, "0"),
    "out_dir": (_text, "sads_out"),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one CLI invocation.

    ``x_cut`` and ``x_min`` are in units of ``l``.  ``None`` stands for
    ``auto`` (derived from the physics at run time).
    """

    M: float
    l: float
    m: float
    h: float
    h_list: tuple
    certify_h: tuple
    n: object
    x_min: object
    x_cut: float
    graded: float
    margin: float
    S: object
    T: object
    delta: float
    chi_band: tuple
    K: object
    t_max: object
    dt: object
    snapshots: int
    workers: int
    seed: int
    out_dir: str

    def __post_init__(self):
        self.params  # validates M, l, m, h and ml > 1
        for key in ("h_list", "certify_h"):
            seq = getattr(self, key)
            if any(v <= 0 for v in seq):
                raise ConfigurationError(f"{key}: values must be positive")
            if any(b >= a for a, b in zip(seq, seq[1:])):
                raise ConfigurationError(f"{key}: must be strictly decreasing")
        if self.n != _AUTO and self.n < 16:
            raise ConfigurationError("n: need at least 16 nodes")
        if not self.x_cut < 0:
            raise ConfigurationError("x_cut: must be negative")
        if self.x_min is not None and not self.x_min < self.x_cut:
            raise ConfigurationError("x_min: must lie left of x_cut")
        if self.graded < 0:
            raise ConfigurationError("graded: must be >= 0")
        if not self.margin > 0:
            raise ConfigurationError("margin: must be positive")
        if self.S is not None and not self.S > 0:
            raise ConfigurationError("S: must be positive")
        if self.T is not None and not self.T > 0:
            raise ConfigurationError("T: must be positive")
        if not self.delta > 0:
            raise ConfigurationError("delta: must be positive")
        if len(self.chi_band) != 2 or not 0 < self.chi_band[0] < self.chi_band[1] < 1:
            raise ConfigurationError("chi_band: need 0 < lo < hi < 1")
        if self.K is not None:
            a, b = self.K
            if not a < b < 0:
                raise ConfigurationError("K: need a < b < 0")
            if not b < self.x_cut * self.l:
                raise ConfigurationError("K: must lie left of x_cut")
        for key in ("t_max", "dt"):
            val = getattr(self, key)
            if val is not None and not val > 0:
                raise ConfigurationError(f"{key}: must be positive")
        if self.snapshots < 1:
            raise ConfigurationError("snapshots: must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers: must be >= 1")
        if not self.out_dir:
            raise ConfigurationError("out_dir: must be non-empty")

    @property
    def params(self):
        return SpacetimeParams(self.M, self.l, self.m, self.h)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def read_config_file(path):
    """Parse a flat ``key = value`` file into a dict of raw strings."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",), delimiters=("=",))
    parser.optionxform = str  # M and m are different keys
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc.strerror}") from None
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config file {path}: {exc.message.splitlines()[0]}") from None
    return dict(parser["run"])


def build_config(file_values=None, flag_values=None, environ=None):
    """Merge defaults, file values, the output-directory variable and flags.

    Raises
    ------
    ConfigurationError
        For unknown keys, missing mandatory keys or invalid values.
    """
    environ = os.environ if environ is None else environ
    merged = {k: d for k, (_, d) in SCHEMA.items() if d is not None}
    for key, val in (file_values or {}).items():
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown key {key!r}")
        merged[key] = val
    if environ.get(OUTPUT_ENV):
        merged["out_dir"] = environ[OUTPUT_ENV]
    for key, val in (flag_values or {}).items():
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown key {key!r}")
        if val is not None:
            merged[key] = val
    missing = [k for k in MANDATORY if k not in merged]
    if missing:
        raise ConfigurationError(f"missing mandatory key(s): {', '.join(missing)}")
    parsed = {key: SCHEMA[key][0](key, str(raw)) for key, raw in merged.items()}
    try:
        return RunConfig(**parsed)
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from None
