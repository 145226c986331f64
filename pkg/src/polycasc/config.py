"""Plain-text key=value study configuration with command-line overrides.

The file format is one ``key = value`` per line, ``#`` comments, blank
lines ignored.  Overrides win over file values; defaults fill the rest.
Every report embeds the resolved science keys verbatim, so a run can be
reproduced from its own output (execution keys like ``workers`` and ``out``
do not influence results and stay out of the echo).
"""

from dataclasses import dataclass, field, fields

from .errors import UsageError
from .env import EnvironmentModel

_LIST_INT = "list_int"
_LIST_FLOAT = "list_float"

# key -> (attribute, type)
_KEY_TABLE = {
    "env.family": ("env_family", str),
    "env.params": ("env_params", _LIST_FLOAT),
    "beta": ("beta", float),
    "beta_grid": ("beta_grid", _LIST_FLOAT),
    "d": ("d", int),
    "m_list": ("m_list", _LIST_INT),
    "n_list": ("n_list", _LIST_INT),
    "theta_min": ("theta_min", float),
    "theta_grid_size": ("theta_grid_size", int),
    "replicas": ("replicas", int),
    "seed": ("seed", int),
    "out": ("out", str),
    "workers": ("workers", int),
    "beta_c.m": ("beta_c_m", int),
    "beta_c.interval": ("beta_c_interval", _LIST_FLOAT),
    "beta_c.tolerance": ("beta_c_tolerance", float),
    "cascade.weights": ("cascade_weights", str),
    "cascade.branching": ("cascade_branching", int),
    "cascade.depth": ("cascade_depth", int),
    "cascade.m": ("cascade_m", int),
    "overlap.n": ("overlap_n", int),
    "overlap.slabs": ("overlap_slabs", int),
    "concentration.n": ("concentration_n", int),
    "concentration.lambdas": ("concentration_lambdas", _LIST_FLOAT),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEY_TABLE.items()}

# execution-only keys: allowed to differ between byte-identical runs
_VOLATILE_KEYS = {"out", "workers"}


@dataclass
class StudyConfig:
    env_family: str = "gaussian"
    env_params: tuple = (0.0, 1.0)
    beta: float = 1.0
    beta_grid: tuple = ()
    d: int = 1
    m_list: tuple = (1, 2, 4, 8, 16, 32)
    n_list: tuple = (4, 8, 16, 32, 64)
    theta_min: float = 0.01
    theta_grid_size: int = 25
    replicas: int = 100_000
    seed: int = 1
    out: str = "out"
    workers: int = 1
    beta_c_m: int = 2
    beta_c_interval: tuple = (0.05, 3.0)
    beta_c_tolerance: float = 0.1
    cascade_weights: str = "polymer"
    cascade_branching: int = 4
    cascade_depth: int = 12
    cascade_m: int = 2
    overlap_n: int = 256
    overlap_slabs: int = 1
    concentration_n: int = 16
    concentration_lambdas: tuple = (0.25, 0.5, 1.0)

    def model(self) -> EnvironmentModel:
        return EnvironmentModel(self.env_family, self.env_params)

    def betas(self) -> tuple:
        return tuple(self.beta_grid) if self.beta_grid else (self.beta,)

    def echo(self) -> dict:
        """Resolved science keys, in file syntax, reproducing this config."""
        out = {}
        for f in fields(self):
            key = _ATTR_TO_KEY[f.name]
            if key in _VOLATILE_KEYS:
                continue
            out[key] = _format_value(getattr(self, f.name))
        return out


def _format_value(value) -> str:
    if isinstance(value, (tuple, list)):
        return ",".join(_format_value(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(raw: str, kind, key: str, where: str):
    try:
        if kind is _LIST_INT:
            return tuple(int(p) for p in raw.split(",") if p.strip() != "")
        if kind is _LIST_FLOAT:
            return tuple(float(p) for p in raw.split(",") if p.strip() != "")
        return kind(raw)
    except ValueError:
        raise UsageError(f"{where}: cannot parse value {raw!r} for key {key!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key=value lines into attribute assignments; errors carry line
    numbers."""
    assignments = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise UsageError(f"{source} line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEY_TABLE:
            raise UsageError(f"{source} line {lineno}: unknown key {key!r}")
        attr, kind = _KEY_TABLE[key]
        assignments[attr] = _parse_value(raw, kind, key, f"{source} line {lineno}")
    return assignments


def load_config(path=None, overrides: dict | None = None) -> StudyConfig:
    """Resolve defaults <- config file <- overrides (overrides win)."""
    assignments = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        assignments.update(parse_config_text(text, source=str(path)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _KEY_TABLE:
            raise UsageError(f"unknown override key {key!r}")
        attr, kind = _KEY_TABLE[key]
        assignments[attr] = (
            value if not isinstance(value, str) else _parse_value(value, kind, key, "override")
        )
    cfg = StudyConfig(**assignments)
    cfg.model()  # validate the environment family and parameters early
    if cfg.replicas < 2:
        raise UsageError("replicas must be >= 2")
    if cfg.d < 1:
        raise UsageError("d must be >= 1")
    return cfg
