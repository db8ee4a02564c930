import json
import os
import numpy as np
import pandas as pd
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple

from oracle.constants import SOLVER_METHODS
from spectral.constants import TAIL_CUTS
from spiral.constants import FAMILY2DEFAULTS
from utils.constants import (
    BOUND_QUAD_REL_TOL,
    CSV_EXTENSION,
    DEFAULT_MARGIN,
    DEFAULT_SEED,
    FLOAT_FORMAT,
    JSON_EXTENSION,
    QUAD_REL_TOL,
    ROOT_TOL,
    SOLVER_TOL,
    THETA_RATIO,
)
from utils.exceptions import ConfigError, ReportError
from utils.utils import config_hash


FAMILY2PARAMS = {family: tuple(defaults) for family, defaults in FAMILY2DEFAULTS.items()}
OUTPUT_FORMATS = ("csv", "json", "binary")
BINARY_EXTENSION = ".bin"


@dataclass(frozen=True)
class SpiralConfig:
    family: str = "pure"
    a0: float = 1.0
    params: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class GeometryConfig:
    horizon: float = 1e4
    margin: float = DEFAULT_MARGIN
    ratio: float = THETA_RATIO
    quad_rel_tol: float = QUAD_REL_TOL
    root_tol: float = ROOT_TOL


@dataclass(frozen=True)
class BoundConfig:
    sigmas: Tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    threshold: Optional[float] = None
    r_factor: Optional[float] = None
    quad_rel_tol: float = BOUND_QUAD_REL_TOL
    tail_cut: str = "power_law"
    tie_tolerance: float = 0.1


@dataclass(frozen=True)
class OracleConfig:
    h: float = 0.125
    R: Optional[float] = None
    coils: int = 5
    k: int = 6
    tol: float = SOLVER_TOL
    seed: int = DEFAULT_SEED
    method: str = "shift_invert"
    dump: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    formats: Tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    spiral: SpiralConfig = field(default_factory=SpiralConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    bound: BoundConfig = field(default_factory=BoundConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    threads: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


SECTION2CONFIG = {
    "spiral": SpiralConfig,
    "geometry": GeometryConfig,
    "bound": BoundConfig,
    "oracle": OracleConfig,
    "outputs": OutputConfig,
}


def _number(section: str, key: str, value: Any, positive: bool = True, integer: bool = False) -> Any:
    name = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    return int(value) if integer else float(value)


def _section(name: str, raw: Any):
    config_class = SECTION2CONFIG[name]
    if not isinstance(raw, dict):
        raise ConfigError(name, f"expected an object, got {type(raw).__name__}")
    known = {f.name for f in fields(config_class)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
    values = dict(raw)
    for key in ("sigmas", "formats"):
        if key in values:
            if not isinstance(values[key], list) or not values[key]:
                raise ConfigError(f"{name}.{key}", "expected a nonempty list")
            values[key] = tuple(values[key])
    return config_class(**values)


def validate_config(config: RunConfig) -> RunConfig:
    """
    Range checks per module preconditions, raising ConfigError naming the field
    """
    spiral = config.spiral
    if spiral.family not in FAMILY2PARAMS:
        raise ConfigError("spiral.family", f"unknown family {spiral.family!r}, expected one of {sorted(FAMILY2PARAMS)}")
    if not isinstance(spiral.params, dict):
        raise ConfigError("spiral.params", f"expected an object, got {spiral.params!r}")
    _number("spiral", "a0", spiral.a0)
    expected = set(FAMILY2PARAMS[spiral.family])
    for key, value in spiral.params.items():
        if key not in expected:
            raise ConfigError(f"spiral.params.{key}", f"not a parameter of family {spiral.family!r}")
        _number("spiral.params", key, value, positive=False)
    for key in expected - set(spiral.params):
        raise ConfigError(f"spiral.params.{key}", f"required by family {spiral.family!r}")

    geometry = config.geometry
    _number("geometry", "horizon", geometry.horizon)
    if not 0 < _number("geometry", "margin", geometry.margin) < 1:
        raise ConfigError("geometry.margin", f"must lie in (0, 1), got {geometry.margin}")
    if not _number("geometry", "ratio", geometry.ratio) > 1:
        raise ConfigError("geometry.ratio", f"must exceed 1, got {geometry.ratio}")
    _number("geometry", "quad_rel_tol", geometry.quad_rel_tol)
    _number("geometry", "root_tol", geometry.root_tol)

    bound = config.bound
    for i, sigma in enumerate(bound.sigmas):
        if _number("bound", f"sigmas[{i}]", sigma) < 0.5:
            raise ConfigError(f"bound.sigmas[{i}]", f"sigma must be >= 1/2, got {sigma}")
    if bound.threshold is not None:
        _number("bound", "threshold", bound.threshold)
    if bound.r_factor is not None and not 0 < _number("bound", "r_factor", bound.r_factor) <= 2:
        raise ConfigError("bound.r_factor", f"must lie in (0, 2], got {bound.r_factor}")
    _number("bound", "quad_rel_tol", bound.quad_rel_tol)
    _number("bound", "tie_tolerance", bound.tie_tolerance)
    if bound.tail_cut not in TAIL_CUTS:
        raise ConfigError("bound.tail_cut", f"expected one of {TAIL_CUTS}, got {bound.tail_cut!r}")

    oracle = config.oracle
    _number("oracle", "h", oracle.h)
    if oracle.R is not None:
        _number("oracle", "R", oracle.R)
    _number("oracle", "coils", oracle.coils, integer=True)
    _number("oracle", "k", oracle.k, integer=True)
    _number("oracle", "tol", oracle.tol)
    _number("oracle", "seed", oracle.seed, positive=False, integer=True)
    if oracle.method not in SOLVER_METHODS:
        raise ConfigError("oracle.method", f"expected one of {SOLVER_METHODS}, got {oracle.method!r}")
    if not isinstance(oracle.dump, bool):
        raise ConfigError("oracle.dump", f"expected a boolean, got {oracle.dump!r}")

    for fmt in config.outputs.formats:
        if fmt not in OUTPUT_FORMATS:
            raise ConfigError("outputs.formats", f"unknown format {fmt!r}, expected {OUTPUT_FORMATS}")
    if isinstance(config.threads, bool) or not isinstance(config.threads, int) or config.threads < 1:
        raise ConfigError("threads", f"expected a positive integer, got {config.threads!r}")
    return config


def parse_config(raw: Dict[str, Any]) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a json object")
    sections = {}
    for key, value in raw.items():
        if key == "threads":
            sections[key] = value
        elif key in SECTION2CONFIG:
            try:
                sections[key] = _section(key, value)
            except TypeError as error:
                raise ConfigError(key, str(error)) from error
        else:
            raise ConfigError(key, "unknown key")
    return validate_config(RunConfig(**sections))


def load_config(filename: str) -> RunConfig:
    try:
        with open(filename, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as error:
        raise ConfigError("--config", f"no such file {filename}") from error
    except json.JSONDecodeError as error:
        raise ConfigError("--config", f"invalid json at line {error.lineno}: {error.msg}") from error
    return parse_config(raw)


def _switch_family(spiral: SpiralConfig, family: str) -> SpiralConfig:
    """
    The same spiral under another family: parameters the new family shares
    are kept, the others are dropped and missing ones take the family defaults
    """
    defaults = FAMILY2DEFAULTS.get(family)
    if defaults is None:
        return replace(spiral, family=family)
    params = {key: spiral.params.get(key, value) for key, value in defaults.items()}
    return replace(spiral, family=family, params=params)


def override_config(
    config: RunConfig,
    out: Optional[str] = None,
    sigmas: Optional[List[float]] = None,
    family: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> RunConfig:
    """
    Command-line flags on top of the file configuration
    """
    if out is not None:
        config = replace(config, outputs=replace(config.outputs, directory=out))
    if sigmas is not None:
        config = replace(config, bound=replace(config.bound, sigmas=tuple(sigmas)))
    if family is not None and family != config.spiral.family:
        config = replace(config, spiral=_switch_family(config.spiral, family))
    if seed is not None:
        config = replace(config, oracle=replace(config.oracle, seed=seed))
    if threads is not None:
        config = replace(config, threads=threads)
    return validate_config(config)


def write_table(table: pd.DataFrame, fdir: str, name: str, hash_value: str) -> str:
    os.makedirs(fdir, exist_ok=True)
    path = os.path.join(fdir, name + CSV_EXTENSION)
    table = table.copy()
    table["config_hash"] = hash_value
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_report(report: Dict[str, Any], fdir: str, name: str, hash_value: str) -> str:
    os.makedirs(fdir, exist_ok=True)
    path = os.path.join(fdir, name + JSON_EXTENSION)
    report = dict(report, config_hash=hash_value)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def write_flat_binary(
    array: np.ndarray, fdir: str, name: str, header: Dict[str, Any], hash_value: str
) -> str:
    """
    Raw little-endian dump of array next to a json header with dtype and shape
    """
    os.makedirs(fdir, exist_ok=True)
    array = np.ascontiguousarray(array)
    dtype = array.dtype.newbyteorder("<")
    path = os.path.join(fdir, name + BINARY_EXTENSION)
    array.astype(dtype).tofile(path)
    header = dict(header, dtype=dtype.str, shape=list(array.shape), file=name + BINARY_EXTENSION)
    write_report(header, fdir, name, hash_value)
    return path


def read_flat_binary(fdir: str, name: str) -> Tuple[np.ndarray, Dict[str, Any]]:
    with open(os.path.join(fdir, name + JSON_EXTENSION), "r", encoding="utf-8") as f:
        header = json.load(f)
    array = np.fromfile(os.path.join(fdir, header["file"]), dtype=np.dtype(header["dtype"]))
    return array.reshape(header["shape"]), header


VERIFY_SCHEMA = {
    "config_hash": str,
    "family": str,
    "threshold": float,
    "eigenvalues": list,
    "rows": list,
    "all_hold": bool,
}
VERIFY_ROW_SCHEMA = {
    "sigma": float,
    "moment": float,
    "bound_total": float,
    "holds": bool,
}


def _check_fields(document: Dict[str, Any], schema: Dict[str, type], where: str):
    for key, expected in schema.items():
        if key not in document:
            raise ReportError(f"{where}.{key}", "missing from report")
        value = document[key]
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) if expected is float else isinstance(value, expected)
        if not ok:
            raise ReportError(f"{where}.{key}", f"expected {expected.__name__}, got {type(value).__name__}")


def validate_report(report: Dict[str, Any]) -> Dict[str, Any]:
    """
    Structural check of a verification report, as written or as read back
    """
    _check_fields(report, VERIFY_SCHEMA, "report")
    for i, row in enumerate(report["rows"]):
        _check_fields(row, VERIFY_ROW_SCHEMA, f"report.rows[{i}]")
        if row["holds"] != (row["moment"] <= row["bound_total"]):
            raise ReportError(f"report.rows[{i}].holds", "inconsistent with moment and bound_total")
    if report["all_hold"] != all(row["holds"] for row in report["rows"]):
        raise ReportError("report.all_hold", "inconsistent with the rows")
    return report
