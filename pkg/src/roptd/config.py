"""Problem configuration files.

Configs are TOML documents::

    schema_version = 1
    algorithm = "interior"          # or "multiplicative"

    [[factors]]
    name = "x1"
    kind = "continuous"             # lower, upper, levels
    lower = -1.0
    upper = 1.0
    levels = 15

    [[factors]]
    name = "x4"
    kind = "categorical"
    values = [0, 1]

    [[responses]]
    terms = "1, x1, x2, x1*x2, x1^2, x2^2"

    [[responses]]
    family = "emax"                 # b1 defaults to 1
    b2 = 5.0
    factor = "x"

    [covariance]
    V0 = [[4, 3], [3, 9]]           # or R0 = ...

    [solver]                        # SolverOptions overrides
    delta = 1e-8

    [multiplicative]                # MultOptions overrides
    max_iters = 200000

    [symmetry]
    axes = ["x1", "x2"]
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .interior import SolverOptions
from .model import (
    CovarianceSpec,
    DesignSpace,
    FactorSpec,
    ModelError,
    ModelSpec,
    ResponseBasis,
    build_grid,
    correlation_from_covariance,
)
from .multiplicative import MultOptions

SCHEMA_VERSION = 1
ALGORITHMS = ("interior", "multiplicative")

_TOP_KEYS = {"schema_version", "algorithm", "factors", "responses", "covariance",
             "solver", "multiplicative", "symmetry", "name"}


class ConfigError(ValueError):
    pass


@dataclass
class ProblemConfig:
    factors: list[FactorSpec]
    responses: list[ResponseBasis]
    covariance: CovarianceSpec
    covariance_kind: str = "V0"
    solver: SolverOptions = field(default_factory=SolverOptions)
    multiplicative: MultOptions = field(default_factory=MultOptions)
    symmetry: list[str] = field(default_factory=list)
    algorithm: str = "interior"
    name: str = ""

    def __post_init__(self):
        self._space = None

    @property
    def factor_names(self) -> list[str]:
        return [f.name for f in self.factors]

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.responses)

    @property
    def space(self) -> DesignSpace:
        if self._space is None:
            self._space = build_grid(self.factors)
        return self._space

    def axis_indices(self, names) -> list[int]:
        out = []
        for n in names:
            if n not in self.factor_names:
                raise ConfigError(f"symmetry axis {n!r} is not a declared factor")
            out.append(self.factor_names.index(n))
        return out


_TERM_FACTOR = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)(?:\^(\d+))?$")


def parse_terms(text: str, names: list[str]) -> list[tuple[int, ...]]:
    """Parse ``"1, x1, x1*x2, x1^2"`` into exponent vectors over ``names``."""
    terms = []
    for raw in text.split(","):
        term = raw.strip()
        if not term:
            raise ConfigError(f"empty term in {text!r}")
        e = [0] * len(names)
        for part in term.split("*"):
            part = part.strip().replace(" ", "")
            if part == "1":
                continue
            m = _TERM_FACTOR.match(part)
            if not m:
                raise ConfigError(f"cannot parse factor {part!r} in term {term!r}")
            var, power = m.group(1), int(m.group(2) or 1)
            if var not in names:
                raise ConfigError(f"unknown variable {var!r} in term {term!r} (declared: {', '.join(names)})")
            e[names.index(var)] += power
        terms.append(tuple(e))
    if len(set(terms)) != len(terms):
        raise ConfigError(f"duplicate terms in {text!r}")
    return terms


def _options(cls, table, where):
    if table is None:
        return cls()
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ConfigError(f"[{where}]: unknown keys {unknown}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def _factor(i, t) -> FactorSpec:
    where = f"factors[{i}]"
    if not isinstance(t, dict) or "name" not in t:
        raise ConfigError(f"{where}: each factor needs a name")
    kind = t.get("kind", "continuous")
    try:
        if kind == "continuous":
            extra = set(t) - {"name", "kind", "lower", "upper", "levels"}
            if extra:
                raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
            for k in ("lower", "upper", "levels"):
                if k not in t:
                    raise ConfigError(f"{where}: continuous factor needs {k!r}")
            if not isinstance(t["levels"], int):
                raise ConfigError(f"{where}.levels must be an integer")
            return FactorSpec.continuous(t["name"], t["lower"], t["upper"], t["levels"])
        if kind == "categorical":
            extra = set(t) - {"name", "kind", "values"}
            if extra:
                raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
            return FactorSpec.categorical(t["name"], t.get("values", ()))
    except ModelError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.kind: expected 'continuous' or 'categorical', got {kind!r}")


def _response(i, t, names) -> ResponseBasis:
    where = f"responses[{i}]"
    if not isinstance(t, dict):
        raise ConfigError(f"{where} must be a table")
    try:
        if "terms" in t:
            extra = set(t) - {"terms"}
            if extra:
                raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
            return ResponseBasis.monomial(parse_terms(t["terms"], names))
        if "family" in t:
            if t["family"] != "emax":
                raise ConfigError(f"{where}.family: unknown family {t['family']!r}")
            extra = set(t) - {"family", "b1", "b2", "factor"}
            if extra:
                raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
            if "b2" not in t:
                raise ConfigError(f"{where}: emax needs b2")
            fac = t.get("factor", names[0])
            if fac not in names:
                raise ConfigError(f"{where}.factor: unknown variable {fac!r}")
            return ResponseBasis.emax(t.get("b1", 1.0), t["b2"], names.index(fac))
    except ConfigError as exc:
        if str(exc).startswith(where):
            raise
        raise ConfigError(f"{where}: {exc}") from None
    except ModelError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: needs either 'terms' or 'family'")


def _covariance(t, m) -> tuple[CovarianceSpec, str]:
    if not isinstance(t, dict):
        raise ConfigError("missing [covariance] table")
    extra = sorted(set(t) - {"V0", "R0"})
    if extra:
        raise ConfigError(f"[covariance]: unknown keys {extra}")
    present = [k for k in ("V0", "R0") if k in t]
    if len(present) != 1:
        raise ConfigError("[covariance]: give exactly one of V0 or R0")
    kind = present[0]
    M = np.array(t[kind], dtype=float)
    if M.shape != (m, m):
        raise ConfigError(f"[covariance].{kind}: expected {m}x{m} for {m} responses, got shape {M.shape}")
    if kind == "R0" and np.max(np.abs(np.diag(M) - 1)) > 1e-12:
        raise ConfigError("[covariance].R0 must have unit diagonal")
    try:
        return correlation_from_covariance(M), kind
    except ModelError as exc:
        raise ConfigError(f"[covariance].{kind}: {exc}") from None


def parse_config(text: str) -> ProblemConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    algorithm = data.get("algorithm", "interior")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    raw_factors = data.get("factors")
    if not raw_factors:
        raise ConfigError("at least one [[factors]] entry is required")
    factors = [_factor(i, t) for i, t in enumerate(raw_factors)]
    names = [f.name for f in factors]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate factor names {names}")
    raw_resp = data.get("responses")
    if not raw_resp:
        raise ConfigError("at least one [[responses]] entry is required")
    responses = [_response(i, t, names) for i, t in enumerate(raw_resp)]
    cov, kind = _covariance(data.get("covariance"), len(responses))
    sym = data.get("symmetry", {})
    if not isinstance(sym, dict) or set(sym) - {"axes"}:
        raise ConfigError("[symmetry] must be a table holding only an 'axes' list")
    axes = list(sym.get("axes", []))
    for a in axes:
        if a not in names:
            raise ConfigError(f"[symmetry].axes: unknown factor {a!r}")
    return ProblemConfig(
        factors=factors,
        responses=responses,
        covariance=cov,
        covariance_kind=kind,
        solver=_options(SolverOptions, data.get("solver"), "solver"),
        multiplicative=_options(MultOptions, data.get("multiplicative"), "multiplicative"),
        symmetry=axes,
        algorithm=algorithm,
        name=str(data.get("name", "")),
    )


def _configs_dir():
    return resources.files("roptd").joinpath("configs")


def bundled_configs() -> list[str]:
    return sorted(p.name for p in _configs_dir().iterdir() if p.name.endswith(".cfg"))


def resolve_config_path(path) -> Path:
    """``path`` itself if it exists, else a bundled config of that name."""
    p = Path(path)
    if p.exists():
        return p
    res = _configs_dir().joinpath(p.name)
    if res.is_file():
        return Path(str(res))
    raise ConfigError(f"config file {path!s} not found (bundled: {', '.join(bundled_configs())})")


def load_config(path) -> ProblemConfig:
    p = resolve_config_path(path)
    try:
        return parse_config(p.read_text(encoding="utf-8"))
    except ConfigError as exc:
        raise ConfigError(f"{p.name}: {exc}") from None
