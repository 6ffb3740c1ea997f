import math
import re
from os import environ as os_environ
from typing import Any, Literal, Mapping, Optional

import pydantic
import toml

from .testfn import TestFunctionSpec
from .volterra import InequalityParams, l_threshold
from .wavesim import DataSpec, ModelParams

ENV_PREFIX = 'FRACMEM'
MODE_TYPE = Literal['verify-fracops', 'verify-volterra', 'verify-testfn', 'simulate', 'sweep']
VERIFY_MODES = ('verify-fracops', 'verify-volterra', 'verify-testfn')


class ConfigError(ValueError):
    violations: list[str]
    lineno: Optional[int]

    def __init__(self, violations: list[str], lineno: Optional[int] = None) -> None:
        self.violations = violations
        self.lineno = lineno
        where = f' (line {lineno})' if lineno is not None else ''
        super().__init__(f'invalid config{where}: ' + '; '.join(violations))


def make_environ_key(key_path: str) -> str:
    """
    >>> make_environ_key('.model.T_max')
    'FRACMEM_MODEL_T_MAX'
    """
    return '_'.join([ENV_PREFIX] + re.findall('[A-Z0-9]+', key_path.upper()))


class LoggerRotatingConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra='forbid')

    when: str = 'd'
    interval: int = 1
    backup_count: int = 30
    suffix: str = '%Y%m%d'


class LoggerConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra='forbid')

    # https://docs.python.org/3/library/logging.html#logrecord-attributes
    format: str = '%(asctime)s %(name)s %(filename)s:%(lineno)d %(levelname)s - %(message)s'
    level: Literal['DEBUG', 'INFO', 'WARNING', 'ERROR'] = 'INFO'
    stream: Literal['stdout', 'stderr', 'file'] = 'stderr'
    name: Optional[str] = None
    file: Optional[str] = None
    rotating: Optional[LoggerRotatingConfig] = None


class InequalitySection(InequalityParams):
    l: float = 16.0

    @pydantic.model_validator(mode='after')
    def _l_above_threshold(self) -> 'InequalitySection':
        threshold = l_threshold(self.p, self.gamma)
        if not self.l > threshold:
            raise ValueError(f'l>p(3−γ)/(p−1)={threshold} required (l={self.l})')
        return self

    def params(self) -> InequalityParams:
        return InequalityParams.model_validate(self.model_dump(exclude={'l'}))


class SweepSection(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    p_values: list[float] = [1.2, 1.5, 1.9, 2.0]

    @pydantic.field_validator('p_values')
    @classmethod
    def _sorted(cls, value: list[float]) -> list[float]:
        if any(b < a for a, b in zip(value, value[1:])):
            raise ValueError(f'p_values must be sorted ascending ({value})')
        if any(not p > 1 for p in value):
            raise ValueError(f'p>1 required for every sweep value ({value})')
        return value


class VerifySection(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    n_steps: int = 2000
    force_failure: bool = False

    @pydantic.field_validator('n_steps')
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f'n_steps must be at least 2 ({value})')
        return value


class RunConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    mode: MODE_TYPE = 'verify-fracops'
    seed: int = 0
    jobs: int = 1
    out: str = 'out'
    record_timing: bool = False
    model: ModelParams = ModelParams()
    inequality: InequalitySection = InequalitySection()
    testfn: Optional[TestFunctionSpec] = None
    data: DataSpec = DataSpec()
    sweep: SweepSection = SweepSection()
    verify: VerifySection = VerifySection()
    logger: Optional[LoggerConfig] = None

    @pydantic.field_validator('seed')
    @classmethod
    def _seed_u64(cls, value: int) -> int:
        if not 0 <= value < 2 ** 64:
            raise ValueError(f'seed must be an unsigned 64-bit integer ({value})')
        return value

    @pydantic.field_validator('jobs')
    @classmethod
    def _jobs_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f'jobs must be at least 1 ({value})')
        return value

    @pydantic.model_validator(mode='after')
    def _testfn_matches_model(self) -> 'RunConfig':
        if self.mode in ('simulate', 'sweep') and self.testfn is not None and self.testfn.N != self.model.N:
            raise ValueError(f'testfn.N={self.testfn.N} must equal model.N={self.model.N}')
        return self

    @property
    def test_function(self) -> TestFunctionSpec:
        if self.testfn is not None:
            return self.testfn
        return TestFunctionSpec.default_for(self.model.N, self.model.sigma, self.model.eta)


def _schema_document() -> dict[str, Any]:
    document = RunConfig().model_dump(mode='json', exclude_none=True)
    document['testfn'] = TestFunctionSpec().model_dump(mode='json')
    document['logger'] = LoggerConfig().model_dump(mode='json', exclude_none=True)
    return document


def _env_value(raw: str) -> Any:
    try:
        return toml.loads(f'value = {raw}')['value']
    except ValueError:
        return raw


def apply_env_overrides(document: dict[str, Any], environ: Mapping[str, str]) -> dict[str, Any]:
    """
    Every leaf key path known to the schema or present in the document may be replaced by
    FRACMEM_<TABLE>_<KEY>; values are read as TOML literals, falling back to strings.
    """
    dfs = [('', document, _schema_document())]  # list[(prefix, data, schema)]
    while dfs:
        prefix, data, schema = dfs.pop()
        if not isinstance(data, dict):
            raise ConfigError([f'config{prefix} must be a table'])
        for key in list(dict.fromkeys([*schema, *data])):
            key_path = f'{prefix}.{key}'
            known = schema.get(key)
            value = data.get(key, known)
            if isinstance(value, dict) or isinstance(known, dict):
                if isinstance(known, dict) and not any(make_environ_key(f'{key_path}.{k}') in environ
                                                       for k in known) and key not in data:
                    continue
                data.setdefault(key, {})
                dfs.append((key_path, data[key], known if isinstance(known, dict) else {}))
            else:
                env_key = make_environ_key(key_path)
                if env_key in environ:
                    data[key] = _env_value(environ[env_key])
    return document


def _violation(error: Any) -> str:
    where = '.'.join(str(part) for part in error['loc']) or 'config'
    message = str(error['msg']).removeprefix('Value error, ')
    return f'{where}: {message}'


def parse_config(text: str, environ: Optional[Mapping[str, str]] = None,
                 overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Parses a TOML run config, applies environment then top-level overrides, and validates
    every section, reporting all violations at once.
    """
    try:
        document = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigError([f'syntax error: {e.msg}'], lineno=e.lineno) from e
    document = apply_env_overrides(document, os_environ if environ is None else environ)
    for key, value in (overrides or {}).items():
        if value is not None:
            document[key] = value
    try:
        return RunConfig.model_validate(document)
    except pydantic.ValidationError as e:
        raise ConfigError([_violation(error) for error in e.errors()]) from e


def dump_config(config: RunConfig) -> str:
    document = config.model_dump(mode='json', exclude_none=True)
    for section in document.values():
        if isinstance(section, dict):
            for key, value in section.items():
                if isinstance(value, float) and not math.isfinite(value):
                    raise ConfigError([f'{key}: non-finite value cannot be written'])
    return toml.dumps(document)
