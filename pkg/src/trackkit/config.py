"""JSON run configuration for the rolling backtest."""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .catalogue import MODEL_TAGS, get_model
from .errors import ConfigError, ContractViolation
from .numerics import parse_strategy

_KEYS = {"data", "index_col", "in_len", "out_len", "step", "K", "models", "strategy", "seed", "rf", "out",
         "time_limit", "workers"}
_MODEL_KEYS = {"tag", "params"}


@dataclass
class ModelEntry:
    tag: str
    params: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    data: str
    models: list
    index_col: str = None
    in_len: int = 504
    out_len: int = 63
    step: int = 63
    K: int = 45
    strategy: object = "RelaxSelectReoptimize"
    seed: int = 0
    rf: float = 0.0
    out: str = "results"
    time_limit: float = 1800.0
    workers: int = 1

    def to_dict(self):
        d = asdict(self)
        d["models"] = [{"tag": m.tag, "params": m.params} for m in self.models]
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _int(d, key, lo):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}, got {v!r}")
    return v


def _model_entry(item):
    if isinstance(item, str):
        item = {"tag": item}
    if not isinstance(item, dict):
        raise ConfigError(f"model entries must be a tag or an object, got {item!r}")
    extra = sorted(set(item) - _MODEL_KEYS)
    if extra:
        raise ConfigError(f"unknown keys in model entry: {extra}")
    if "tag" not in item:
        raise ConfigError("model entry lacks 'tag'")
    spec = get_model(item["tag"])
    params = item.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError(f"params for {spec.tag} must be an object")
    spec.resolve(params)
    return ModelEntry(spec.tag, dict(params))


def config_from_dict(raw, base_dir=None):
    """Validate a parsed JSON object and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {unknown}; accepted: {sorted(_KEYS)}")
    if "data" not in raw:
        raise ConfigError("configuration needs a 'data' path")
    models = raw.get("models")
    if not isinstance(models, list) or not models:
        raise ConfigError(f"'models' must be a non-empty list of tags; valid tags: {', '.join(MODEL_TAGS)}")
    entries = [_model_entry(m) for m in models]
    tags = [e.tag for e in entries]
    if len(set(tags)) != len(tags):
        raise ConfigError("each model may appear only once")
    data = Path(str(raw["data"]))
    if base_dir is not None and not data.is_absolute():
        data = Path(base_dir) / data
    cfg = RunConfig(data=str(data), models=entries)
    d = {**asdict(RunConfig("", [])), **raw}
    cfg.index_col = d["index_col"]
    cfg.in_len = _int(d, "in_len", 2)
    cfg.out_len = _int(d, "out_len", 1)
    cfg.step = _int(d, "step", 1)
    cfg.K = _int(d, "K", 1)
    cfg.seed = _int(d, "seed", 0)
    cfg.workers = _int(d, "workers", 1)
    try:
        parse_strategy(d["strategy"])
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    cfg.strategy = d["strategy"]
    for key in ("rf", "time_limit"):
        v = d[key]
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v)):
            raise ConfigError(f"{key} must be a finite number")
    if d["time_limit"] is not None and d["time_limit"] <= 0:
        raise ConfigError("time_limit must be positive")
    cfg.rf = float(d["rf"])
    cfg.time_limit = None if d["time_limit"] is None else float(d["time_limit"])
    out = Path(str(d["out"]))
    if base_dir is not None and "out" in raw and not out.is_absolute():
        out = Path(base_dir) / out
    cfg.out = str(out)
    return cfg


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(raw, base_dir=path.parent)
