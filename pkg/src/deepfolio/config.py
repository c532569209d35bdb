"""Run configuration and its flat key-value file format.

Grammar (one option per line)::

    # comment
    key = value        # trailing comments allowed

Values are typed: integers (``42``), floats (``0.0025``, ``1e-4``),
booleans (``true``/``false``), quoted strings (``"db4"``), and flat lists
(``[close, high]``).  Bare words parse as strings, so ``agent = ddpg``
and ``agent = "ddpg"`` are equivalent; writing always quotes.  Every
field of :class:`RunConfig` round-trips losslessly (floats are written
with ``repr``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import get_args, get_origin

from .errors import ConfigError

KNOWN_AGENTS = ("ucrp", "winner", "loser", "ddpg", "gdpg", "ppo")


@dataclass
class RunConfig:
    """Every knob of an end-to-end run; reports snapshot all of it."""

    # data
    data_csv: str = ""
    train_end: str = ""
    test_end: str = ""
    features: list[str] = field(
        default_factory=lambda: ["close", "high", "close_denoised"]
    )
    # environment
    window_size: int = 50
    mu: float = 0.0025
    beta: float = 0.01
    vol_window: int = 20
    gamma: float = 0.99
    initial_weights: str = "cash"  # or comma-separated fractions incl. cash
    # denoising
    denoise_levels: int = 2
    denoise_wavelet: str = "db4"
    denoise_window: int = 64
    # agent selection
    agent: str = "ddpg"
    seed: int = 0
    # network sizes
    conv_channels: int = 8
    conv_kernel: int = 5
    hidden: int = 32
    rnn_hidden: int = 16
    # training
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    model_lr: float = 1e-3
    value_lr: float = 1e-3
    tau: float = 0.01
    noise_sigma: float = 0.1
    batch_size: int = 64
    replay_capacity: int = 100_000
    episodes: int = 200
    episode_length: int = 0
    warmup_steps: int = 0
    # gdpg
    alpha: float = 0.5
    gdpg_dual_ascent: bool = False
    dual_lr: float = 0.01
    # ppo
    clip_eps: float = 0.2
    ppo_epochs: int = 10
    ppo_init_std: float = 0.3
    ppo_use_prev_weights: bool = False
    # reporting
    periods_per_year: int = 252

    def validate(self) -> "RunConfig":
        if self.agent not in KNOWN_AGENTS:
            raise ConfigError(f"agent must be one of {KNOWN_AGENTS}, got {self.agent!r}")
        if "close" not in self.features:
            raise ConfigError("features must include 'close'")
        if self.window_size < 1:
            raise ConfigError("window_size must be >= 1")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        return self

    # -- serialization ----------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = _strip_comment(raw).strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")
            key, _, raw_value = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
            try:
                value = _parse_value(raw_value.strip())
            except ValueError as exc:
                raise ConfigError(f"{source}:{line_no}: {exc}") from exc
            kwargs[key] = _coerce(value, known[key].type, key, f"{source}:{line_no}")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"), source=str(path))


def _strip_comment(line: str) -> str:
    out = []
    in_string = False
    for ch in line:
        if ch == '"':
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
    return "".join(out)


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value of type {type(v).__name__}")


def _parse_value(raw: str):
    if raw == "":
        raise ValueError("empty value")
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part.strip()) for part in _split_list(inner)]
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        body = raw[1:-1]
        return body.replace('\\"', '"').replace("\\\\", "\\")
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw  # bare word string


def _split_list(inner: str) -> list[str]:
    parts, depth, in_string, cur = [], 0, False, []
    for ch in inner:
        if ch == '"':
            in_string = not in_string
        if ch == "," and depth == 0 and not in_string:
            parts.append("".join(cur))
            cur = []
            continue
        if ch == "[" and not in_string:
            depth += 1
        if ch == "]" and not in_string:
            depth -= 1
        cur.append(ch)
    parts.append("".join(cur))
    return parts


def _coerce(value, target_type, key: str, where: str):
    origin = get_origin(target_type) if not isinstance(target_type, str) else None
    name = target_type if isinstance(target_type, str) else getattr(target_type, "__name__", str(target_type))
    if name.startswith("list") or origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: {key} expects a list, got {value!r}")
        return [str(x) for x in value]
    if name == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: {key} expects true/false, got {value!r}")
        return value
    if name == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: {key} expects an integer, got {value!r}")
        return value
    if name == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: {key} expects a number, got {value!r}")
        return float(value)
    if name == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: {key} expects a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported config field type for {key}")
