"""INI files for settings and sweep manifests.

A setting file holds one ``[setting]`` section.  A sweep manifest holds a
``[sweep]`` section plus one ``[setting NAME]`` section per setting, so a
manifest is self-contained and round-trips exactly.  Floats are written
with ``repr`` to keep every bit.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..core_path import TABLE1, PathSpec, TcpConfig, ValidationError, check_probability

OUT_ENV = "TCPRATE_OUT"
DEFAULT_OUT = "tcprate-out"

DEFAULT_P_GRID = (0.0001, 0.0005, 0.001, 0.005, 0.01, 0.02, 0.03, 0.05, 0.10, 0.15, 0.20)

_PATH_KEYS = (
    "bottleneck_capacity",
    "access_capacity",
    "packet_size",
    "ack_size",
    "prop_delay",
)
_TCP_FLOATS = ("min_rto", "initial_rto")
_TCP_INTS = ("initial_window", "max_backoff")
SEED_POLICIES = ("fixed", "per-point")


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV) or DEFAULT_OUT


@dataclass(frozen=True)
class Setting:
    path: PathSpec
    tcp: TcpConfig = TcpConfig()

    @property
    def name(self) -> str:
        return self.path.label()


def table1_setting(name: str) -> Setting:
    try:
        return Setting(TABLE1[name])
    except KeyError:
        known = ", ".join(TABLE1)
        raise ValidationError("setting", f"unknown setting {name!r}; known: {known}") from None


@dataclass(frozen=True)
class SweepSpec:
    settings: tuple[Setting, ...] = field(
        default_factory=lambda: tuple(Setting(s) for s in TABLE1.values())
    )
    p_grid: tuple[float, ...] = DEFAULT_P_GRID
    #: runs at p >= ``long_run_below`` use ``packets``; smaller p use ``packets_low_p``
    packets: int = 10_000_000
    packets_low_p: int = 20_000_000
    long_run_below: float = 0.005
    seed: int = 1
    seed_policy: str = "fixed"
    out_dir: str = DEFAULT_OUT

    def __post_init__(self):
        if not self.settings:
            raise ValidationError("settings", "a sweep needs at least one setting")
        if not self.p_grid:
            raise ValidationError("p_grid", "empty p grid")
        for p in self.p_grid:
            check_probability(p, "p_grid")
        for name in ("packets", "packets_low_p"):
            if getattr(self, name) < 1:
                raise ValidationError(name, "must be >= 1")
        if self.seed_policy not in SEED_POLICIES:
            raise ValidationError("seed_policy", f"one of {SEED_POLICIES}")
        names = [s.name for s in self.settings]
        if len(set(names)) != len(names):
            raise ValidationError("settings", "setting names must be unique")

    def packets_for(self, p: float) -> int:
        return self.packets if p >= self.long_run_below else self.packets_low_p

    def seed_for(self, setting: str, p: float) -> int:
        if self.seed_policy == "fixed":
            return self.seed
        digest = hashlib.sha256(f"{self.seed}|{setting}|{p!r}".encode()).digest()
        return int.from_bytes(digest[:8], "little") >> 1

    def points(self) -> list[tuple[Setting, float]]:
        return [(s, p) for s in self.settings for p in self.p_grid]


# -- serialisation -----------------------------------------------------------


def _setting_items(setting: Setting) -> dict[str, str]:
    items = {k: repr(getattr(setting.path, k)) for k in _PATH_KEYS}
    items["receiver_window"] = str(setting.path.receiver_window)
    for k in _TCP_FLOATS:
        items[k] = repr(float(getattr(setting.tcp, k)))
    for k in _TCP_INTS:
        items[k] = str(getattr(setting.tcp, k))
    return items


def _parse_setting(name: str, section) -> Setting:
    try:
        path = PathSpec(
            **{k: float(section[k]) for k in _PATH_KEYS},
            receiver_window=int(section["receiver_window"]),
            name=name,
        )
        tcp_kwargs = {k: float(section[k]) for k in _TCP_FLOATS if k in section}
        tcp_kwargs.update({k: int(section[k]) for k in _TCP_INTS if k in section})
    except KeyError as exc:
        raise ValidationError(str(exc.args[0]), f"missing in setting {name!r}") from None
    except ValueError as exc:
        raise ValidationError("setting", f"{name!r}: {exc}") from None
    if path.receiver_window < 2:
        raise ValidationError("receiver_window", "must be >= 2")
    for k in _PATH_KEYS:
        if not getattr(path, k) > 0:
            raise ValidationError(k, "must be strictly positive")
    return Setting(path, TcpConfig(**tcp_kwargs))


def setting_to_ini(setting: Setting) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["setting"] = {"name": setting.name, **_setting_items(setting)}
    return _dump(cp)


def setting_from_ini(text: str) -> Setting:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    if "setting" not in cp:
        raise ValidationError("setting", "no [setting] section")
    sec = cp["setting"]
    return _parse_setting(sec.get("name", ""), sec)


def load_setting(ref: str) -> Setting:
    """A built-in setting name, or the path of a setting file."""
    if ref in TABLE1:
        return table1_setting(ref)
    f = Path(ref)
    if f.is_file():
        return setting_from_ini(f.read_text())
    return table1_setting(ref)


def sweep_to_ini(spec: SweepSpec) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["sweep"] = {
        "settings": ", ".join(s.name for s in spec.settings),
        "p_grid": ", ".join(repr(float(p)) for p in spec.p_grid),
        "packets": str(spec.packets),
        "packets_low_p": str(spec.packets_low_p),
        "long_run_below": repr(float(spec.long_run_below)),
        "seed": str(spec.seed),
        "seed_policy": spec.seed_policy,
        "out_dir": spec.out_dir,
    }
    for s in spec.settings:
        cp[f"setting {s.name}"] = _setting_items(s)
    return _dump(cp)


def sweep_from_ini(text: str) -> SweepSpec:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    if "sweep" not in cp:
        raise ValidationError("sweep", "no [sweep] section")
    sw = cp["sweep"]
    names = [n.strip() for n in sw.get("settings", "").split(",") if n.strip()]
    settings = []
    for n in names:
        sec = f"setting {n}"
        settings.append(_parse_setting(n, cp[sec]) if sec in cp else table1_setting(n))
    kwargs = {}
    if "p_grid" in sw:
        kwargs["p_grid"] = tuple(float(x) for x in sw["p_grid"].split(",") if x.strip())
    for k in ("packets", "packets_low_p", "seed"):
        if k in sw:
            kwargs[k] = int(sw[k])
    if "long_run_below" in sw:
        kwargs["long_run_below"] = float(sw["long_run_below"])
    for k in ("seed_policy", "out_dir"):
        if k in sw:
            kwargs[k] = sw[k]
    return SweepSpec(settings=tuple(settings), **kwargs)


def _dump(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
