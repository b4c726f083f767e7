"""Scenario description and the line-oriented ``key = value`` config format.

Grammar::

    # comment                  blank lines and comments are ignored
    seed = 7                   top-level keys come before any section
    [world]                    singleton sections: world radio queue
    width = 500                mobility aodv attack detection
    [flow]                     repeatable; one block per CBR flow
    src = 0
    [positions]                fixed start positions, "node = x, y"
    3 = 250, 50

Unknown sections or keys are rejected with the offending line number.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources

from .aodv import AodvParams
from .blackhole import AttackerProfile
from .engine import check_seed
from .errors import ConfigError
from .sentinel import DetectorConfig
from .world import MobilityConfig, RadioModel


@dataclass(frozen=True)
class Flow:
    src: int
    dst: int
    rate_pkts_per_s: float = 4.0
    payload_bytes: int = 512
    start_s: float = 1.0
    stop_s: float | None = None

    def send_times(self, duration):
        stop = duration if self.stop_s is None else min(self.stop_s, duration)
        k = 0
        while True:
            t = self.start_s + k / self.rate_pkts_per_s
            if t >= stop:
                return
            yield t
            k += 1


@dataclass(frozen=True)
class Scenario:
    width: float = 500.0
    height: float = 500.0
    node_count: int = 50
    sim_duration_s: float = 250.0
    hop_latency_s: float = 0.002
    radio: RadioModel = field(default_factory=RadioModel)
    queue_capacity: int = 50
    service_rate: float = 500.0
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    aodv: AodvParams = field(default_factory=AodvParams)
    flows: tuple = ()
    attackers: tuple = ()
    detection: DetectorConfig = field(default_factory=DetectorConfig)
    positions: tuple = ()
    seed: int = 1

    def __post_init__(self):
        validate(self)

    @property
    def area(self):
        return (self.width, self.height)

    @property
    def attacker_ids(self):
        return frozenset(a.node for a in self.attackers)

    def with_mode(self, mode):
        return dataclasses.replace(self, detection=dataclasses.replace(self.detection, mode=mode))

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=seed)


def validate(sc: Scenario):
    check_seed(sc.seed)
    if not sc.sim_duration_s > 0 or not math.isfinite(sc.sim_duration_s):
        raise ConfigError("duration must be a positive number", key="world.duration")
    if sc.node_count < 1:
        raise ConfigError("nodes must be >= 1", key="world.nodes")
    if not (sc.width > 0 and sc.height > 0):
        raise ConfigError("area must be positive", key="world.width")
    if sc.hop_latency_s < 0:
        raise ConfigError("hop_latency must be >= 0", key="world.hop_latency")
    if sc.queue_capacity < 1:
        raise ConfigError("capacity must be >= 1", key="queue.capacity")
    if not sc.service_rate > 0:
        raise ConfigError("service_rate must be > 0", key="queue.service_rate")

    def node_ok(n, key):
        if not 0 <= n < sc.node_count:
            raise ConfigError(f"node id {n} outside 0..{sc.node_count - 1}", key=key)

    for i, f in enumerate(sc.flows):
        node_ok(f.src, f"flow.{i}.src")
        node_ok(f.dst, f"flow.{i}.dst")
        if f.src == f.dst:
            raise ConfigError("flow src and dst must differ", key=f"flow.{i}.dst")
        if not f.rate_pkts_per_s > 0:
            raise ConfigError("rate must be > 0", key=f"flow.{i}.rate")
        if f.payload_bytes < 1:
            raise ConfigError("payload must be >= 1 byte", key=f"flow.{i}.payload")
        if f.start_s < 0 or (f.stop_s is not None and f.stop_s < f.start_s):
            raise ConfigError("need 0 <= start <= stop", key=f"flow.{i}.start")
    seen = set()
    sources = {f.src for f in sc.flows}
    for a in sc.attackers:
        node_ok(a.node, "attack.attackers")
        if a.node in seen:
            raise ConfigError(f"attacker {a.node} listed twice", key="attack.attackers")
        if a.node in sources:
            raise ConfigError(f"attacker {a.node} cannot originate a flow", key="attack.attackers")
        seen.add(a.node)
        if a.place_near is not None:
            node_ok(a.place_near, "attack.place_near")
    for node, x, y in sc.positions:
        node_ok(node, f"positions.{node}")
        if not (0 <= x <= sc.width and 0 <= y <= sc.height):
            raise ConfigError(f"position ({x}, {y}) outside the area", key=f"positions.{node}")


# -- key tables -----------------------------------------------------------

# section -> key -> (target name, type)
_SINGLE = {
    "": {"seed": ("seed", int)},
    "world": {
        "width": ("width", float), "height": ("height", float), "nodes": ("node_count", int),
        "duration": ("sim_duration_s", float), "hop_latency": ("hop_latency_s", float),
    },
    "radio": {"range": ("range", float), "loss_prob": ("loss_prob", float)},
    "queue": {"capacity": ("queue_capacity", int), "service_rate": ("service_rate", float)},
    "mobility": {
        "speed_min": ("speed_min", float), "speed_max": ("speed_max", float),
        "pause": ("pause_s", float),
    },
    "aodv": {
        "net_diameter": ("net_diameter", int), "start_ttl": ("start_ttl", int),
        "rreq_retries": ("rreq_retries", int), "node_traversal": ("node_traversal_s", float),
        "route_lifetime": ("route_lifetime_s", float), "repair_ttl": ("repair_ttl", int),
        "repair_timeout": ("repair_timeout_s", float), "pending_limit": ("pending_limit", int),
        "rreq_cache": ("rreq_cache_s", float), "initial_seq": ("initial_seq", int),
        "seq_adopt_ratio": ("seq_adopt_ratio", float),
    },
    "detection": {
        "mode": ("mode", str), "tau": ("tau", float), "rho": ("rho", float),
        "theta": ("theta", float), "window": ("window", int), "min_obs": ("min_obs", int),
    },
    "attack": {
        "attackers": ("node", "intlist"), "forged_seq": ("forged_seq", "intlist"),
        "forged_hops": ("forged_hops", "intlist"), "active_from": ("active_from", "floatlist"),
        "place_near": ("place_near", "intlist"),
    },
}
_FLOW = {
    "src": ("src", int), "dst": ("dst", int), "rate": ("rate_pkts_per_s", float),
    "payload": ("payload_bytes", int), "start": ("start_s", float), "stop": ("stop_s", float),
}


def _convert(raw, typ, line, key):
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        if typ is str:
            if not raw:
                raise ValueError
            return raw
        inner = int if typ == "intlist" else float
        return [_convert(part.strip(), inner, line, key) for part in raw.split(",") if part.strip()]
    except ValueError:
        kind = typ if isinstance(typ, str) else typ.__name__
        raise ConfigError(f"expected {kind}, got {raw!r}", line=line, key=key) from None


class _Raw:
    """Untyped parse result: section values with their line numbers."""

    def __init__(self):
        self.single: dict[str, dict[str, tuple]] = {}
        self.flows: list[dict[str, tuple]] = []
        self.positions: dict[int, tuple] = {}


def _read(text) -> _Raw:
    raw = _Raw()
    section = ""
    current = raw.single.setdefault("", {})
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", line=lineno)
            section = line[1:-1].strip()
            if section == "flow":
                current = {}
                raw.flows.append(current)
            elif section == "positions":
                current = None
            elif section in _SINGLE and section:
                if section in raw.single:
                    raise ConfigError(f"section [{section}] repeated", line=lineno)
                current = raw.single.setdefault(section, {})
            else:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        dotted = f"{section}.{key}" if section else key
        if section == "positions":
            try:
                node = int(key)
                x, y = (float(v) for v in value.split(","))
            except ValueError:
                raise ConfigError("expected 'node = x, y'", line=lineno, key=dotted) from None
            raw.positions[node] = (x, y, lineno)
            continue
        table = _FLOW if section == "flow" else _SINGLE[section]
        if key not in table:
            raise ConfigError("unknown key", line=lineno, key=dotted)
        if key in current:
            raise ConfigError("key given twice", line=lineno, key=dotted)
        current[key] = (value, lineno)
    return raw


def _apply_override(raw: _Raw, item: str):
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, value = (part.strip() for part in item.split("=", 1))
    parts = key.split(".")
    if len(parts) == 1 and key in _SINGLE[""]:
        raw.single.setdefault("", {})[key] = (value, None)
    elif len(parts) == 2 and parts[0] in _SINGLE and parts[0] and parts[1] in _SINGLE[parts[0]]:
        raw.single.setdefault(parts[0], {})[parts[1]] = (value, None)
    elif len(parts) == 3 and parts[0] == "flow" and parts[2] in _FLOW:
        try:
            idx = int(parts[1])
            target = raw.flows[idx]
        except (ValueError, IndexError):
            raise ConfigError("no such flow", key=key) from None
        target[parts[2]] = (value, None)
    elif len(parts) == 2 and parts[0] == "positions":
        try:
            x, y = (float(v) for v in value.split(","))
            raw.positions[int(parts[1])] = (x, y, None)
        except ValueError:
            raise ConfigError("expected node = x, y", key=key) from None
    else:
        raise ConfigError("unknown override key", key=key)


def _typed(raw: _Raw, section):
    out = {}
    for key, (value, line) in raw.single.get(section, {}).items():
        name, typ = _SINGLE[section][key]
        dotted = f"{section}.{key}" if section else key
        out[name] = _convert(value, typ, line, dotted)
    return out


def _line_of(raw, section, key):
    entry = raw.single.get(section, {}).get(key)
    return entry[1] if entry else None


def _locate(raw: _Raw, key):
    """Line number of a dotted key, when it came from the config text."""
    parts = key.split(".")
    try:
        if parts[0] == "flow" and len(parts) == 3:
            entry = raw.flows[int(parts[1])].get(parts[2])
        elif parts[0] == "positions" and len(parts) == 2:
            return raw.positions[int(parts[1])][2]
        elif len(parts) == 2:
            entry = raw.single.get(parts[0], {}).get(parts[1])
        else:
            entry = raw.single.get("", {}).get(key)
    except (ValueError, IndexError, KeyError):
        return None
    return entry[1] if entry else None


def _build(raw: _Raw) -> Scenario:
    try:
        return _assemble(raw)
    except ConfigError as exc:
        if exc.line is None and exc.key is not None:
            line = _locate(raw, exc.key)
            if line is not None:
                raise ConfigError(exc.message, line=line, key=exc.key) from None
        raise


def _assemble(raw: _Raw) -> Scenario:
    top = _typed(raw, "")
    world = _typed(raw, "world")
    radio = _typed(raw, "radio")
    queue = _typed(raw, "queue")
    mobility = _typed(raw, "mobility")
    aodv = _typed(raw, "aodv")
    detection = _typed(raw, "detection")
    attack = _typed(raw, "attack")

    flows = []
    for i, block in enumerate(raw.flows):
        values = {}
        for key, (value, line) in block.items():
            name, typ = _FLOW[key]
            values[name] = _convert(value, typ, line, f"flow.{i}.{key}")
        for needed in ("src", "dst"):
            if needed not in values:
                raise ConfigError("flow is missing a required key", key=f"flow.{i}.{needed}")
        flows.append(Flow(**values))

    attackers = []
    ids = attack.pop("node", [])
    for name, values in attack.items():
        if len(values) not in (1, len(ids)):
            raise ConfigError(
                f"expected 1 or {len(ids)} values", line=_line_of(raw, "attack", name),
                key=f"attack.{name}",
            )
    for i, node in enumerate(ids):
        kwargs = {name: values[0] if len(values) == 1 else values[i] for name, values in attack.items()}
        attackers.append(AttackerProfile(node, **kwargs))

    positions = tuple(sorted((n, x, y) for n, (x, y, _) in raw.positions.items()))

    return Scenario(
        radio=RadioModel(**radio),
        mobility=MobilityConfig(**mobility),
        aodv=AodvParams(**aodv),
        detection=DetectorConfig(**detection),
        flows=tuple(flows),
        attackers=tuple(attackers),
        positions=positions,
        **world, **queue, **top,
    )


def parse_scenario(text: str, overrides=()) -> Scenario:
    raw = _read(text)
    for item in overrides:
        _apply_override(raw, item)
    return _build(raw)


def load_scenario(path_or_name, overrides=()) -> Scenario:
    """Load a config file, or a bundled scenario by name (``table1``)."""
    return parse_scenario(read_config_text(path_or_name), overrides)


def bundled_names():
    return sorted(
        p.name[:-4] for p in resources.files("manetsim.scenarios").iterdir() if p.name.endswith(".cfg")
    )


def read_config_text(path_or_name) -> str:
    name = str(path_or_name)
    if name in bundled_names():
        return resources.files("manetsim.scenarios").joinpath(f"{name}.cfg").read_text()
    try:
        with open(name, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {name!r}: {exc.strerror}") from None


def _num(v):
    return repr(v) if isinstance(v, float) else str(v)


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of :func:`parse_scenario`."""
    lines = [f"seed = {sc.seed}", ""]

    def section(name, pairs):
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_num(v)}" for k, v in pairs)
        lines.append("")

    section("world", [("width", sc.width), ("height", sc.height), ("nodes", sc.node_count),
                      ("duration", sc.sim_duration_s), ("hop_latency", sc.hop_latency_s)])
    section("radio", [("range", sc.radio.range), ("loss_prob", sc.radio.loss_prob)])
    section("queue", [("capacity", sc.queue_capacity), ("service_rate", sc.service_rate)])
    section("mobility", [("speed_min", sc.mobility.speed_min), ("speed_max", sc.mobility.speed_max),
                         ("pause", sc.mobility.pause_s)])
    section("aodv", [(key, getattr(sc.aodv, name)) for key, (name, _) in _SINGLE["aodv"].items()])
    section("detection", [(key, getattr(sc.detection, name))
                          for key, (name, _) in _SINGLE["detection"].items()])
    if sc.attackers:
        pairs = [("attackers", ", ".join(str(a.node) for a in sc.attackers))]
        for key in ("forged_seq", "forged_hops", "active_from", "place_near"):
            values = [getattr(a, key) for a in sc.attackers]
            if key == "place_near":
                if all(v is None for v in values):
                    continue
                if any(v is None for v in values):
                    raise ConfigError("place_near must be given for every attacker or none")
            pairs.append((key, ", ".join(_num(v) for v in values)))
        lines.append("[attack]")
        lines.extend(f"{k} = {v}" for k, v in pairs)
        lines.append("")
    for f in sc.flows:
        pairs = [("src", f.src), ("dst", f.dst), ("rate", f.rate_pkts_per_s),
                 ("payload", f.payload_bytes), ("start", f.start_s)]
        if f.stop_s is not None:
            pairs.append(("stop", f.stop_s))
        section("flow", pairs)
    if sc.positions:
        lines.append("[positions]")
        lines.extend(f"{n} = {_num(x)}, {_num(y)}" for n, x, y in sc.positions)
        lines.append("")
    return "\n".join(lines)
