import pytest

from manetsim.scenario import parse_scenario


def static_config(positions, flows, duration=10.0, width=500, height=500, detection="none",
                  attackers=None, extra="", seed=1):
    """Config text for a motionless topology with fixed node positions."""
    lines = [
        f"seed = {seed}",
        "[world]", f"width = {width}", f"height = {height}",
        f"nodes = {len(positions)}", f"duration = {duration}",
        "[mobility]", "speed_min = 0", "speed_max = 0", "pause = 0",
        "[detection]", f"mode = {detection}",
    ]
    if attackers:
        lines += ["[attack]", "attackers = " + ",".join(str(a) for a in attackers)]
    for flow in flows:
        src, dst, *rest = flow
        rate = rest[0] if rest else 1
        lines += ["[flow]", f"src = {src}", f"dst = {dst}", f"rate = {rate}", "payload = 512", "start = 1"]
    lines.append("[positions]")
    lines += [f"{i} = {x}, {y}" for i, (x, y) in enumerate(positions)]
    return "\n".join(lines) + "\n" + extra


def static_scenario(*args, overrides=(), **kw):
    return parse_scenario(static_config(*args, **kw), overrides)


@pytest.fixture
def line3():
    return static_scenario([(0, 0), (200, 0), (400, 0)], [(0, 2)])
