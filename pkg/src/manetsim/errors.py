"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Bad scenario or parameter value. The CLI maps this to exit code 1."""

    def __init__(self, message, line=None, key=None):
        self.message = message
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class InvariantViolation(RuntimeError):
    """A runtime invariant was broken. The CLI maps this to exit code 2."""


class SchedulingError(InvariantViolation):
    pass


class ConservationError(InvariantViolation):
    def __init__(self, message, pkt_ids=()):
        self.pkt_ids = sorted(pkt_ids)
        shown = ", ".join(str(p) for p in self.pkt_ids[:20])
        more = "" if len(self.pkt_ids) <= 20 else f" (+{len(self.pkt_ids) - 20} more)"
        super().__init__(f"{message}: [{shown}]{more}" if self.pkt_ids else message)
