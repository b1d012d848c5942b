"""Exception hierarchy shared by all modules.

Every error carries a ``wire_code`` so the broker can map it onto a
protocol-level error response without a big lookup table at the call site.
"""


class MitmError(Exception):
    """Base class for all domain errors raised by this package."""

    wire_code = "system-fault"


# --- term language ---------------------------------------------------------

class MalformedUri(MitmError):
    pass


# --- theory graph ----------------------------------------------------------

class CycleError(MitmError):
    pass


class UnresolvedReference(MitmError):
    pass


class DuplicateName(MitmError):
    pass


class UnknownSymbol(MitmError):
    wire_code = "unknown-symbol"


class ArityMismatch(MitmError):
    pass


class SortMismatch(MitmError):
    pass


class UntypableVariable(MitmError):
    pass


# --- codecs ----------------------------------------------------------------

class UnknownCodec(MitmError):
    pass


class ParamCountMismatch(MitmError):
    pass


class CodecSyntaxError(MitmError):
    pass


class DuplicateCodec(MitmError):
    pass


class DecodeError(MitmError):
    """Raised when raw data does not fit a codec; carries a path into the data."""

    def __init__(self, path, reason):
        self.path = list(path)
        self.reason = reason
        super().__init__(f"at {format_path(self.path)}: {reason}")


class EncodeError(MitmError):
    pass


# --- schema bridge ---------------------------------------------------------

class TargetTypeMismatch(MitmError):
    pass


class MissingRequiredField(MitmError):
    def __init__(self, field):
        self.field = field
        super().__init__(f"missing required field {field!r}")


class FieldDecodeError(MitmError):
    def __init__(self, field, path, reason):
        self.field = field
        self.path = list(path)
        self.reason = reason
        super().__init__(f"field {field!r} at {format_path(self.path)}: {reason}")


class SourceUnavailable(MitmError):
    pass


# --- broker / systems ------------------------------------------------------

class AmbiguousAlignment(MitmError):
    pass


class UnknownSystem(MitmError):
    wire_code = "unknown-system"


class NoAlignment(MitmError):
    wire_code = "no-alignment"


class AmbiguousTarget(MitmError):
    wire_code = "ambiguous-target"


class StaleHandle(MitmError):
    wire_code = "stale-handle"


class CodecMismatch(MitmError):
    wire_code = "codec-mismatch"


class SystemFault(MitmError):
    wire_code = "system-fault"


class TypeFault(MitmError):
    pass


class NotABijection(MitmError):
    pass


class ResourceExhausted(MitmError):
    pass


class BindError(MitmError):
    pass


class ConfigError(MitmError):
    pass


# --- knowledge graph -------------------------------------------------------

class UnresolvedEdge(MitmError):
    pass


class DuplicateVertex(MitmError):
    pass


def format_path(path):
    """Render a data path like ``[2].1`` (list index in brackets, key after dot)."""
    out = []
    for p in path:
        if isinstance(p, int):
            out.append(f"[{p}]")
        else:
            out.append(f".{p}")
    return "".join(out) if out else "<root>"
