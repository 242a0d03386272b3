"""Exception hierarchy shared by the codec, logic, and simulator layers."""


class GvnError(Exception):
    """Base class for all errors raised by this package."""


# -- codec ------------------------------------------------------------------

class CodecError(GvnError):
    pass


class MalformedHeader(CodecError):
    """A GVN header could not be parsed from the wire."""


class TruncatedHeader(MalformedHeader):
    """Fewer octets available than the header's declared length."""


class ReservedLength(MalformedHeader):
    """Length field carries the reserved value 255."""


class InvalidLength(MalformedHeader):
    """Length field below the minimum of 2 units."""


class InvalidHeader(CodecError):
    """Header fields violate a construction invariant."""


class InvalidPacket(CodecError):
    """IP packet fields violate a construction invariant."""


class AlreadyTagged(CodecError):
    """Attempt to push a GVN header onto a packet that already carries one."""


class NotTagged(CodecError):
    """Attempt to pop a GVN header from an untagged packet."""


class NextHeaderMismatch(CodecError):
    """Header's next-header field disagrees with the packet's protocol."""


class OversizePacket(CodecError):
    """Mangling would exceed the 65535-byte IP length limit."""


class BadLength(CodecError):
    """Checksum input is shorter than 20 bytes or not 4-byte aligned."""


# -- processing-logic framework ---------------------------------------------

class RegistryError(GvnError):
    pass


class DuplicateCode(RegistryError):
    pass


class ReservedCode(RegistryError):
    pass


# -- built-in logics ---------------------------------------------------------

class EmptyChain(GvnError):
    """A service chain with no functions cannot be installed or entered."""


class Oversize(GvnError):
    """Opaque payload too large to fit the variable-length header."""


class PlDataError(GvnError):
    """Logic-specific header data does not match its declared layout."""


# -- simulator ----------------------------------------------------------------

class SchemaError(GvnError):
    """Scenario document fails validation."""


class DanglingReference(SchemaError):
    """Scenario names a node that is not defined."""


class DuplicateNodeId(SchemaError):
    pass
