class FlowmapError(Exception):
    """Base class for all errors raised by this package"""


class InstanceFormatError(FlowmapError, ValueError):
    """Malformed instance or mapping document"""

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class MalformedMappingError(FlowmapError, ValueError):
    """Mapping refers to links or nodes that do not exist"""


class OracleLimitError(FlowmapError, ValueError):
    """Instance too large for brute-force enumeration"""


class ReductionError(FlowmapError, ValueError):
    """Invalid arguments for the longest-path reduction"""
