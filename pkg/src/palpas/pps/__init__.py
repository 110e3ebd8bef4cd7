from .service import PolicyService, PublishedPolicy
from .transport import HttpPpsTransport, InProcessPpsTransport

__all__ = [
    "HttpPpsTransport",
    "InProcessPpsTransport",
    "PolicyService",
    "PublishedPolicy",
]
