"""Reference model-backend server for the selftalk wire protocol.

Implements the protocol from PROTOCOL.md independently of the client
package: pure standard library, one JSON object per line, stdio or TCP.
Stub mode answers every request deterministically with no models
installed; real mode wraps local ASR/encoder models when their optional
dependencies are present.
"""

__version__ = "0.1.0"
