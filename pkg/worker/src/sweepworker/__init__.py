"""External benchmark worker: a subprocess speaking the newline-delimited
wire protocol on stdin/stdout, executing inference through a pluggable
executor (a GPU-free stub by default, PyTorch when installed).
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
