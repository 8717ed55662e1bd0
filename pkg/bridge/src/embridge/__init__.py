"""Reference server for the em-matcher/1 wire protocol."""

from .server import BridgeConfig, handle_request, serve

__version__ = "0.1.0"

__all__ = ["BridgeConfig", "handle_request", "serve"]
