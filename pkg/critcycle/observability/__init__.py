from .logger import configure_logging, get_logger, log_context, setup_telemetry, traced

__all__ = ["configure_logging", "get_logger", "log_context", "setup_telemetry", "traced"]
