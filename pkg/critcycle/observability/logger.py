"""
Structured logs and trace spans for critcycle.

Events go to stderr as key-value records (coloured on a terminal, JSON lines
otherwise). Spans are no-ops until :func:`setup_telemetry` installs a provider.

Usage:
    from critcycle.observability.logger import get_logger, log_context, traced
    logger = get_logger(__name__)

    with log_context(sweep_index=3), traced("evolve", cycles=10):
        logger.info("evolve_done", steps=100000, final_N=2.41e4)
"""

from __future__ import annotations

import logging
import os
import sys
from contextlib import contextmanager
from typing import Any, Iterator, Optional

import structlog
from opentelemetry import trace

_SCALAR = (bool, int, float, str)


def configure_logging(debug: Optional[bool] = None, json: Optional[bool] = None) -> None:
    """(Re)configure the structlog pipeline; ``None`` picks CRITCYCLE_DEBUG and tty detection."""
    if debug is None:
        debug = bool(os.environ.get("CRITCYCLE_DEBUG"))
    if json is None:
        json = not sys.stderr.isatty()
    renderer = structlog.processors.JSONRenderer() if json else structlog.dev.ConsoleRenderer()
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(logging.DEBUG if debug else logging.INFO),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
    )


configure_logging()


def get_logger(name: str) -> structlog.typing.FilteringBoundLogger:
    return structlog.get_logger(name)


@contextmanager
def log_context(**fields: Any) -> Iterator[None]:
    """Attach *fields* to every event logged inside the block (same thread or task only)."""
    with structlog.contextvars.bound_contextvars(**fields):
        yield


_tracer = trace.get_tracer("critcycle")


@contextmanager
def traced(name: str, **attributes: Any) -> Iterator[Any]:
    """Open a span called *name*; scalar keyword arguments become span attributes."""
    with _tracer.start_as_current_span(name) as span:
        span.set_attributes({k: v for k, v in attributes.items() if isinstance(v, _SCALAR)})
        yield span


def setup_telemetry(service_name: str = "critcycle", endpoint: Optional[str] = None) -> bool:
    """
    Install a tracer provider for *service_name*.

    Spans are exported over OTLP when *endpoint* or OTEL_EXPORTER_OTLP_ENDPOINT
    is set and the ``otlp`` extra is installed. Returns whether an exporter was attached.
    """
    try:
        from opentelemetry.sdk.resources import Resource
        from opentelemetry.sdk.trace import TracerProvider
        from opentelemetry.sdk.trace.export import BatchSpanProcessor
    except ImportError:
        return False

    provider = TracerProvider(resource=Resource.create({"service.name": service_name}))
    target = endpoint or os.environ.get("OTEL_EXPORTER_OTLP_ENDPOINT")
    exporting = False
    if target:
        try:
            from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
        except ImportError:
            get_logger(__name__).warning("otlp_exporter_missing", endpoint=target, hint='pip install "critcycle[otlp]"')
        else:
            provider.add_span_processor(BatchSpanProcessor(OTLPSpanExporter(endpoint=target)))
            exporting = True
    trace.set_tracer_provider(provider)
    if exporting:
        get_logger(__name__).info("telemetry_configured", service=service_name, endpoint=target)
    return exporting
