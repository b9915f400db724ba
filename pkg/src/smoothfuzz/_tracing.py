"""OpenTelemetry spans for training, adaptation and experiment cells."""

import contextlib
import logging
from collections.abc import Generator
from typing import Any

from opentelemetry import trace
from opentelemetry.trace import StatusCode

from smoothfuzz._logging import log_structured
from smoothfuzz.exceptions import ConfigError

logger = logging.getLogger(__name__)

_VALID_EXPORTERS = {"otlp", "console", "none"}

_sdk_configured = False


def get_tracer() -> trace.Tracer:
    """Return an OTel Tracer scoped to 'smoothfuzz'."""
    return trace.get_tracer("smoothfuzz")


@contextlib.contextmanager
def span(
    name: str, attributes: dict[str, Any] | None = None
) -> Generator[trace.Span, None, None]:
    """Create a named OTel span as a context manager.

    Records exceptions and sets ERROR status on unhandled errors,
    then re-raises. No-op when no SDK is configured.
    """
    with get_tracer().start_as_current_span(name, attributes=attributes) as current:
        try:
            yield current
        except Exception as exc:
            current.record_exception(exc)
            current.set_status(StatusCode.ERROR, str(exc))
            raise


def setup_tracing(
    exporter: str,
    endpoint: str = "http://localhost:4317",
    service_name: str = "smoothfuzz",
    sample_rate: float = 1.0,
) -> None:
    """Install the OTel SDK TracerProvider with the requested exporter.

    Requires opentelemetry-sdk for anything but ``exporter="none"``.
    Idempotent: skips setup if already configured.

    Raises:
        ConfigError: On an unknown exporter or a missing SDK.
    """
    global _sdk_configured
    if exporter not in _VALID_EXPORTERS:
        raise ConfigError(
            f"Invalid tracing exporter '{exporter}'. "
            f"Valid exporters: {sorted(_VALID_EXPORTERS)}"
        )
    if exporter == "none" or _sdk_configured:
        return

    try:
        from opentelemetry.sdk.resources import Resource
        from opentelemetry.sdk.trace import TracerProvider
        from opentelemetry.sdk.trace.export import BatchSpanProcessor
        from opentelemetry.sdk.trace.sampling import TraceIdRatioBased
    except ImportError:
        raise ConfigError("OTel SDK not installed. Run: pip install smoothfuzz[otel]")

    provider = TracerProvider(
        resource=Resource.create({"service.name": service_name}),
        sampler=TraceIdRatioBased(sample_rate),
    )

    if exporter == "otlp":
        try:
            from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import (
                OTLPSpanExporter,
            )
        except ImportError:
            raise ConfigError(
                "OTLP gRPC exporter not installed. Run: pip install smoothfuzz[otel]"
            )
        span_exporter = OTLPSpanExporter(endpoint=endpoint)
    else:
        from opentelemetry.sdk.trace.export import ConsoleSpanExporter

        span_exporter = ConsoleSpanExporter()

    provider.add_span_processor(BatchSpanProcessor(span_exporter))
    trace.set_tracer_provider(provider)
    _sdk_configured = True
    log_structured(logger, logging.INFO, "Tracing enabled", exporter=exporter, service=service_name)
