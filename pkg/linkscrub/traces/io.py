import hashlib
import json
import logging
from json import JSONDecodeError
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, TextIO, Tuple

from pydantic import ValidationError

from linkscrub.core.constants import TRACE_FORMAT_VERSION
from linkscrub.core.events import EventConsumer, EventProducer
from linkscrub.core.exceptions import LinkscrubError, ParsingError, TraceParsingError, TraceValidationError
from linkscrub.core.models import BaseModel
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.traces.models import EventKind, Trace, TraceEvent
from linkscrub.traces.validation import validate_trace

logger = logging.getLogger(__name__)

TRACE_SUFFIX = ".jsonl"
EVENT_KINDS = frozenset(kind.value for kind in EventKind)

file_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})


class TraceHeader(BaseModel):
    format: int
    trace_id: str = ""
    site: str = ""
    page_url: str = ""


def canonical_json(record: Dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def trace_digest(events: Iterable[TraceEvent]) -> str:
    """First 16 hex characters of the SHA-1 over the canonical event lines"""
    body = "\n".join(canonical_json(event.to_record()) for event in events)
    return hashlib.sha1(body.encode("utf-8")).hexdigest()[:16]


def line_errors(line_number: int) -> ErrorWrapper:
    return ErrorWrapper(
        error_mappings={
            JSONDecodeError: lambda exc: TraceParsingError(f"invalid JSON: {exc.msg}", line_number),
            ValidationError: lambda exc: TraceParsingError(f"invalid record: {exc}", line_number),
            TypeError: lambda exc: TraceParsingError(f"invalid record: {exc}", line_number),
        },
        skipped_errors={LinkscrubError},
    )


def _numbered_lines(stream: Iterable[str]) -> Iterator[Tuple[int, str]]:
    for line_number, line in enumerate(stream, start=1):
        line = line.strip()
        if line:
            yield line_number, line


def _read_header(line_number: int, line: str) -> TraceHeader:
    with line_errors(line_number):
        record = json.loads(line)

        if not isinstance(record, dict) or "format" not in record:
            raise TraceParsingError("missing format header", line_number)
        elif record["format"] != TRACE_FORMAT_VERSION:
            raise TraceParsingError(f"unsupported trace format {record['format']!r}", line_number)

        return TraceHeader(**record)


def _read_event(line_number: int, line: str) -> TraceEvent:
    with line_errors(line_number):
        record = json.loads(line)

        if not isinstance(record, dict):
            raise TraceParsingError("event must be a JSON object", line_number)
        elif record.get("kind") not in EVENT_KINDS:
            raise TraceParsingError(f"unknown event kind {record.get('kind')!r}", line_number)

        return TraceEvent(**record)


class TraceReader(EventConsumer[TraceEvent]):
    """
    Streams the events of one trace file. The header is available after the first event is consumed.
    Ordering and request references are checked while streaming.
    """

    def __init__(self, source: Path | Iterable[str], callbacks=None):
        super(TraceReader, self).__init__(callbacks)
        self.source = source
        self.header: Optional[TraceHeader] = None
        self._stream: Optional[Iterable[str]] = None

    @file_errors.decorate
    def start(self) -> None:
        if isinstance(self.source, Path):
            self._stream = self.source.open(encoding="utf-8")
        else:
            self._stream = self.source

    def close(self) -> None:
        if isinstance(self.source, Path) and self._stream is not None:
            self._stream.close()

        self._stream = None

    def consume(self) -> Iterator[TraceEvent]:
        if self._stream is None:
            self.start()

        previous_seq: Optional[int] = None
        request_ids: set[str] = set()

        for line_number, line in _numbered_lines(self._stream):
            if self.header is None:
                self.header = _read_header(line_number, line)
                continue

            event = _read_event(line_number, line)

            if previous_seq is not None and event.seq <= previous_seq:
                raise TraceParsingError(f"seq {event.seq} does not follow seq {previous_seq}", line_number)

            if event.kind == EventKind.RESPONSE and event.payload.request_id not in request_ids:
                raise TraceParsingError(f"response to unknown request {event.payload.request_id!r}", line_number)
            elif event.kind == EventKind.REDIRECT and event.payload.from_request_id not in request_ids:
                raise TraceParsingError(
                    f"redirect from unknown request {event.payload.from_request_id!r}",
                    line_number,
                )

            if event.kind in (EventKind.REQUEST, EventKind.ELEMENT_REQUEST, EventKind.REDIRECT):
                request_ids.add(event.payload.request_id)

            previous_seq = event.seq
            self.notify(event)
            yield event


def parse_trace(stream: str | Iterable[str] | TextIO) -> Trace:
    if isinstance(stream, str):
        stream = stream.splitlines()

    with TraceReader(stream) as reader:
        events = list(reader.consume())
        header = reader.header

    if header is None:
        return Trace()

    first = events[0] if events else None
    trace = Trace(
        trace_id=header.trace_id or trace_digest(events),
        site=header.site or (first.site if first else ""),
        page_url=header.page_url or (first.page_url if first else ""),
        events=events,
    )

    report = validate_trace(trace)
    if not report.ok:
        raise TraceValidationError(report.render())

    logger.debug("Parsed trace %s with %d events", trace.trace_id, len(events))
    return trace


class TraceWriter(EventProducer[TraceEvent]):
    """Writes the header on start() and one canonical line per produced event"""

    def __init__(self, target: Path | TextIO, header: TraceHeader):
        self.target = target
        self.header = header
        self._stream: Optional[TextIO] = None

    @file_errors.decorate
    def start(self) -> None:
        if isinstance(self.target, Path):
            self._stream = self.target.open("w", encoding="utf-8", newline="\n")
        else:
            self._stream = self.target

        self._stream.write(canonical_json(self.header.dict()) + "\n")

    def produce(self, event: TraceEvent) -> None:
        self._stream.write(canonical_json(event.to_record()) + "\n")

    def close(self) -> None:
        if isinstance(self.target, Path) and self._stream is not None:
            self._stream.close()

        self._stream = None


def with_trace_id(trace: Trace) -> Trace:
    if trace.trace_id:
        return trace

    return trace.copy(update={"trace_id": trace_digest(trace.events)})


def _header_of(trace: Trace) -> TraceHeader:
    return TraceHeader(
        format=TRACE_FORMAT_VERSION,
        trace_id=trace.trace_id,
        site=trace.site,
        page_url=trace.page_url,
    )


def dump_trace(trace: Trace) -> str:
    trace = with_trace_id(trace)
    lines = [canonical_json(_header_of(trace).dict())]
    lines.extend(canonical_json(event.to_record()) for event in trace.events)
    return "\n".join(lines) + "\n"


@file_errors.decorate
def read_trace(path: Path) -> Trace:
    return parse_trace(path.read_text(encoding="utf-8"))


def read_traces(path: Path | str) -> List[Trace]:
    """Loads one trace file or every `*.jsonl` file of a directory, in file name order"""
    path = Path(path)

    if not path.is_dir():
        return [read_trace(path)]

    traces = []
    for file in sorted(path.glob(f"*{TRACE_SUFFIX}")):
        try:
            traces.append(read_trace(file))
        except LinkscrubError as exc:
            # same error object, only the message gains the file name
            exc.args = (f"{file.name}: {exc}",)
            raise

    logger.info("Read %d traces from %s", len(traces), path)
    return traces


def write_traces(traces: Iterable[Trace], directory: Path | str) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    for trace in traces:
        trace = with_trace_id(trace)
        path = directory / f"{trace.trace_id}{TRACE_SUFFIX}"

        with TraceWriter(path, _header_of(trace)) as writer:
            for event in trace.events:
                writer.produce(event)

        written.append(path)

    return written


__all__ = [
    "TraceHeader",
    "TraceReader",
    "TraceWriter",
    "parse_trace",
    "dump_trace",
    "read_trace",
    "read_traces",
    "write_traces",
    "trace_digest",
    "with_trace_id",
    "canonical_json",
]
