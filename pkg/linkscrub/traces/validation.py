from typing import List, Tuple

from linkscrub.core.models import BaseModel
from linkscrub.traces.models import EventKind, REQUEST_KINDS, STORAGE_KINDS, Trace


class Finding(BaseModel):
    code: str
    message: str
    seqs: Tuple[int, ...] = ()


class ValidationReport(BaseModel):
    findings: List[Finding] = []

    @property
    def ok(self) -> bool:
        return not self.findings

    def __len__(self):
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)

    def render(self) -> str:
        if self.ok:
            return "trace is valid"

        return "\n".join(f"{finding.code}: {finding.message}" for finding in self.findings)


def validate_trace(trace: Trace) -> ValidationReport:
    """Checks every trace invariant and reports all violations. Never raises, never mutates."""
    findings: List[Finding] = []
    request_ids: dict[str, int] = {}
    elements: set[str] = set()
    previous = None

    for event in trace.events:
        if previous is not None:
            if event.seq == previous.seq:
                findings.append(
                    Finding(
                        code="duplicate-seq",
                        message=f"seq {event.seq} is used by two events",
                        seqs=(previous.seq, event.seq),
                    )
                )
            elif event.seq < previous.seq:
                findings.append(
                    Finding(
                        code="non-monotone-seq",
                        message=f"seq {event.seq} follows seq {previous.seq}",
                        seqs=(previous.seq, event.seq),
                    )
                )

        if trace.site and event.site != trace.site:
            findings.append(
                Finding(
                    code="site-mismatch",
                    message=f"event site {event.site!r} differs from trace site {trace.site!r}",
                    seqs=(event.seq,),
                )
            )

        if event.kind in STORAGE_KINDS and not event.payload.key:
            findings.append(
                Finding(code="empty-storage-key", message=f"{event.kind.value} without a key", seqs=(event.seq,))
            )
        elif event.kind == EventKind.RESPONSE:
            for write in event.payload.set_storage:
                if not write.key:
                    findings.append(
                        Finding(
                            code="empty-storage-key",
                            message="response sets storage without a key",
                            seqs=(event.seq,),
                        )
                    )

        if event.kind in (EventKind.RESPONSE, EventKind.REDIRECT):
            referenced = event.payload.request_id if event.kind == EventKind.RESPONSE else event.payload.from_request_id
            if referenced not in request_ids:
                findings.append(
                    Finding(
                        code="dangling-request",
                        message=f"{event.kind.value} references unknown request {referenced!r}",
                        seqs=(event.seq,),
                    )
                )

        if event.kind in REQUEST_KINDS or event.kind == EventKind.REDIRECT:
            request_id = event.payload.request_id
            if request_id in request_ids:
                findings.append(
                    Finding(
                        code="duplicate-request-id",
                        message=f"request id {request_id!r} is created twice",
                        seqs=(request_ids[request_id], event.seq),
                    )
                )
            else:
                request_ids[request_id] = event.seq

        if event.kind == EventKind.ELEMENT_CREATE:
            elements.add(event.payload.element_id)
        elif event.kind == EventKind.ELEMENT_REQUEST and event.actor not in elements:
            findings.append(
                Finding(
                    code="unknown-element",
                    message=f"element {event.actor!r} requests before it is created",
                    seqs=(event.seq,),
                )
            )

        previous = event

    return ValidationReport(findings=findings)


__all__ = [
    "Finding",
    "ValidationReport",
    "validate_trace",
]
