from enum import Enum
from typing import Any, Dict, List, Tuple, Union

from pydantic import conint, constr, validator

from linkscrub.core.models import BaseModel, FrozenModel

DOCUMENT = "document"


class EventKind(str, Enum):
    SCRIPT_LOAD = "script_load"
    EVAL_SCRIPT = "eval_script"
    STORAGE_SET = "storage_set"
    STORAGE_GET = "storage_get"
    REQUEST = "request"
    RESPONSE = "response"
    REDIRECT = "redirect"
    ELEMENT_CREATE = "element_create"
    ELEMENT_REQUEST = "element_request"


class StoreKind(str, Enum):
    COOKIE = "cookie"
    LOCAL_STORAGE = "localStorage"


class ScriptLoadPayload(FrozenModel):
    url: str
    length: conint(ge=0) = 0
    parent: str = DOCUMENT


class EvalScriptPayload(FrozenModel):
    parent: str
    length: conint(ge=0) = 0


class StoragePayload(FrozenModel):
    store: StoreKind
    key: str
    value: str = ""


class RequestPayload(FrozenModel):
    request_id: constr(min_length=1)
    url: str


class ResponsePayload(FrozenModel):
    request_id: constr(min_length=1)
    status: int = 200
    set_storage: Tuple[StoragePayload, ...] = ()
    body: str = ""


class RedirectPayload(FrozenModel):
    from_request_id: constr(min_length=1)
    to_url: str
    request_id: constr(min_length=1)


class ElementCreatePayload(FrozenModel):
    element_id: constr(min_length=1)
    tag: str = ""


Payload = Union[
    ScriptLoadPayload,
    EvalScriptPayload,
    StoragePayload,
    RequestPayload,
    ResponsePayload,
    RedirectPayload,
    ElementCreatePayload,
]

PAYLOAD_MODELS: Dict[EventKind, type[FrozenModel]] = {
    EventKind.SCRIPT_LOAD: ScriptLoadPayload,
    EventKind.EVAL_SCRIPT: EvalScriptPayload,
    EventKind.STORAGE_SET: StoragePayload,
    EventKind.STORAGE_GET: StoragePayload,
    EventKind.REQUEST: RequestPayload,
    EventKind.RESPONSE: ResponsePayload,
    EventKind.REDIRECT: RedirectPayload,
    EventKind.ELEMENT_CREATE: ElementCreatePayload,
    EventKind.ELEMENT_REQUEST: RequestPayload,
}

STORAGE_KINDS = frozenset({EventKind.STORAGE_SET, EventKind.STORAGE_GET})
REQUEST_KINDS = frozenset({EventKind.REQUEST, EventKind.ELEMENT_REQUEST})


class TraceEvent(FrozenModel):
    seq: int
    kind: EventKind
    page_url: str
    site: str
    actor: str
    payload: Any

    @validator("payload", pre=True)
    def payload_matches_kind(cls, payload, values):
        kind = values.get("kind")
        if kind is None:
            raise ValueError("payload cannot be checked without a valid kind")

        model = PAYLOAD_MODELS[kind]
        if isinstance(payload, model):
            return payload
        elif isinstance(payload, FrozenModel):
            payload = payload.dict()

        if not isinstance(payload, dict):
            raise ValueError(f"payload of {kind.value} must be an object")

        return model(**payload)

    @property
    def request_id(self) -> str | None:
        """Request id created or referenced by the event"""
        return getattr(self.payload, "request_id", None)

    @property
    def url(self) -> str | None:
        if self.kind == EventKind.REDIRECT:
            return self.payload.to_url

        return getattr(self.payload, "url", None)

    def to_record(self) -> Dict[str, Any]:
        return {
            "seq": self.seq,
            "kind": self.kind.value,
            "page_url": self.page_url,
            "site": self.site,
            "actor": self.actor,
            "payload": _plain(self.payload.dict()),
        }


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    elif isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    elif isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]

    return value


class Trace(BaseModel):
    trace_id: str = ""
    site: str = ""
    page_url: str = ""
    events: List[TraceEvent] = []

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def requests(self) -> List[TraceEvent]:
        return [
            event for event in self.events if event.kind in REQUEST_KINDS or event.kind == EventKind.REDIRECT
        ]


__all__ = [
    "DOCUMENT",
    "EventKind",
    "StoreKind",
    "ScriptLoadPayload",
    "EvalScriptPayload",
    "StoragePayload",
    "RequestPayload",
    "ResponsePayload",
    "RedirectPayload",
    "ElementCreatePayload",
    "Payload",
    "PAYLOAD_MODELS",
    "STORAGE_KINDS",
    "REQUEST_KINDS",
    "TraceEvent",
    "Trace",
]
