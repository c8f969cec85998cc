from enum import Enum
from typing import FrozenSet, Iterable, List

from linkscrub.core.models import BaseModel
from linkscrub.urls.models import DecorationId


class Label(str, Enum):
    ATS = "ATS"
    NON_ATS = "NonATS"
    UNKNOWN = "Unknown"


class Provenance(str, Enum):
    REQUEST_FILTER = "request-filter"
    COOKIE_PURPOSE = "cookie-purpose"
    CURATED_LIST = "curated-list"


class Purpose(str, Enum):
    STRICTLY_NECESSARY = "strictly-necessary"
    FUNCTIONAL = "functional"
    ANALYTICS = "analytics"
    ADVERTISING = "advertising"


TRACKING_PURPOSES = frozenset({Purpose.ANALYTICS, Purpose.ADVERTISING})
ATS_PROVENANCE = frozenset({Provenance.COOKIE_PURPOSE, Provenance.CURATED_LIST})


def resolve_label(provenance: Iterable[Provenance]) -> Label:
    """ATS sources take precedence over an unflagged request"""
    provenance = set(provenance)

    if provenance & ATS_PROVENANCE:
        return Label.ATS
    elif Provenance.REQUEST_FILTER in provenance:
        return Label.NON_ATS

    return Label.UNKNOWN


class LabeledDecoration(BaseModel):
    id: DecorationId
    provenance: FrozenSet[Provenance] = frozenset()
    conflicts: List[str] = []

    @property
    def label(self) -> Label:
        return resolve_label(self.provenance)

    @property
    def is_conflict(self) -> bool:
        return self.label == Label.ATS and Provenance.REQUEST_FILTER in self.provenance

    def provenance_text(self) -> str:
        return ";".join(sorted(source.value for source in self.provenance))

    def merge(self, other: "LabeledDecoration") -> "LabeledDecoration":
        return LabeledDecoration(
            id=self.id,
            provenance=self.provenance | other.provenance,
            conflicts=[*self.conflicts, *(conflict for conflict in other.conflicts if conflict not in self.conflicts)],
        )


__all__ = [
    "Label",
    "Provenance",
    "Purpose",
    "TRACKING_PURPOSES",
    "ATS_PROVENANCE",
    "resolve_label",
    "LabeledDecoration",
]
