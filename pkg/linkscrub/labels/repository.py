from typing import Dict, Iterator, List, Optional

from linkscrub.core.exceptions import NotFoundError
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.labels.models import Label, LabeledDecoration
from linkscrub.urls.models import DecorationId, DecorationKind


class LabelErrorWrapper(ErrorWrapper):
    def __init__(self):
        super(LabelErrorWrapper, self).__init__(
            error_mappings={
                KeyError: lambda exc: NotFoundError(f"no label for {exc.args[0] if exc.args else exc}"),
                TypeError: NotFoundError,
            },
        )


class LabelRepository:
    """In-memory store of labels keyed by DecorationId. Saving an existing id merges provenance."""

    def __init__(self, session: Optional[Dict[DecorationId, LabeledDecoration]] = None):
        self.session: Dict[DecorationId, LabeledDecoration] = session if session is not None else {}
        self.error_wrapper = LabelErrorWrapper()

    def save(self, obj: LabeledDecoration) -> LabeledDecoration:
        existing = self.session.get(obj.id)
        self.session[obj.id] = obj if existing is None else existing.merge(obj)
        return self.session[obj.id]

    def get(self, decoration_id: DecorationId) -> LabeledDecoration:
        with self.error_wrapper:
            return self.session[decoration_id]

    def filter(
        self,
        label: Optional[Label] = None,
        site: Optional[str] = None,
        kind: Optional[DecorationKind] = None,
    ) -> List[LabeledDecoration]:
        return [
            obj
            for obj in self
            if (label is None or obj.label == label)
            and (site is None or obj.id.site == site)
            and (kind is None or obj.id.kind == kind)
        ]

    def count(self, label: Optional[Label] = None) -> int:
        if label is None:
            return len(self.session)

        return len(self.filter(label=label))

    def labels(self) -> Dict[DecorationId, Label]:
        return {obj.id: obj.label for obj in self}

    def __contains__(self, decoration_id: DecorationId) -> bool:
        return decoration_id in self.session

    def __iter__(self) -> Iterator[LabeledDecoration]:
        return iter(sorted(self.session.values(), key=lambda obj: obj.id.sort_key))

    def __len__(self):
        return len(self.session)

    def __str__(self):
        return f"{type(self).__name__}({len(self)} labels)"


__all__ = [
    "LabelRepository",
    "LabelErrorWrapper",
]
