import json
from typing import TypeVar

from pydantic import BaseModel as PydanticBaseModel, Extra, ValidationError

from linkscrub.core.exceptions import ParsingError


T = TypeVar("T", bound="BaseModel")


class BaseModel(PydanticBaseModel):
    """Base for every linkscrub record. Unknown fields are rejected."""

    class Config:
        arbitrary_types_allowed = True
        validate_assignment = True
        extra = Extra.forbid

    @classmethod
    def loads(cls: type[T], data: str | bytes) -> T:
        try:
            return cls(**json.loads(data))
        except (ValidationError, TypeError, ValueError) as exc:
            raise ParsingError(f"{cls.__name__}: {exc}") from exc


class FrozenModel(BaseModel):
    """Immutable, hashable record"""

    class Config:
        frozen = True
        allow_mutation = False


__all__ = [
    "BaseModel",
    "FrozenModel",
]
