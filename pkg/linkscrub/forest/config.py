import math
from enum import Enum
from typing import Optional, Union

from pydantic import confloat, conint, validator

from linkscrub.core.models import BaseModel

FEATURE_RULES = ("sqrt", "log2", "all")


class ClassBalance(str, Enum):
    DOWNSAMPLE = "downsample"
    NONE = "none"


class ForestConfig(BaseModel):
    tree_count: conint(ge=1) = 100
    max_depth: Optional[conint(ge=1)] = None
    min_split_size: conint(ge=2) = 2
    features_per_split: Union[conint(ge=1), str] = "sqrt"
    bootstrap: bool = True
    seed: int = 0
    class_balance: ClassBalance = ClassBalance.DOWNSAMPLE
    threshold: confloat(ge=0.0, le=1.0) = 0.5
    n_jobs: conint(ge=1) = 1

    @validator("features_per_split")
    def known_rule(cls, rule: Union[int, str]) -> Union[int, str]:
        if isinstance(rule, str) and rule not in FEATURE_RULES:
            raise ValueError(f"features_per_split must be an integer or one of {FEATURE_RULES}, got {rule!r}")

        return rule

    def features_for(self, feature_count: int) -> int:
        if self.features_per_split == "sqrt":
            count = math.ceil(math.sqrt(feature_count))
        elif self.features_per_split == "log2":
            count = math.ceil(math.log2(feature_count)) if feature_count > 1 else 1
        elif self.features_per_split == "all":
            count = feature_count
        else:
            count = self.features_per_split

        return max(1, min(count, feature_count))


__all__ = [
    "ClassBalance",
    "ForestConfig",
]
