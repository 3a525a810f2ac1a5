"""Landmark-driven facial component mixing for expression recognition."""

from facemixup.errors import FaceMixupError
from facemixup.landmarks import (
    COMPONENTS,
    ComponentRegion,
    FaceImage,
    FacialComponent,
    LandmarkSet,
    derive_region,
    parse_landmark_file,
    serialize_landmarks,
    validate_pair,
)
from facemixup.loss import (
    MixWeights,
    cross_entropy,
    facemixup_loss,
    facemixup_rs_loss,
    mixaugment_loss,
    mixup_loss,
    rs_loss,
)
from facemixup.mixer import (
    MixPlan,
    compose_mixed_face,
    count_possible_mixes,
    sample_components,
    sample_pair,
)

__version__ = "0.1.0"

__all__ = [
    "COMPONENTS",
    "ComponentRegion",
    "FaceImage",
    "FaceMixupError",
    "FacialComponent",
    "LandmarkSet",
    "MixPlan",
    "MixWeights",
    "compose_mixed_face",
    "count_possible_mixes",
    "cross_entropy",
    "derive_region",
    "facemixup_loss",
    "facemixup_rs_loss",
    "mixaugment_loss",
    "mixup_loss",
    "parse_landmark_file",
    "rs_loss",
    "sample_components",
    "sample_pair",
    "serialize_landmarks",
    "validate_pair",
]
