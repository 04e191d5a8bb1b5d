"""Gaussian-Hermite moment invariants of multi-channel fields.

Generation of invariant sets for rotation-affine (RA) and total-rotation
(TR) channel transforms, fast evaluation into feature vectors, and
experiment drivers for classification and template-matching studies.
"""

from .errors import (
    BadParamError,
    BadRangeError,
    DegenerateNormalizationError,
    DimMismatchError,
    EmptyTrainError,
    GhminvError,
    KTooLargeError,
    MissingMomentError,
    NotRotationError,
    ParseError,
    PointMismatchError,
    SingularMatrixError,
    WindowTooLargeError,
)
from .field import (
    MultiChannelField,
    RaTransform,
    add_gaussian_noise,
    add_salt_pepper,
    apply_outer_affine,
    apply_special_tr,
    circular_mask,
    random_ra_transform,
    rotate_spatial,
    subtract_channel_mean,
)
from .fieldio import load_field, save_field
from .moments import MomentTensor, compute_moments, gauss_hermite, hermite, orthogonality_check
from .polynomials import InvariantSet, MomentPolynomial, load_invariant_set, save_invariant_set
from .generator import (
    OperatorProduct,
    PrimitiveProduct,
    enumerate_operator_products,
    enumerate_primitive_products,
    expand_invariant,
    generate_all,
    generate_invariant_set,
    independence_filter,
)
from .features import FeatureVector, evaluate, feature_vector
from .harness import (
    DetectionResult,
    chi_square_distance,
    mre,
    nn_classify,
    rank_matches,
    sliding_window_scan,
    synth_texture,
    synth_vortex_field,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
