"""Face identification with complete graphs over SIFT keypoints.

Pipeline: load a grayscale image, equalize it, extract scale-space
keypoints with 128-value descriptors, treat each image as the complete
graph over its keypoints, and score gallery/probe pairs by combining
vertex (descriptor) and edge (relative geometry) dissimilarities under
either a gallery-image-based or a reduced-point (one-to-one) match
constraint. Evaluation follows a two-group verification protocol with
prior EER, threshold transfer, and weighted error rates.
"""

from .config import DetectorConfig, MatchConfig
from .errors import GraphSiftError
from .evaluation import (
    ProtocolResult,
    RocPoint,
    ScoreRecord,
    WerReport,
    client_thresholds,
    far_frr_at,
    prior_eer,
    roc,
    run_protocol,
    wer,
)
from .facegraph import (
    CorrespondenceSet,
    EdgeAttr,
    FaceGraph,
    build_graph,
    directional_correspondence,
    edge_attr,
    mutual_correspondence,
)
from .imageio import GrayImage, histogram_equalize, load_image, save_pgm
from .matcher import (
    Constraint,
    MatchScore,
    WeightParams,
    gaussian_weight,
    gibmc_edge_score,
    gibmc_vertex_score,
    identify,
    match,
    rpbmc_pairs,
)
from .sift import Keypoint, extract_features
from .store import GalleryDb, load, save

__version__ = "1.0.0"

__all__ = [
    "Constraint",
    "CorrespondenceSet",
    "DetectorConfig",
    "EdgeAttr",
    "FaceGraph",
    "GalleryDb",
    "GrayImage",
    "GraphSiftError",
    "Keypoint",
    "MatchConfig",
    "MatchScore",
    "ProtocolResult",
    "RocPoint",
    "ScoreRecord",
    "WeightParams",
    "WerReport",
    "build_graph",
    "client_thresholds",
    "directional_correspondence",
    "edge_attr",
    "extract_features",
    "far_frr_at",
    "gaussian_weight",
    "gibmc_edge_score",
    "gibmc_vertex_score",
    "histogram_equalize",
    "identify",
    "load",
    "load_image",
    "match",
    "mutual_correspondence",
    "prior_eer",
    "roc",
    "rpbmc_pairs",
    "run_protocol",
    "save",
    "save_pgm",
    "wer",
]
