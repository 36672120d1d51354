"""Certified low-dimensional embeddings of snowflaked doubling metric spaces."""

__version__ = "0.1.0"

from .audit import LLRCertificate, llr_bound, llr_verify_embedding
from .embedder import (
    CertificationReport,
    DistortionReport,
    EmbeddingResult,
    SnowflakeParams,
    build_hierarchy,
    certify,
    derive_params,
    holder_check,
    measure_distortion,
    sample_embedding,
)
from .estimator import HeisenbergSnowflake, SnowflakeEmbedding
from .metric import (
    DoublingEstimate,
    FiniteMetricSpace,
    Net,
    estimate_doubling,
    from_points,
    greedy_net,
    load_space,
    snowflake,
    validate_metric,
)
from .partitions import (
    RadiusDistribution,
    boundary_audit,
    build_partition,
    locality_of,
    padding_audit,
    sample_radius,
)

__all__ = [
    "CertificationReport",
    "DistortionReport",
    "DoublingEstimate",
    "EmbeddingResult",
    "FiniteMetricSpace",
    "HeisenbergSnowflake",
    "LLRCertificate",
    "Net",
    "RadiusDistribution",
    "SnowflakeEmbedding",
    "SnowflakeParams",
    "boundary_audit",
    "build_hierarchy",
    "build_partition",
    "certify",
    "derive_params",
    "estimate_doubling",
    "from_points",
    "greedy_net",
    "holder_check",
    "llr_bound",
    "llr_verify_embedding",
    "load_space",
    "locality_of",
    "measure_distortion",
    "padding_audit",
    "sample_embedding",
    "sample_radius",
    "snowflake",
    "validate_metric",
]
