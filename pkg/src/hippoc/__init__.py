"""Exact randomness testing for Bernoulli bitstreams.

Library surface: exact arithmetic (`exactnum`), stream sources
(`bitstream`), the three test families (`randtests`), certified digit
extraction (`extract`), the oracle-to-oracle-free conversion (`convert`),
and the bound-verification harness (`verify`). The `hippoc` console script
wires them together.
"""

__version__ = "0.1.0"

from .bitstream import BitPrefix, SourceSpec, gen_adversarial, gen_bernoulli, read_bits, write_bits
from .convert import DEFAULT_FAMILY, DiagonalVerdict, OracleTestFamily, TruncatedUFamily, diagonal_member, diagonal_test
from .exactnum import (
    Comparison,
    DyadicExpansion,
    Rational,
    RealParam,
    compare_deviation,
    expansion_of,
)
from .extract import BitCertificate, ExtractionReport, extract_bit, extract_prefix
from .randtests import (
    CheckpointSummary,
    Outcome,
    TestVerdict,
    Witness,
    cauchy_test,
    checkpoint_size,
    checkpoints,
    oracle_test,
    slln_bound,
    slln_test,
)
from .verify import (
    CauchyMC,
    DiagonalMC,
    MeasureEstimate,
    MomentReport,
    OracleMC,
    SllnMC,
    brute_force_s4,
    chebyshev_check,
    exact_union_measure,
    fourth_central_moment,
    mc_estimate,
    moment_s4,
)

__all__ = [
    "__version__",
    "BitCertificate",
    "BitPrefix",
    "CauchyMC",
    "CheckpointSummary",
    "Comparison",
    "DEFAULT_FAMILY",
    "DiagonalMC",
    "DiagonalVerdict",
    "DyadicExpansion",
    "ExtractionReport",
    "MeasureEstimate",
    "MomentReport",
    "OracleMC",
    "OracleTestFamily",
    "Outcome",
    "Rational",
    "RealParam",
    "SllnMC",
    "SourceSpec",
    "TestVerdict",
    "TruncatedUFamily",
    "Witness",
    "brute_force_s4",
    "cauchy_test",
    "chebyshev_check",
    "checkpoint_size",
    "checkpoints",
    "compare_deviation",
    "diagonal_member",
    "diagonal_test",
    "exact_union_measure",
    "expansion_of",
    "extract_bit",
    "extract_prefix",
    "fourth_central_moment",
    "gen_adversarial",
    "gen_bernoulli",
    "mc_estimate",
    "moment_s4",
    "oracle_test",
    "read_bits",
    "slln_bound",
    "slln_test",
    "write_bits",
]
