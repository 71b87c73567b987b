"""
Rate-distortion secrecy for a Shannon cipher system with a rate-limited
henchman: rate-distortion solvers, the achievable region, a binning cipher
and the adversaries that probe it.
"""

__version__ = "0.1.0"

from .source import (
    CapExceeded,
    DistortionMeasure,
    Source,
    TypeVector,
    TypicalityParams,
    block_distortion,
    empirical_type,
    entropy,
    enumerate_distortion_levels,
    is_strongly_typical,
    sample_iid,
    typical_set_probability,
    typical_set_size,
)
from .ratedist import (
    BASolverConfig,
    ConvergenceError,
    RDCurve,
    RDPoint,
    binary_hamming_rd,
    blahut_arimoto,
    conditional_rd,
    rd_at_distortion,
    rd_curve,
)
from .codec import (
    AuditReport,
    CipherMessage,
    Codebook,
    EncodeOutcome,
    audit,
    decode,
    encode,
    equivocation,
    generate_codebook,
    load_codebook,
    save_codebook,
)
from .region import (
    GammaResult,
    RegionPoint,
    gamma,
    is_achievable,
    perfect_secrecy_threshold,
    r_de_estimate,
    surface_sample,
)
from .attacks import (
    AttackResult,
    InsufficientBudget,
    SuperblockObservation,
    brute_force_min_rate,
    key_index_attack,
    observe,
    rd_attack,
    timesharing_attack,
)
