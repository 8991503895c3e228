"""Operator algebra quantum error correction in finite dimensions."""
from .applications import (
    FlowReport,
    Partition,
    classical_correctable,
    confusability_classes,
    correctable_after_noisy_teleport,
    information_flow,
    noisy_teleport_channel,
    teleport_channel,
)
from .channels import (
    Channel,
    ChannelError,
    apply,
    choi,
    classical_channel,
    compose,
    dual_apply,
    from_unitary_interaction,
    identity_channel,
    mix_kraus,
    same_map,
    tensor,
    unitary_channel,
)
from .correction import (
    CorrectionReport,
    is_conserved,
    is_correctable,
    is_noiseless_subsystem,
    max_conserved_algebra,
    max_correctable_algebra,
    petz_recovery,
    robustness_check,
    verify_correction,
)
from .numerics import Tolerance, null_space, partial_trace, pinv_sqrt
from .opspace import (
    BlockStructure,
    DecompositionError,
    OperatorSpace,
    StarAlgebra,
    commutant,
    contains,
    generate_algebra,
    intersect,
    orthonormalize,
    same_span,
    structure_decomposition,
)

__version__ = "0.1.0"
