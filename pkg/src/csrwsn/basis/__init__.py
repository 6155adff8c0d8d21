from .bases import (
    BASIS_KINDS,
    LearnedBasisArtifacts,
    RepresentationBasis,
    assemble_basis,
    baseline_basis,
    dct_matrix,
    k_term_approx,
    learn_basis,
    make_basis,
)
from .gle import Embedding, gle_embed, similarity
from .wavelets import (
    HierarchicalPartition,
    LiftedWavelets,
    dyadic_partition,
    haar_coefficients,
    haar_forward,
    haar_inverse,
    haar_matrix,
    lift_forward,
    lift_inverse,
    train_lifting,
)
