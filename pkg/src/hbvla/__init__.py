"""1-bit post-training weight binarization toolkit.

Quantizes dense weight matrices to sign bit-planes with group metadata:
a policy-aware Hessian ranks salient columns, a greedy column
permutation packs similar columns into Haar windows, the Haar-domain
subbands are binarized group-wise with shared means, and salient
columns are refined on the residual.  Layers serialize to a compact
bit-packed container with exact bit accounting.
"""

from .binarize import (GroupQuantParams, GroupSpec, dequantize_band,
                       quantize_band_grouped, quantize_band_shared_mean,
                       quantize_group, split_band)
from .haar import (HaarBands, haar_forward_cols, haar_forward_rows,
                   haar_inverse_cols, haar_inverse_rows, highpass_energy)
from .permute import (ColumnOrdering, DistanceTable, apply_ordering,
                      greedy_pair_and_chain, identity_ordering,
                      invert_ordering, optimal_pairing_oracle,
                      pairwise_distances)
from .pipeline import (BinarizedLayer, QuantConfig, QuantReport, bit_budget,
                       deserialize_layer, fill_salient_columns,
                       quantize_layer, quantize_nonsalient,
                       quantize_salient_residual, serialize_layer)
from .saliency import (AttentionBlockWeights, RectifiedHessian,
                       SaliencyPartition, TokenImportance, attention_forward,
                       block_loss, column_scores, obq_update,
                       projection_gradients, rectified_hessian,
                       select_salient, token_importance)
from .tensor import frobenius_distance, make_rng, matmul, read_tensor, write_tensor

__version__ = "0.1.0"
