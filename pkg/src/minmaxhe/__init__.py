"""Min-Max normalized networks whose activations can be swapped for low-degree
Chebyshev polynomials, folded into division-free form, and costed as
leveled-HE circuits."""

from .approx import (ELU, RELU, ActivationKind, ChebyshevSeries, activate,
                     chebyshev_eval, error_profile, fit_chebyshev, to_monomial)
from .circuit import CircuitReport, depth_report
from .fold import divfree_rewrite, fold_minmax, hybrid_plan, swap_activations, uniform_plan
from .layers import (Activation, AvgPool, Conv2D, Dense, Flatten, GlobalAvgPool,
                     GlobalSumPool, MinMax, MinMaxState, Network, PolyActivation,
                     SumPool, minmax_forward_infer, minmax_forward_train)
from .model_io import build_network, load_model, reference_config, save_model
from .train import (AdadeltaState, TrainConfig, adadelta_step, evaluate_accuracy,
                    fit, softmax_crossentropy, train_epoch)

__version__ = "0.1.0"
