from .base import SGD, Adam, make_optimizer, masked_step
from .gradient_free import NelderMeadResult, SpsaCoefficients, nelder_mead_minimize, spsa_step, spsa_train
from .importance import ImportanceTracker, Metric, WindowStats, finalize_scores, importance_update
from .selection import (ActiveMask, Variant, exponential_keys, layer_scores, n_active_for,
                        sample_active_set, selection_probabilities)
from .train import (TRACE_COLUMNS, Budget, FreezeConfig, TrainResult, init_params, stream, train_baseline,
                    wsbd_train)


def reset_scores(tracker: ImportanceTracker, mask, variant: Variant = Variant.WSBD) -> ImportanceTracker:
    active = getattr(mask, "active", mask)
    if Variant(variant) is not Variant.NO_RESET:
        tracker.reset(active)
    return tracker


__all__ = [
    "SGD", "ActiveMask", "Adam", "Budget", "FreezeConfig", "ImportanceTracker", "Metric", "NelderMeadResult",
    "SpsaCoefficients", "TRACE_COLUMNS", "TrainResult", "Variant", "WindowStats", "exponential_keys",
    "finalize_scores", "importance_update", "init_params", "layer_scores", "make_optimizer", "masked_step",
    "n_active_for", "nelder_mead_minimize", "reset_scores", "sample_active_set", "selection_probabilities",
    "spsa_step", "spsa_train", "stream", "train_baseline", "wsbd_train",
]
