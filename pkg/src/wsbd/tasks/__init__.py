from .classify import BinaryClassifier, accuracy, mse_loss, prediction
from .mnist import (MnistTask, PcaModel, load_idx, mnist_prediction, pca_apply, pca_fit,
                    pca_fit_transform, write_idx)
from .parity import ParityTask, generate_parity_dataset, parity, parity_prediction
from .vqe import VqeTask, vqe_cost

parity_loss = mse_loss

__all__ = [
    "BinaryClassifier", "MnistTask", "ParityTask", "PcaModel", "VqeTask", "accuracy",
    "generate_parity_dataset", "load_idx", "mnist_prediction", "mse_loss", "parity",
    "parity_loss", "parity_prediction", "pca_apply", "pca_fit", "pca_fit_transform",
    "prediction", "vqe_cost", "write_idx",
]
