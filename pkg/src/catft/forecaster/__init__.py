from .model import (
    ForecasterConfig,
    ForecasterConfigError,
    ForecasterParams,
    forward,
    forward_batch,
    init,
    loss_and_grad,
    predict_many,
)
from .store import (
    FormatError,
    MissingModelError,
    ModelStore,
    load,
    naive_baseline,
    predict_step,
    save,
)
from .training import (
    Adam,
    TrainingDiverged,
    TrainingReport,
    TrainingSample,
    gradient_check,
    numerical_gradient,
    samples_from_windows,
    train,
)
