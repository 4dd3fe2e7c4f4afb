from .model import (
    LayerSpec,
    MlpModel,
    backward,
    classifier_specs,
    dense_stack,
    forward,
    init_model,
    loss,
    make_dropout_masks,
    regressor_specs,
    softmax,
)
from .modelfile import from_bytes, load_model, save_model, to_bytes, to_text
from .optim import AdamState, adam_step
from .predict import CLASSES, predict_classifier, predict_regressor
from .training import (
    ArrayDataset,
    EarlyStopping,
    TrainConfig,
    TrainHistory,
    classifier_train_config,
    regressor_train_config,
    train,
)
