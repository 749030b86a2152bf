from .gradcheck import grad_check, numeric_grad, relative_error
from .layers import (
    EmptySequence,
    GruParams,
    Parameter,
    ShapeMismatch,
    bigru,
    bigru_backward,
    bigru_forward,
    char_cnn,
    char_cnn_batch_backward,
    char_cnn_batch_forward,
    dropout,
    dropout_backward,
    gru_cell,
    gru_cell_backward,
    gru_cell_forward,
    gru_sequence,
    gru_sequence_backward,
    l2_penalty,
    linear,
    linear_backward,
    uniform_init,
)
from .optim import Adam, adam_step
