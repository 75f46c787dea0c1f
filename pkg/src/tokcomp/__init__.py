"""Token-wise CNN and BiLSTM sentence compression with a minimal
numpy autograd core and a training/timing harness."""

from .data import RawPair, SplitSpec, TokenizedExample, derive_mask, load_dataset, \
    pad_truncate, split_dataset, tokenize
from .features import EmbeddingTable, GloveFeatures, TcfFeatures, embed_sequence, \
    load_glove, read_feature_file, write_feature_file
from .models import ModelConfig, ModelParams, build, forward, forward_bilstm, \
    forward_unet, load_checkpoint, predict_mask, save_checkpoint
from .optim import AdamState, adam_step
from .tensor import Tensor, concat_channels, conv1d, dropout, lstm_cell, \
    masked_cross_entropy, maxpool1d, relu, token_softmax_head, upsample2
from .train_eval import RunReport, TrainConfig, compress, evaluate, train

__version__ = "0.1.0"
