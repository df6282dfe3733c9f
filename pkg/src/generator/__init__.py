"""Topology generator network and training package."""

from .network import (
    CheckpointFormatError,
    GeneratorNet,
    SoftAdjacency,
    AdamConfig,
    AdamState,
    layer_sizes,
    init_net,
    forward,
    post_process,
    adam_update,
    adam_step,
    save_checkpoint,
    load_checkpoint,
)
from .trainer import (
    TrainingError,
    TrainConfig,
    TrainResult,
    GeneratorTrainer,
    Proposal,
    train,
    propose_topology,
)

__all__ = [
    'CheckpointFormatError', 'GeneratorNet', 'SoftAdjacency', 'AdamConfig', 'AdamState',
    'layer_sizes', 'init_net', 'forward', 'post_process', 'adam_update', 'adam_step',
    'save_checkpoint', 'load_checkpoint',
    'TrainingError', 'TrainConfig', 'TrainResult', 'GeneratorTrainer', 'Proposal',
    'train', 'propose_topology',
]
