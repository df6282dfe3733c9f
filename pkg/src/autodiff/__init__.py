"""Reverse-mode automatic differentiation package."""

from .tape import (
    Tape,
    TapeNode,
    Variable,
    TapeDomainError,
    add, sub, mul, div, neg, exp, log2, relu, min2, affine,
    matvec, row_softmax, detach, reshape, transpose, column, take, stack_columns, total,
)

__all__ = [
    'Tape', 'TapeNode', 'Variable', 'TapeDomainError',
    'add', 'sub', 'mul', 'div', 'neg', 'exp', 'log2', 'relu', 'min2', 'affine',
    'matvec', 'row_softmax', 'detach', 'reshape', 'transpose', 'column', 'take', 'stack_columns',
    'total',
]
