"""Block-circulant transformer kernels and FPGA scheduling model."""

from ._blockcirc import (
    BlockCirculantMatrix,
    ComputeGraph,
    Error,
    FixedPointFormat,
    attention,
    build_encoder_graph,
    choose_format,
    compress,
    dequantize,
    fft,
    ifft,
    layer_time,
    quantize,
    schedule,
    softmax,
)

__all__ = [
    "BlockCirculantMatrix",
    "ComputeGraph",
    "Error",
    "FixedPointFormat",
    "attention",
    "build_encoder_graph",
    "choose_format",
    "compress",
    "dequantize",
    "fft",
    "ifft",
    "layer_time",
    "quantize",
    "schedule",
    "softmax",
]
