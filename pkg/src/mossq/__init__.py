"""mossq: software-emulated FP8 microscaling toolkit."""

from .errors import MossqError
from .fp8 import E4M3, E5M2, E8m0Rounding, Fp8Format
from .quantize import (
    PerGroupQuant,
    PerTensorQuant,
    TwoLevelQuant,
    dequantize,
    quant_per_group,
    quant_per_tensor,
    quant_two_level,
)
from .tensor import DType, tensor_randn, tensor_read, tensor_write

__version__ = "0.1.0"

__all__ = [
    "MossqError",
    "E4M3",
    "E5M2",
    "E8m0Rounding",
    "Fp8Format",
    "DType",
    "tensor_randn",
    "tensor_read",
    "tensor_write",
    "PerTensorQuant",
    "PerGroupQuant",
    "TwoLevelQuant",
    "quant_per_tensor",
    "quant_per_group",
    "quant_two_level",
    "dequantize",
    "__version__",
]
