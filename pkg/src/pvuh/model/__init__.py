"""Networks: tokenizer, positional encodings, ST encoder, MAE decoder,
and fine-tuning heads."""

from .config import MICRO_CONFIG, ModelConfig, format_layout, parse_layout
from .finetune import FinetuneBatch, FinetuneModel, collate_finetune
from .mae import PretrainBatch, PretrainModel, PretrainOutput, chamfer_loss, collate_pretrain
from .params import count_params, param_breakdown
from .posenc import PositionalEncoders
from .tokenizer import MiniPointNet, fused_tokens

__all__ = [
    "MICRO_CONFIG", "ModelConfig", "format_layout", "parse_layout",
    "FinetuneBatch", "FinetuneModel", "collate_finetune",
    "PretrainBatch", "PretrainModel", "PretrainOutput", "chamfer_loss",
    "collate_pretrain",
    "count_params", "param_breakdown",
    "PositionalEncoders", "MiniPointNet", "fused_tokens",
]
