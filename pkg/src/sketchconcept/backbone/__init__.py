"""Desk-scale diffusion backbone: schedule, denoiser, sampling, pretraining."""

from .model import (
    PAD_WORD,
    BaseModel,
    PretrainConfig,
    ancestral_step,
    embed_prompt,
    image_to_tensor,
    param_checksum,
    predict_noise,
    pretrain_base,
    sample,
    tensor_to_image,
)
from .schedule import NoiseSchedule, build_schedule, forward_diffuse, sampling_timesteps
from .text import (
    V_TOKEN,
    PromptTokens,
    UnknownWordError,
    Vocabulary,
    multi_concept_prompt,
    tokenize,
    tokenize_multi,
)
from .unet import LEVEL_SIZES, AttentionRecord, CrossAttention, DenoisingNetwork, ResBlock

__all__ = [
    "PAD_WORD", "BaseModel", "PretrainConfig", "ancestral_step", "embed_prompt",
    "image_to_tensor", "param_checksum", "predict_noise", "pretrain_base", "sample",
    "tensor_to_image",
    "NoiseSchedule", "build_schedule", "forward_diffuse", "sampling_timesteps",
    "V_TOKEN", "PromptTokens", "UnknownWordError", "Vocabulary",
    "multi_concept_prompt", "tokenize", "tokenize_multi",
    "LEVEL_SIZES", "AttentionRecord", "CrossAttention", "DenoisingNetwork", "ResBlock",
]
