"""streampaint: real-time region-based image generation.

Paint with prompts: register prompt-mask pairs as brushes, stream frames as
you edit the masks.  A pluggable denoiser backend separates the generation
machinery (tiling, mask quantization, pipelined stream batching) from the
model serving it.
"""

from .codec import LatentCodec, decode, encode, tiny_codec
from .denoiser import (
    AnalyticDenoiser,
    Conditioning,
    DenoiseRequest,
    Denoiser,
    LatencyDenoiser,
    mix_conditioning,
)
from .engine import (
    GenerationConfig,
    Palette,
    TileSet,
    generate,
    generate_baseline,
    make_tiles,
    prepare_palette,
)
from .masks import (
    QuantizedMaskStack,
    SemanticBrush,
    bounding_box_center,
    quantize_mask,
    roll_by,
    smooth_mask,
)
from .sampler import StepContext, inject_noise, step_except_noise, step_full
from .scene import Scene, SceneBrush, load_scene, save_scene, scene_to_engine
from .schedule import (
    NoiseSchedule,
    SamplerMode,
    TimestepPlan,
    add_noise,
    build_schedule,
    estimate_x0,
    make_timesteps,
)
from .stream import Command, CommandKind, Frame, StreamPipeline
from .wire import DenoiseServer, RemoteDenoiser

__version__ = "0.1.0"

__all__ = [
    "AnalyticDenoiser",
    "Command",
    "CommandKind",
    "Conditioning",
    "DenoiseRequest",
    "DenoiseServer",
    "Denoiser",
    "Frame",
    "GenerationConfig",
    "LatencyDenoiser",
    "LatentCodec",
    "NoiseSchedule",
    "Palette",
    "QuantizedMaskStack",
    "RemoteDenoiser",
    "SamplerMode",
    "Scene",
    "SceneBrush",
    "SemanticBrush",
    "StepContext",
    "StreamPipeline",
    "TileSet",
    "TimestepPlan",
    "add_noise",
    "bounding_box_center",
    "build_schedule",
    "decode",
    "encode",
    "estimate_x0",
    "generate",
    "generate_baseline",
    "inject_noise",
    "load_scene",
    "make_tiles",
    "make_timesteps",
    "mix_conditioning",
    "prepare_palette",
    "quantize_mask",
    "roll_by",
    "save_scene",
    "scene_to_engine",
    "smooth_mask",
    "step_except_noise",
    "step_full",
    "tiny_codec",
    "__version__",
]
