"""Source-context encoder and copy-attention decoder."""

from .config import PAPER_SCALE, ModelConfig, TrainConfig
from .decode import BeamResult, beam_extract, beam_search, parse_tuple
from .gradcheck import GradCheckResult, grad_check
from .io import load_model, save_model
from .network import CopyModel, EncoderStates
from .train import TrainingError, TrainLog, build_model, train
from .vocab import Vocab

__all__ = [
    "PAPER_SCALE", "ModelConfig", "TrainConfig", "BeamResult", "beam_extract", "beam_search",
    "parse_tuple", "GradCheckResult", "grad_check", "load_model", "save_model", "CopyModel",
    "EncoderStates", "TrainingError", "TrainLog", "build_model", "train", "Vocab",
]
