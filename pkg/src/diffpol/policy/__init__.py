"""Observation encoders, conditional denoisers, normalization and closed-loop control."""
from ..data.windows import HorizonConfig
from .bundle import PolicyBundle, PolicyConfig, ScheduleConfig, pad_history
from .control import EpisodeResult, Planner, run_closed_loop, run_closed_loop_batch
from .denoiser import DenoiserConfig, FilmMLPDenoiser, UNet1DDenoiser, build_denoiser
from .encoder import EncoderConfig, ObservationEncoder
from .normalizer import EmptyDatasetError, Normalizer, denormalize, fit_normalizer, normalize
