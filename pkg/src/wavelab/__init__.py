"""Spectrally compressed single-carrier waveforms: chains, training and metrics."""
from .chains import FrameConfig, WaveformConfig, rx, tx
from .channel import PDP_H, PDP_HB, AwgnSpec, ChannelSpec
from .detection import DetectorConfig
from .trainer import TrainConfig, train_pair
from .transforms import LinearTransform, TransformPair, load_pair, save_pair

__all__ = [
    "AwgnSpec", "ChannelSpec", "DetectorConfig", "FrameConfig", "LinearTransform",
    "PDP_H", "PDP_HB", "TrainConfig", "TransformPair", "WaveformConfig",
    "load_pair", "rx", "save_pair", "train_pair", "tx",
]
