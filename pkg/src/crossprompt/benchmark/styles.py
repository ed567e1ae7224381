"""Domain style transforms applied to rendered benchmark images."""

from abc import ABC, abstractmethod
from typing import Any, Dict, List

import numpy as np

from ..models.config import EncoderConfig
from ..numeric.rng import Rng


class StyleTransform(ABC):
    """
    A fixed, deterministic image transform that defines one domain's look.

    Transforms act on (n, H, W, C) float arrays and never change shapes.
    """

    name: str = "style"

    @abstractmethod
    def apply(self, images: np.ndarray) -> np.ndarray:
        """
        Transform a batch of images.

        Args:
            images: (n, H, W, C) array

        Returns:
            Transformed array of the same shape
        """
        pass

    def describe(self) -> Dict[str, Any]:
        """JSON-friendly parameters, echoed into the dataset manifest."""
        return {"name": self.name}


class NeutralStyle(StyleTransform):
    """Identity; the base set's rendering."""

    name = "neutral"

    def apply(self, images: np.ndarray) -> np.ndarray:
        return images


class ChannelPermutation(StyleTransform):
    name = "channel_permutation"

    def __init__(self, permutation: List[int]):
        self.permutation = [int(p) for p in permutation]

    @classmethod
    def random(cls, config: EncoderConfig, rng: Rng) -> "ChannelPermutation":
        if config.channels == 1:
            return cls([0])
        # cyclic shift, so no channel stays in place
        shift = int(rng.integers(1, config.channels))
        return cls([(c + shift) % config.channels for c in range(config.channels)])

    def apply(self, images: np.ndarray) -> np.ndarray:
        return images[..., self.permutation]

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, "permutation": self.permutation}


class ContrastInversion(StyleTransform):
    name = "contrast_inversion"

    @classmethod
    def random(cls, config: EncoderConfig, rng: Rng) -> "ContrastInversion":
        return cls()

    def apply(self, images: np.ndarray) -> np.ndarray:
        return 1.0 - images


class StructuredPattern(StyleTransform):
    """Adds a fixed sinusoidal grating to every image."""

    name = "structured_pattern"

    def __init__(self, pattern: np.ndarray, amplitude: float, frequency: float, angle: float):
        self.pattern = pattern
        self.amplitude = amplitude
        self.frequency = frequency
        self.angle = angle

    @classmethod
    def random(cls, config: EncoderConfig, rng: Rng, amplitude: float = 0.6) -> "StructuredPattern":
        size = config.image_size
        frequency = float(rng.uniform((), 1.5, 3.0))
        angle = float(rng.uniform((), 0.0, np.pi))
        phase = rng.uniform((config.channels,), 0.0, 2.0 * np.pi)
        yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        coord = (np.cos(angle) * xx + np.sin(angle) * yy) * (2.0 * np.pi * frequency / size)
        pattern = amplitude * np.sin(coord[..., None] + phase[None, None, :])
        return cls(pattern, amplitude, frequency, angle)

    def apply(self, images: np.ndarray) -> np.ndarray:
        return images + self.pattern[None]

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "angle": self.angle,
        }


class StyleFactory:
    """Factory for domain styles."""

    _STYLE_MAP = {
        ChannelPermutation.name: ChannelPermutation,
        ContrastInversion.name: ContrastInversion,
        StructuredPattern.name: StructuredPattern,
    }

    DOMAIN_ORDER = [ChannelPermutation.name, ContrastInversion.name, StructuredPattern.name]

    @classmethod
    def create(cls, name: str, config: EncoderConfig, rng: Rng) -> StyleTransform:
        """
        Create a style by name with seeded parameters.

        Raises:
            ValueError: If the style name is not supported
        """
        if name == NeutralStyle.name:
            return NeutralStyle()
        style_class = cls._STYLE_MAP.get(name)
        if style_class is None:
            supported = ", ".join(cls.get_supported_styles())
            raise ValueError(f"Unsupported style: {name}. Supported styles: {supported}")
        return style_class.random(config, rng)

    @classmethod
    def for_domain(cls, index: int, config: EncoderConfig, rng: Rng) -> StyleTransform:
        """Domains cycle through the style kinds in a fixed order."""
        return cls.create(cls.DOMAIN_ORDER[index % len(cls.DOMAIN_ORDER)], config, rng)

    @classmethod
    def get_supported_styles(cls) -> List[str]:
        return [NeutralStyle.name, *cls._STYLE_MAP]
