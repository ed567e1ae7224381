"""
Synthetic multi-domain benchmark.

Classes are (shape, texture) pairs rendered into small images. The base
set covers every class in the neutral style with class names
(CONTEXT, shape, texture). Domain d draws a seeded subset of classes,
applies its own style transform and names classes (DOMAIN_d, shape,
texture), so class-name token sets never overlap across domains.

Token layout:
    0 PAD | 1 CONTEXT | 2..7 shapes | 8..11 textures | 12.. one per domain
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from ..encoders.backbone import BackboneWeights
from ..exceptions import ConfigError, ContractViolation
from ..models.config import BenchmarkConfig, EncoderConfig, TokenSeq
from ..models.dataset import TaskDataset
from ..numeric.rng import Rng
from ..pool.prototype import extract_prototype
from .styles import NeutralStyle, StyleFactory, StyleTransform

logger = logging.getLogger(__name__)

SHAPES = ("square", "disk", "cross", "triangle", "ring", "bar")
TEXTURES = ("solid", "stripes", "checker", "dots")
TEXTURE_COLORS = (
    (1.0, 0.3, 0.3),
    (0.3, 1.0, 0.3),
    (0.3, 0.3, 1.0),
    (1.0, 1.0, 0.3),
)
N_CLASSES_TOTAL = len(SHAPES) * len(TEXTURES)

PAD_TOKEN = 0
CONTEXT_TOKEN = 1
SHAPE_TOKEN_BASE = 2
TEXTURE_TOKEN_BASE = SHAPE_TOKEN_BASE + len(SHAPES)
DOMAIN_TOKEN_BASE = TEXTURE_TOKEN_BASE + len(TEXTURES)

BASE_TASK_ID = "base"


def domain_task_id(index: int) -> str:
    return f"domain-{index}"


def class_name(class_id: int, lead_token: int) -> TokenSeq:
    shape, texture = divmod(class_id, len(TEXTURES))
    return (lead_token, SHAPE_TOKEN_BASE + shape, TEXTURE_TOKEN_BASE + texture)


def _shape_mask(shape: int, size: int) -> np.ndarray:
    v, u = np.meshgrid(np.linspace(-1.0, 1.0, size), np.linspace(-1.0, 1.0, size), indexing="ij")
    r = np.sqrt(u * u + v * v)
    name = SHAPES[shape]
    if name == "square":
        mask = (np.abs(u) < 0.6) & (np.abs(v) < 0.6)
    elif name == "disk":
        mask = r < 0.7
    elif name == "cross":
        mask = ((np.abs(u) < 0.2) & (np.abs(v) < 0.8)) | ((np.abs(v) < 0.2) & (np.abs(u) < 0.8))
    elif name == "triangle":
        mask = (v > -0.7) & (v < 0.7) & (np.abs(u) <= (v + 0.7) * 0.6)
    elif name == "ring":
        mask = (r > 0.4) & (r < 0.8)
    else:
        mask = (np.abs(v) < 0.25) & (np.abs(u) < 0.85)
    return mask.astype(np.float64)


def _texture(texture: int, size: int, channels: int) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    name = TEXTURES[texture]
    if name == "solid":
        pattern = np.ones((size, size))
    elif name == "stripes":
        pattern = 0.3 + 0.7 * ((yy // 2) % 2)
    elif name == "checker":
        pattern = 0.3 + 0.7 * (((yy // 2) + (xx // 2)) % 2)
    else:
        pattern = 0.3 + 0.7 * ((yy % 4 < 2) & (xx % 4 < 2))
    color = np.resize(np.array(TEXTURE_COLORS[texture]), channels)
    return pattern[..., None] * color[None, None, :]


def render_class(
    class_id: int, count: int, config: EncoderConfig, noise_std: float, rng: Rng
) -> np.ndarray:
    """`count` jittered, noisy renderings of one class, (count, H, W, C)."""
    shape, texture = divmod(class_id, len(TEXTURES))
    size = config.image_size
    clean = _shape_mask(shape, size)[..., None] * _texture(texture, size, config.channels)
    shifts = rng.integers(-1, 2, size=(count, 2))
    images = np.stack([np.roll(clean, (int(dy), int(dx)), axis=(0, 1)) for dy, dx in shifts])
    if noise_std > 0.0:
        images = images + rng.normal(images.shape, noise_std)
    return images


def build_dataset(
    task_id: str,
    class_ids: Sequence[int],
    lead_token: int,
    style: StyleTransform,
    samples_per_class: int,
    test_fraction: float,
    noise_std: float,
    config: EncoderConfig,
    rng: Rng,
) -> TaskDataset:
    """Render, style and split one task; samples are shuffled within each split."""
    n_test = max(1, int(round(samples_per_class * test_fraction)))
    if n_test >= samples_per_class:
        raise ConfigError("test_fraction leaves no training samples", "test_fraction")

    train_images, train_labels, test_images, test_labels = [], [], [], []
    for label, class_id in enumerate(class_ids):
        images = style.apply(
            render_class(class_id, samples_per_class, config, noise_std, rng.child("class", label))
        )
        test_images.append(images[:n_test])
        train_images.append(images[n_test:])
        test_labels.append(np.full(n_test, label, dtype=np.int64))
        train_labels.append(np.full(samples_per_class - n_test, label, dtype=np.int64))

    def shuffled(images, labels, key):
        images, labels = np.concatenate(images), np.concatenate(labels)
        order = rng.child(key).permutation(labels.size)
        return images[order], labels[order]

    train_x, train_y = shuffled(train_images, train_labels, "train_order")
    test_x, test_y = shuffled(test_images, test_labels, "test_order")
    return TaskDataset(
        task_id=task_id,
        class_names=[class_name(c, lead_token) for c in class_ids],
        train_images=train_x,
        train_labels=train_y,
        test_images=test_x,
        test_labels=test_y,
        style=style.name,
        style_params=style.describe(),
    )


def gen_benchmark(
    seed: int,
    n_domains: int,
    n_classes: int,
    samples_per_class: int,
    encoder: Optional[EncoderConfig] = None,
    test_fraction: float = 0.25,
    noise_std: float = 0.05,
    attempt: int = 0,
) -> Tuple[TaskDataset, List[TaskDataset]]:
    """
    Generate the base set and the ordered domain tasks.

    The base set depends only on the seed; `attempt` re-rolls domain class
    subsets and style parameters.

    Raises:
        ConfigError: If the parameters cannot be realized
    """
    encoder = encoder or EncoderConfig()
    if n_domains < 1 or n_classes < 2 or samples_per_class < 2:
        raise ConfigError("n_domains >= 1, n_classes >= 2 and samples_per_class >= 2 required")
    if n_classes > N_CLASSES_TOTAL:
        raise ConfigError(f"at most {N_CLASSES_TOTAL} classes are available", "n_classes")
    if DOMAIN_TOKEN_BASE + n_domains > encoder.vocab_size:
        raise ConfigError(
            f"vocab_size {encoder.vocab_size} too small for {n_domains} domains", "vocab_size"
        )
    if encoder.max_text_tokens < 3:
        raise ConfigError("class names need max_text_tokens >= 3", "max_text_tokens")

    rng = Rng(seed).child("benchmark")
    base = build_dataset(
        BASE_TASK_ID,
        list(range(N_CLASSES_TOTAL)),
        CONTEXT_TOKEN,
        NeutralStyle(),
        samples_per_class,
        test_fraction,
        noise_std,
        encoder,
        rng.child("base"),
    )

    domains = []
    for d in range(n_domains):
        domain_rng = rng.child("domain", d, "attempt", attempt)
        drawn = domain_rng.child("classes").choice(N_CLASSES_TOTAL, n_classes)
        class_ids = sorted(int(c) for c in drawn)
        style = StyleFactory.for_domain(d, encoder, domain_rng.child("style"))
        domains.append(
            build_dataset(
                domain_task_id(d),
                class_ids,
                DOMAIN_TOKEN_BASE + d,
                style,
                samples_per_class,
                test_fraction,
                noise_std,
                encoder,
                domain_rng.child("render"),
            )
        )
    logger.info(
        "Generated base set (%d classes) and %d domains of %d classes (seed %d, attempt %d)",
        base.n_classes,
        n_domains,
        n_classes,
        seed,
        attempt,
    )
    return base, domains


def generate_from_config(
    config: BenchmarkConfig, encoder: Optional[EncoderConfig] = None, attempt: int = 0
) -> Tuple[TaskDataset, List[TaskDataset]]:
    return gen_benchmark(
        config.seed,
        config.n_domains,
        config.n_classes,
        config.samples_per_class,
        encoder=encoder,
        test_fraction=config.test_fraction,
        noise_std=config.noise_std,
        attempt=attempt,
    )


class MarginReport(BaseModel):
    """How well task keys separate under a backbone."""

    margin: float = Field(description="Smallest own-minus-best-cross key similarity")
    max_cross_similarity: float
    similarities: List[List[float]]
    passed: bool


def check_prototype_margin(
    backbone: BackboneWeights,
    datasets: Sequence[TaskDataset],
    min_margin: float,
    threshold: Optional[float] = None,
    template: TokenSeq = (),
) -> MarginReport:
    """
    Check that every task key is closer to itself than to any other key by
    `min_margin`, and, when `threshold` is given, that every cross-task
    similarity stays below it (so untrained tasks fall back).
    """
    keys = np.stack([extract_prototype(backbone, d.class_names, template).array for d in datasets])
    sims = keys @ keys.T
    if len(datasets) < 2:
        return MarginReport(
            margin=1.0, max_cross_similarity=-1.0, similarities=sims.tolist(), passed=True
        )
    cross = sims.copy()
    np.fill_diagonal(cross, -np.inf)
    margin = float(np.min(np.diag(sims) - cross.max(axis=1)))
    max_cross = float(cross.max())
    passed = margin >= min_margin and (threshold is None or max_cross < threshold)
    return MarginReport(
        margin=margin, max_cross_similarity=max_cross, similarities=sims.tolist(), passed=passed
    )


def ensure_prototype_margin(
    backbone: BackboneWeights,
    config: BenchmarkConfig,
    encoder: Optional[EncoderConfig] = None,
    threshold: Optional[float] = None,
    template: TokenSeq = (),
) -> Tuple[TaskDataset, List[TaskDataset], int, MarginReport]:
    """
    Regenerate domains until the key margin holds, up to max_rerolls times.

    Returns the first passing attempt, or the last attempt (with a warning)
    when none passes.
    """
    encoder = encoder or backbone.config
    for attempt in range(config.max_rerolls + 1):
        base, domains = generate_from_config(config, encoder, attempt)
        report = check_prototype_margin(backbone, domains, config.min_margin, threshold, template)
        logger.info(
            "Attempt %d: key margin %.4f, max cross similarity %.4f",
            attempt,
            report.margin,
            report.max_cross_similarity,
        )
        if report.passed:
            return base, domains, attempt, report
    logger.warning(
        "Key margin %.4f still below %.4f after %d re-rolls",
        report.margin,
        config.min_margin,
        config.max_rerolls,
    )
    return base, domains, attempt, report


def apply_task_order(
    datasets: Sequence[TaskDataset], order: Union[str, Sequence[int], None], seed: int = 0
) -> List[TaskDataset]:
    """
    Reorder tasks: None or "" keeps the given order, "random" draws a seeded
    permutation, a sequence of indices is used as-is.
    """
    datasets = list(datasets)
    if order is None or order == "":
        return datasets
    if order == "random":
        permutation = [int(i) for i in Rng(seed).child("task_order").permutation(len(datasets))]
    elif isinstance(order, str):
        raise ContractViolation(f"unknown task order {order!r}")
    else:
        permutation = [int(i) for i in order]
    if sorted(permutation) != list(range(len(datasets))):
        raise ContractViolation(f"task order {permutation} is not a permutation of {len(datasets)}")
    return [datasets[i] for i in permutation]
