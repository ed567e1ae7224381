"""Synthetic multi-domain benchmark: generation, styles and storage."""

from .generator import (
    BASE_TASK_ID,
    MarginReport,
    apply_task_order,
    check_prototype_margin,
    class_name,
    domain_task_id,
    ensure_prototype_margin,
    gen_benchmark,
    generate_from_config,
)
from .storage import load_benchmark, load_manifest, save_benchmark
from .styles import (
    ChannelPermutation,
    ContrastInversion,
    NeutralStyle,
    StructuredPattern,
    StyleFactory,
    StyleTransform,
)

__all__ = [
    "BASE_TASK_ID",
    "MarginReport",
    "apply_task_order",
    "check_prototype_margin",
    "class_name",
    "domain_task_id",
    "ensure_prototype_margin",
    "gen_benchmark",
    "generate_from_config",
    "save_benchmark",
    "load_benchmark",
    "load_manifest",
    "StyleTransform",
    "NeutralStyle",
    "ChannelPermutation",
    "ContrastInversion",
    "StructuredPattern",
    "StyleFactory",
]
