"""Corpus generation: instances, sequences, and train/val/test splits."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import RunConfig
from .synth.templates import make_template
from .synth.sequences import generate_sequence
from .synth.dataset_io import write_dataset

SPLITS = ("train", "val", "test")


def split_instances(n_instances: int, ratios: tuple[float, float, float], seed: int) -> dict[str, list[int]]:
    """Assign instance ids to splits; an instance never straddles splits."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    ids = np.random.default_rng(seed).permutation(n_instances)
    n_train = int(round(ratios[0] * n_instances))
    n_val = int(round(ratios[1] * n_instances))
    return {
        "train": sorted(int(i) for i in ids[:n_train]),
        "val": sorted(int(i) for i in ids[n_train : n_train + n_val]),
        "test": sorted(int(i) for i in ids[n_train + n_val :]),
    }


def generate_corpus(config: RunConfig, out_dir: str | Path, n_instances: int, log=print) -> dict[str, int]:
    """Generate all sequences under ``out_dir/<split>/<category>/<seq_id>``."""
    if n_instances < 1:
        raise ValueError("need at least one instance")
    out_dir = Path(out_dir)
    splits = split_instances(n_instances, config.split_ratios, config.seed)
    counts = dict.fromkeys(SPLITS, 0)

    for split, instance_ids in splits.items():
        for inst in instance_ids:
            template = make_template(
                config.category, config.template_resolution, shape_jitter=0.05, jitter_seed=config.seed * 1000 + inst
            )
            for script in config.scripts:
                for k in range(config.sequences_per_instance):
                    seq_seed = config.seed * 100000 + inst * 100 + k
                    ds = generate_sequence(
                        template,
                        script,
                        frames=config.frames_per_sequence,
                        seed=seq_seed,
                        category=config.category,
                        garment_size=config.garment_size,
                    )
                    ds.manifest["instance"] = inst
                    seq_id = f"{inst:04d}_{script}_{k:02d}"
                    write_dataset(ds, out_dir / split / config.category / seq_id)
                    counts[split] += 1
    for split in SPLITS:
        log(f"{split}: {counts[split]} sequences ({len(splits[split])} instances)")
    return counts
