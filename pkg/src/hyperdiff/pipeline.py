"""End-to-end runs: input -> diffusion operator -> densities -> HDE -> distances."""

from __future__ import annotations

import os
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from hyperdiff import diffusion, hde, ingest, kernel
from hyperdiff.io import read_distance_matrix

INPUT_KINDS = ("graph", "features", "distances")


class PipelineError(Exception):
    """A stage of the pipeline failed; ``cause`` is the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[stage={stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    graph: str | None = None
    features: str | None = None
    distances: str | None = None
    weighted: bool = True
    has_header: bool = False
    metric: str = "cosine"
    cosine_form: str = "one_minus"
    eps_scale: float = 1.0
    laplacian: str = "unnormalized"
    alpha: float = hde.DEFAULT_ALPHA
    max_scale: int | str | None = None
    auto_tol: float = 1e-6
    variant: str = "hdd"
    scale: int | None = None
    negative_policy: str = "auto"
    seed: int = 1234
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self) -> None:
        given = [k for k in INPUT_KINDS if getattr(self, k)]
        if len(given) != 1:
            raise ValueError(f"exactly one of --graph/--features/--distances is required, got {given or 'none'}")
        if not (0 < self.alpha < 1):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if isinstance(self.max_scale, str) and self.max_scale != "auto":
            self.max_scale = int(self.max_scale)
        if isinstance(self.max_scale, int) and self.max_scale < 0:
            raise ValueError("K must be nonnegative")
        if self.variant not in hde.VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "single_scale" and self.scale is None:
            raise ValueError("variant single_scale needs a scale index")
        if self.negative_policy not in ("auto", "error", "clip"):
            raise ValueError(f"unknown negative policy {self.negative_policy!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def input_kind(self) -> str:
        return next(k for k in INPUT_KINDS if getattr(self, k))

    @property
    def input_path(self) -> str:
        return getattr(self, self.input_kind)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class PipelineResult:
    distances: np.ndarray
    embedding: hde.HdeEmbedding
    densities: diffusion.MultiScaleDensities
    node_names: list[str]
    max_scale: int
    negative_policy: str
    epsilon: float | None
    timings: dict[str, float]


class _Stages:
    def __init__(self) -> None:
        self.timings: dict[str, float] = {}

    def run(self, name, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


def _load(cfg: PipelineConfig):
    if cfg.input_kind == "graph":
        g = ingest.read_edge_list(cfg.graph, weighted=cfg.weighted)
        return g, g.names()
    if cfg.input_kind == "features":
        fm = ingest.read_feature_matrix(cfg.features, has_header=cfg.has_header)
        d = ingest.pairwise_distances(fm, cfg.metric, cfg.cosine_form)
        return d, [str(i) for i in range(fm.n_points)]
    d = read_distance_matrix(cfg.distances)
    return d, [str(i) for i in range(d.shape[0])]


def _operator(cfg: PipelineConfig, data):
    if cfg.input_kind == "graph":
        lap = kernel.graph_laplacian(data, cfg.laplacian)
        degrees = None if cfg.laplacian == "unnormalized" else data.weight_matrix().sum(axis=1)
        return kernel.heat_kernel_operator(lap, degrees), None
    eps = kernel.epsilon_median(data, cfg.eps_scale)
    op = kernel.normalize_twice(kernel.gaussian_affinity(data, eps))
    op.check()
    return op, eps


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    stages = _Stages()
    data, names = stages.run("ingest", _load, cfg)
    op, eps = stages.run("kernel", _operator, cfg, data)
    policy = cfg.negative_policy
    if policy == "auto":
        # heat kernels are entrywise nonnegative at every t; kernel operators are not
        policy = "error" if cfg.input_kind == "graph" else "clip"
    spectral = stages.run("diffusion", diffusion.spectral_decompose, op)
    del op  # the spectral form is all later stages need
    if cfg.max_scale is None:
        k_max = hde.default_max_scale(spectral.n)
    elif cfg.max_scale == "auto":
        k_max = stages.run(
            "diffusion", hde.auto_max_scale, spectral, cfg.alpha, cfg.auto_tol, 19, policy
        )
    else:
        k_max = int(cfg.max_scale)
    ms = stages.run("diffusion", diffusion.multiscale_densities, spectral, k_max, policy, cfg.workers)
    del spectral
    emb = stages.run("hde", hde.embed, ms, cfg.alpha)
    dist = stages.run("hde", hde.variant_distance, emb, cfg.variant, cfg.scale, cfg.workers)
    return PipelineResult(dist, emb, ms, names, k_max, policy, eps, stages.timings)
