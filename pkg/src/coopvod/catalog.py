"""Video population and Zipf popularity model.

Video ``i`` has popularity rank ``i``: video 1 is the most requested and
video N the least.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

DEFAULT_ALPHA = 0.986


@dataclass(frozen=True)
class Video:
    id: int
    length_min: float
    rank: int


@dataclass(frozen=True)
class Catalog:
    videos: tuple[Video, ...]

    def __len__(self) -> int:
        return len(self.videos)

    def __iter__(self):
        return iter(self.videos)

    def video(self, video_id: int) -> Video:
        if not 1 <= video_id <= len(self.videos):
            raise ValueError(f"unknown video id {video_id}")
        return self.videos[video_id - 1]

    def length(self, video_id: int) -> float:
        return self.video(video_id).length_min


@dataclass(frozen=True)
class PopularityModel:
    alpha: float
    weights: tuple[float, ...]
    total_rate: float
    per_video_rate: tuple[float, ...]

    def weight(self, video_id: int) -> float:
        return self.weights[video_id - 1]


def zipf_weights(n_videos: int, alpha: float) -> list[float]:
    """Normalised Zipf probabilities ``p_i = i**-alpha / sum_j j**-alpha``.

    Parameters
    ----------
    n_videos : int
        Catalog size, at least 1.
    alpha : float
        Zipf exponent, nonnegative. ``alpha == 0`` gives the uniform law.

    Returns
    -------
    list of float
        Probabilities for ranks ``1..n_videos``, most popular first.
    """
    if n_videos < 1:
        raise ValueError(f"n_videos must be >= 1, got {n_videos}")
    if alpha < 0 or math.isnan(alpha):
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return [1.0 / n_videos] * n_videos
    raw = [i ** -alpha for i in range(1, n_videos + 1)]
    norm = math.fsum(raw)
    return [r / norm for r in raw]


def build_catalog(
    n_videos: int,
    length_min_per_video: Union[float, Sequence[float]],
    alpha: float = DEFAULT_ALPHA,
    total_rate: float = 1.0,
) -> tuple[Catalog, PopularityModel]:
    """Build the catalog and the per-video arrival rates.

    ``length_min_per_video`` is either one length shared by every video or
    an explicit list with one entry per video.
    """
    if n_videos < 1:
        raise ValueError("catalog needs at least one video")
    if isinstance(length_min_per_video, (int, float)):
        lengths = [float(length_min_per_video)] * n_videos
    else:
        lengths = [float(x) for x in length_min_per_video]
        if len(lengths) != n_videos:
            raise ValueError(
                f"got {len(lengths)} video lengths for {n_videos} videos")
    for i, s in enumerate(lengths, start=1):
        if not s > 0:
            raise ValueError(f"video {i} has non-positive length {s}")
    if not total_rate > 0:
        raise ValueError(f"total_rate must be > 0, got {total_rate}")

    weights = zipf_weights(n_videos, alpha)
    videos = tuple(Video(id=i, length_min=s, rank=i)
                   for i, s in enumerate(lengths, start=1))
    rates = tuple(p * total_rate for p in weights)
    popularity = PopularityModel(alpha=float(alpha), weights=tuple(weights),
                                 total_rate=float(total_rate),
                                 per_video_rate=rates)
    return Catalog(videos), popularity
