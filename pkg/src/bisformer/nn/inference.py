import time
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from bisformer.autodiff.tensor import no_grad
from bisformer.datapipe.schema import CaseSeries, Normalization, SampleBatch
from bisformer.datapipe.windows import sample_times, window_at
from bisformer.nn.model import model_forward
from bisformer.nn.weights import ModelWeights


@dataclass
class StreamStep:
    t: int
    bis: float
    latency_s: float


def predict_series(weights: ModelWeights, samples: SampleBatch, batch_size: int = 256) -> np.ndarray:
    """De-normalized BIS predictions for every sample, in order."""
    out: List[np.ndarray] = []
    with no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples.take(slice(start, start + batch_size))
            out.append(model_forward(chunk, weights).bis)
    return np.concatenate(out) if out else np.zeros(0)


def stream_predict(
    weights: ModelWeights,
    case: CaseSeries,
    pseudo_bis: np.ndarray,
    norms: Optional[Normalization] = None,
    times: Optional[np.ndarray] = None,
) -> Iterator[StreamStep]:
    """Replay a case second by second, predicting one window at a time.

    Latency covers building the window and the forward pass.
    """
    norms = norms or Normalization(**weights.norms)
    steps = weights.config.sequence_length
    times = sample_times(case) if times is None else times
    for t in times:
        started = time.perf_counter()
        window = SampleBatch.from_samples([window_at(case, pseudo_bis, norms, int(t), window_bins=steps)])
        with no_grad():
            bis = float(model_forward(window, weights).bis[0])
        yield StreamStep(t=int(t), bis=bis, latency_s=time.perf_counter() - started)
