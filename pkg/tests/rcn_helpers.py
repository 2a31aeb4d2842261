"""Shared small-model builders for network tests."""

import numpy as np

from ladderforge import rcn
from ladderforge import tensor as T
from ladderforge.fixtures import make_corpus

SMALL = rcn.ModelConfig(channels=(2, 3, 4), input_size=(24, 16))


def golden_fixture():
    """Tiny trained model and a probe clip; regenerating changes the golden file."""
    corpus = make_corpus(5, seed=11, size=(24, 16), frame_count=20)
    model = rcn.RCNModel(SMALL, seed=3)
    rcn.fit(model, corpus[:4], rcn.TrainConfig(stride=2, chunk=3, batch=2, lr_pretrain=3e-3), epochs=3)
    return model, corpus[4]


def tiny_case():
    cfg = rcn.ModelConfig(channels=(2, 2), input_size=(8, 8))
    model = rcn.RCNModel(cfg, seed=4, dtype=np.float64)
    rng = np.random.default_rng(9)
    for p in model.parameters():
        p.data[...] = rng.normal(scale=0.4, size=p.shape)
    video = rng.random((4, 8, 8))
    target = (rng.random((7, 9)) < 0.3).astype(float)
    return model, video, target


def chunked_loss(model, video, target, carried=None):
    """Sum of both chunk losses; chunk two starts from ``carried`` when given."""
    p1, s1 = rcn.forward_chunk(model, video[:2])
    first = T.bce_loss(p1, target).item()
    state = carried if carried is not None else [s.detach() for s in s1]
    p2, _ = rcn.forward_chunk(model, video[2:], state)
    return first + T.bce_loss(p2, target).item(), s1


def gradient_check_errors(eps=1e-6):
    """Worst relative error per parameter between analytic and central-difference gradients.

    The state entering chunk two is held fixed while perturbing, matching the
    detach between chunks in training.
    """
    model, video, target = tiny_case()
    rcn.accumulate_shot(model, video, target, stride=1, chunk=2, normalize=False)
    analytic = {n: p.grad.copy() for n, p in model.named_parameters()}
    errors = {}
    with T.no_grad():
        _, s1 = chunked_loss(model, video, target)
        carried = [T.Tensor(s.data.copy()) for s in s1]
        for name, p in model.named_parameters():
            num = np.zeros_like(p.data)
            for idx in np.ndindex(p.shape):
                old = p.data[idx]
                p.data[idx] = old + eps
                hi, _ = chunked_loss(model, video, target, carried)
                p.data[idx] = old - eps
                lo, _ = chunked_loss(model, video, target, carried)
                p.data[idx] = old
                num[idx] = (hi - lo) / (2 * eps)
            err = np.abs(num - analytic[name]) / np.maximum(1e-8, np.abs(num) + np.abs(analytic[name]))
            errors[name] = float(err.max())
    return errors
