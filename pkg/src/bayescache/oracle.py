"""Brute-force reference for the cache-based posterior.

Evaluates the mixture posterior

    P(Y | x) = sum_m  [ L_m / sum_j L_j ] * prior_m,   L_m = exp(sـm)

with plain Python scalar loops, where s_m is the cosine similarity to
entry m (recognition) or the ws-weighted blend of scale and feature
similarity (detection), and every entry carries equal base probability.

This module deliberately shares no code with the vectorized engine: it is
the anti-drift ground truth the engine is cross-checked against.  Keep it
loop-based; do not "optimize" it with numpy.
"""

from __future__ import annotations

import math

from .cache import CacheState
from .errors import EmptyCache, MissingScale
from .records import AdaptConfig, ProposalRecord


def _cosine(a: list[float], b: list[float]) -> float:
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    return dot / (math.sqrt(na) * math.sqrt(nb))


def oracle_posterior(proposal: ProposalRecord, cache: CacheState,
                     cfg: AdaptConfig):
    """Scalar-loop posterior over K classes for one proposal."""
    if len(cache.entries) == 0:
        raise EmptyCache("oracle_posterior on empty cache")

    feature = [float(v) for v in proposal.feature]
    likelihoods = []
    for entry in cache.entries:
        prototype = [float(v) for v in entry.prototype]
        s = _cosine(feature, prototype)
        if cfg.task == "detection":
            if entry.scale is None:
                raise MissingScale("cache entry lacks a spatial scale")
            dw = float(proposal.box.w) - float(entry.scale[0])
            dh = float(proposal.box.h) - float(entry.scale[1])
            sb = 1.0 - math.sqrt(dw * dw + dh * dh) / math.sqrt(2.0)
            s = cfg.ws * sb + (1.0 - cfg.ws) * s
        likelihoods.append(math.exp(s))

    total = 0.0
    for lik in likelihoods:
        total += lik

    posterior = [0.0] * cfg.K
    for lik, entry in zip(likelihoods, cache.entries):
        weight = lik / total
        prior = [float(v) for v in entry.prior]
        for k in range(cfg.K):
            posterior[k] += weight * prior[k]
    return posterior
