"""Shared random-instance builders for the test suite."""

import numpy as np

from bayescache import (
    AdaptConfig,
    Box,
    CacheEntry,
    CacheState,
    ImageRecord,
    ProposalRecord,
    l2_normalize,
)


def random_unit(rng, d):
    return l2_normalize(rng.standard_normal(d))


def random_dist(rng, k):
    return rng.dirichlet(np.ones(k))


def random_box(rng):
    w = rng.uniform(0.05, 0.8)
    h = rng.uniform(0.05, 0.8)
    x = rng.uniform(w / 2, 1 - w / 2)
    y = rng.uniform(h / 2, 1 - h / 2)
    return Box(x=x, y=y, w=w, h=h)


def random_cache(rng, m, k, d, detection=False):
    entries = tuple(
        CacheEntry(
            prototype=random_unit(rng, d),
            prior=random_dist(rng, k),
            count=int(rng.integers(1, 10)),
            scale=rng.uniform(0.0, 1.0, size=2) if detection else None,
        )
        for _ in range(m)
    )
    return CacheState(entries, created_total=m, updated_total=0)


def random_proposal(rng, k, d, detection=False, gt=None):
    return ProposalRecord(
        feature=random_unit(rng, d),
        init_pred=random_dist(rng, k),
        box=random_box(rng) if detection else None,
        gt_label=gt,
    )


def random_record(rng, image_id, k, d, detection=False, n_proposals=1):
    proposals = tuple(
        random_proposal(rng, k, d, detection, gt=int(rng.integers(0, k)))
        for _ in range(n_proposals)
    )
    return ImageRecord(image_id=image_id, proposals=proposals)


def config(k, d, **kw):
    return AdaptConfig(K=k, d=d, **kw)
