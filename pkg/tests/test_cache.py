"""Cache adaptation: filtering, matching, creation, the three update rules."""

import numpy as np
import pytest

from bayescache import (
    AdaptConfig,
    Box,
    CacheState,
    PredictionTriple,
    ProposalRecord,
    adapt,
    best_match,
    confidence_filter,
    create_entry,
    update_entry,
)
from bayescache.errors import EmptyCache, IndexOutOfRange

from util import random_cache, random_dist, random_proposal, random_unit


def prop_of(feature, box=None, k=2):
    return ProposalRecord(
        feature=np.asarray(feature, dtype=np.float64),
        init_pred=np.full(k, 1.0 / k),
        box=box,
    )


def triple_for(final_pred, matched_index=None, match_similarity=None, m=None):
    final_pred = np.asarray(final_pred, dtype=np.float64)
    mdist = None
    if m is not None:
        mdist = np.full(m, 1.0 / m)
    return PredictionTriple(
        init_pred=final_pred, final_pred=final_pred,
        match_dist=mdist, matched_index=matched_index,
        match_similarity=match_similarity,
    )


class TestConfidenceFilter:
    def test_boundary_is_inclusive(self):
        assert confidence_filter(np.array([0.80, 0.20]), 0.8)

    def test_below_threshold(self):
        assert not confidence_filter(np.array([0.79, 0.21]), 0.8)

    def test_one_hot_always_passes(self):
        assert confidence_filter(np.array([0.0, 1.0, 0.0]), 1.0)


class TestBestMatch:
    def test_plain_argmax(self):
        assert best_match(np.array([0.2, 0.7, 0.1])) == (1, 0.7)

    def test_tie_breaks_to_lowest_index(self):
        assert best_match(np.array([0.5, 0.5])) == (0, 0.5)

    def test_singleton(self):
        assert best_match(np.array([1.0])) == (0, 1.0)

    def test_empty(self):
        with pytest.raises(EmptyCache):
            best_match(np.array([]))


class TestCreateEntry:
    def test_first_entry(self):
        cache = CacheState()
        out = create_entry(cache, prop_of([1.0, 0.0]), np.array([0.9, 0.1]))
        assert len(cache) == 0 and len(out) == 1
        assert out.created_total == 1 and out.entries[0].count == 1

    def test_prior_stored_verbatim(self):
        final = np.array([0.35, 0.65])
        out = create_entry(CacheState(), prop_of([1.0, 0.0]), final)
        np.testing.assert_array_equal(out.entries[0].prior, final)

    def test_detection_entry_stores_wh_slice(self):
        box = Box(x=0.5, y=0.5, w=0.2, h=0.3)
        out = create_entry(CacheState(), prop_of([1.0, 0.0], box=box),
                           np.array([1.0, 0.0]))
        np.testing.assert_array_equal(out.entries[0].scale, [0.2, 0.3])


class TestCountUpdate:
    def test_feature_running_mean_then_renormalize(self):
        cfg = AdaptConfig(K=2, d=2)
        cache = create_entry(CacheState(), prop_of([1.0, 0.0]), np.array([1.0, 0.0]))
        out = update_entry(cache, 0, prop_of([0.0, 1.0]), np.array([0.5, 0.5]), cfg)
        e = out.entries[0]
        np.testing.assert_allclose(e.prototype, [0.7071067812, 0.7071067812],
                                   atol=5e-6)
        assert e.count == 2

    def test_prior_running_mean(self):
        cfg = AdaptConfig(K=2, d=2)
        cache = create_entry(CacheState(), prop_of([1.0, 0.0]), np.array([1.0, 0.0]))
        out = update_entry(cache, 0, prop_of([1.0, 0.0]), np.array([0.6, 0.4]), cfg)
        np.testing.assert_allclose(out.entries[0].prior, [0.8, 0.2], atol=1e-12)

    def test_count_increments_by_one_for_every_strategy(self):
        for strategy in ("count", "momentum", "delayed"):
            cfg = AdaptConfig(K=2, d=2, update_strategy=strategy)
            cache = create_entry(CacheState(), prop_of([1.0, 0.0]),
                                 np.array([1.0, 0.0]))
            for expected in (2, 3, 4):
                cache = update_entry(cache, 0, prop_of([0.0, 1.0]),
                                     np.array([0.5, 0.5]), cfg)
                assert cache.entries[0].count == expected

    def test_index_out_of_range(self):
        cfg = AdaptConfig(K=2, d=2)
        cache = create_entry(CacheState(), prop_of([1.0, 0.0]), np.array([1.0, 0.0]))
        with pytest.raises(IndexOutOfRange):
            update_entry(cache, 3, prop_of([0.0, 1.0]), np.array([0.5, 0.5]), cfg)

    def test_prior_equals_shadow_mean_of_absorbed_predictions(self):
        rng = np.random.default_rng(101)
        cfg = AdaptConfig(K=4, d=6)
        first = random_dist(rng, 4)
        cache = create_entry(CacheState(), random_proposal(rng, 4, 6), first)
        shadow = [first]
        for _ in range(200):
            p = random_dist(rng, 4)
            shadow.append(p)
            cache = update_entry(cache, 0, random_proposal(rng, 4, 6), p, cfg)
        np.testing.assert_allclose(cache.entries[0].prior,
                                   np.mean(shadow, axis=0), atol=1e-9)
        assert cache.entries[0].count == len(shadow)

    def test_invariants_hold_after_updates(self):
        rng = np.random.default_rng(103)
        for strategy in ("count", "momentum", "delayed"):
            cfg = AdaptConfig(K=3, d=5, update_strategy=strategy, task="detection")
            cache = create_entry(
                CacheState(), random_proposal(rng, 3, 5, detection=True),
                random_dist(rng, 3))
            for _ in range(50):
                cache = update_entry(cache, 0,
                                     random_proposal(rng, 3, 5, detection=True),
                                     random_dist(rng, 3), cfg)
                e = cache.entries[0]
                assert abs(np.linalg.norm(e.prototype) - 1.0) <= 1e-9
                assert abs(e.prior.sum() - 1.0) <= 1e-9
                assert np.all(e.scale >= 0) and np.all(e.scale <= 1)


class TestMomentumUpdate:
    def test_exponential_moving_average(self):
        cfg = AdaptConfig(K=2, d=2, update_strategy="momentum", momentum_alpha=0.9)
        cache = create_entry(CacheState(), prop_of([1.0, 0.0]), np.array([1.0, 0.0]))
        out = update_entry(cache, 0, prop_of([0.0, 1.0]), np.array([0.0, 1.0]), cfg)
        e = out.entries[0]
        raw = 0.9 * np.array([1.0, 0.0]) + 0.1 * np.array([0.0, 1.0])
        np.testing.assert_allclose(e.prototype, raw / np.linalg.norm(raw), atol=1e-12)
        np.testing.assert_allclose(e.prior, [0.9, 0.1], atol=1e-12)


class TestDelayedUpdate:
    def test_stored_vectors_refresh_only_at_multiples_of_k(self):
        cfg = AdaptConfig(K=2, d=2, update_strategy="delayed", delayed_k=5)
        f0 = np.array([1.0, 0.0])
        v0 = np.array([1.0, 0.0])
        cache = create_entry(CacheState(), prop_of(f0), v0)
        refresh_feat = refresh_prior = None
        for i in range(1, 10):
            f = np.array([np.cos(0.1 * i), np.sin(0.1 * i)])
            v = np.array([1.0 - 0.05 * i, 0.05 * i])
            cache = update_entry(cache, 0, prop_of(f), v, cfg)
            e = cache.entries[0]
            assert e.count == i + 1
            if i < 4:
                # skipped matches advance the counter and nothing else
                np.testing.assert_array_equal(e.prototype, f0)
                np.testing.assert_array_equal(e.prior, v0)
            elif i == 4:
                # count reached 5: this match's proposal refreshes the entry
                raw = (4 * f0 + f) / 5
                refresh_feat = raw / np.linalg.norm(raw)
                refresh_prior = (4 * v0 + v) / 5
                np.testing.assert_allclose(e.prototype, refresh_feat, atol=1e-12)
                np.testing.assert_allclose(e.prior, refresh_prior, atol=1e-12)
            elif i < 9:
                np.testing.assert_allclose(e.prototype, refresh_feat, atol=1e-12)
                np.testing.assert_allclose(e.prior, refresh_prior, atol=1e-12)
            else:
                # second refresh at count 10
                assert not np.allclose(e.prototype, refresh_feat)


class TestAdapt:
    def test_low_confidence_leaves_cache_untouched(self):
        rng = np.random.default_rng(107)
        cfg = AdaptConfig(K=4, d=6, tau1=0.9)
        cache = random_cache(rng, 3, 4, 6)
        triple = triple_for([0.4, 0.3, 0.2, 0.1], matched_index=0,
                            match_similarity=0.99, m=3)
        out = adapt(cache, random_proposal(rng, 4, 6), triple, cfg)
        assert out is cache

    def test_empty_cache_takes_create_path(self):
        rng = np.random.default_rng(109)
        cfg = AdaptConfig(K=4, d=6, tau1=0.5)
        out = adapt(CacheState(), random_proposal(rng, 4, 6),
                    triple_for([0.9, 0.1, 0.0, 0.0]), cfg)
        assert len(out) == 1 and out.created_total == 1

    def test_matched_update_touches_only_that_entry(self):
        rng = np.random.default_rng(113)
        cfg = AdaptConfig(K=4, d=6, tau1=0.5, tau2=0.8)
        cache = random_cache(rng, 5, 4, 6)
        before = cache.entries
        triple = triple_for([0.9, 0.1, 0.0, 0.0], matched_index=3,
                            match_similarity=0.85, m=5)
        out = adapt(cache, random_proposal(rng, 4, 6), triple, cfg)
        assert len(out) == 5 and out.updated_total == 1
        for i in range(5):
            if i == 3:
                assert out.entries[i] is not before[i]
            else:
                assert out.entries[i] is before[i]

    def test_below_match_threshold_creates(self):
        rng = np.random.default_rng(127)
        cfg = AdaptConfig(K=4, d=6, tau1=0.5, tau2=0.8)
        cache = random_cache(rng, 2, 4, 6)
        triple = triple_for([0.9, 0.1, 0.0, 0.0], matched_index=1,
                            match_similarity=0.4, m=2)
        out = adapt(cache, random_proposal(rng, 4, 6), triple, cfg)
        assert len(out) == 3

    def test_counters_track_absorptions(self):
        rng = np.random.default_rng(131)
        cfg = AdaptConfig(K=3, d=4, tau1=0.01, tau2=0.5)
        cache = CacheState()
        absorbed = 0
        for _ in range(300):
            prop = random_proposal(rng, 3, 4)
            sim = float(rng.uniform(-1, 1))
            triple = triple_for(random_dist(rng, 3),
                                matched_index=int(rng.integers(0, max(len(cache), 1))),
                                match_similarity=sim if len(cache) else None,
                                m=len(cache) if len(cache) else None)
            out = adapt(cache, prop, triple, cfg)
            absorbed += 1
            assert len(out) >= len(cache)
            cache = out
        assert cache.created_total + cache.updated_total == absorbed
        assert sum(e.count for e in cache.entries) == absorbed
        assert len(cache) <= cache.created_total

    def test_match_disabled_regime_creates_every_time(self):
        # a threshold above the attainable similarity range (tau2 > 1)
        # forces one entry per absorbed proposal
        rng = np.random.default_rng(137)
        cfg = AdaptConfig(K=3, d=4, tau1=0.01, tau2=1.1)
        cache = CacheState()
        for i in range(100):
            prop = random_proposal(rng, 3, 4)
            sims = None if not len(cache) else cache.prototype_matrix() @ prop.feature
            triple = triple_for(
                random_dist(rng, 3),
                matched_index=None if sims is None else int(np.argmax(sims)),
                match_similarity=None if sims is None else float(np.max(sims)),
                m=len(cache) or None)
            cache = adapt(cache, prop, triple, cfg)
            assert len(cache) == i + 1

    def test_match_forced_regime_never_creates_after_first(self):
        # a threshold below the attainable similarity range (tau2 < -1)
        # matches everything once a single entry exists
        rng = np.random.default_rng(139)
        cfg = AdaptConfig(K=3, d=4, tau1=0.01, tau2=-1.1)
        cache = CacheState()
        for _ in range(100):
            prop = random_proposal(rng, 3, 4)
            sims = None if not len(cache) else cache.prototype_matrix() @ prop.feature
            triple = triple_for(
                random_dist(rng, 3),
                matched_index=None if sims is None else int(np.argmax(sims)),
                match_similarity=None if sims is None else float(np.min(sims)),
                m=len(cache) or None)
            cache = adapt(cache, prop, triple, cfg)
        assert len(cache) == 1

    def test_prior_frozen_at_initial_prediction_when_prior_adaptation_off(self):
        rng = np.random.default_rng(149)
        cfg = AdaptConfig(K=4, d=6, tau1=0.01, tau2=-1.1, prior_adapt=False)
        cache = CacheState()
        init = np.array([0.1, 0.6, 0.2, 0.1])
        final = np.array([0.4, 0.3, 0.2, 0.1])
        triple = PredictionTriple(init_pred=init, final_pred=final)
        cache = adapt(cache, random_proposal(rng, 4, 6), triple, cfg)
        np.testing.assert_array_equal(cache.entries[0].prior, init)
        # subsequent matched updates must not move the prior
        triple = triple_for(random_dist(rng, 4), matched_index=0,
                            match_similarity=0.9, m=1)
        out = adapt(cache, random_proposal(rng, 4, 6), triple, cfg)
        np.testing.assert_array_equal(out.entries[0].prior, init)
        assert out.entries[0].count == 2
