"""Shared fixtures: a session-wide store for expensive spectra and projections.

Heavy artifacts (dense eigendecompositions, projection recursions) are cached
on disk under SPECPART_TEST_CACHE (default: .cache/specpart-tests inside the
repo) keyed by content digests, so repeated test runs only pay once.
"""

import os

import numpy as np
import pytest

from specpart.eigenstructure import eigendecompose_principal
from specpart.pipeline import _load_projection_bundle, _store_projection_bundle
from specpart.projections import build_Aj, build_projections
from specpart.quantization import model_field_bands, model_operator, quantize
from specpart.spectral import cached_spectrum
import hashlib

from specpart.quantization import symbol_digest


class Store:
    def __init__(self, cache_dir):
        self.cache_dir = cache_dir
        os.makedirs(cache_dir, exist_ok=True)
        self._models = {}
        self._decomps = {}
        self._psets = {}
        self._records = {}

    @staticmethod
    def _key(name, depth, params):
        return (name, depth, tuple(sorted(params.items())))

    def model(self, name, depth=3, **params):
        k = self._key(name, depth, params)
        if k not in self._models:
            self._models[k] = model_operator(name, depth=depth, **params)
        return self._models[k]

    def bands(self, name, **params):
        return model_field_bands(name, params.get("eps", 0.0))

    def decomp(self, name, depth=3, **params):
        k = self._key(name, depth, params)
        if k not in self._decomps:
            xb, tb = self.bands(name, **params)
            self._decomps[k] = eigendecompose_principal(
                self.model(name, depth, **params).principal, x_band=xb, theta_band=tb
            )
        return self._decomps[k]

    def pset_ajs(self, name, depth=3, **params):
        k = self._key(name, depth, params)
        if k not in self._psets:
            sym = self.model(name, depth, **params)
            dec = self.decomp(name, depth, **params)
            xb, tb = self.bands(name, **params)
            h = hashlib.sha256()
            h.update(symbol_digest(sym).encode())
            h.update(f"|K={depth}|xb={xb}|tb={tb}|tests".encode())
            key = h.hexdigest()
            loaded = _load_projection_bundle(self.cache_dir, key, sym, dec, None)
            if loaded is None:
                pset = build_projections(sym, depth, decomp=dec, x_band=xb, theta_band=tb)
                ajs = build_Aj(sym, pset)
                _store_projection_bundle(self.cache_dir, key, pset, ajs)
                loaded = (pset, ajs)
            self._psets[k] = loaded
        return self._psets[k]

    def record(self, name, lam, with_vectors=False, depth=3, **params):
        k = (self._key(name, depth, params), lam, with_vectors)
        if k not in self._records:
            sym = self.model(name, depth, **params)
            dec = self.decomp(name, depth, **params)
            q = quantize(sym, lam)
            rec, _ = cached_spectrum(q, self.cache_dir, h_min=dec.h_min,
                                     with_vectors=with_vectors)
            self._records[k] = rec
        return self._records[k]

    def record_for(self, sym, lam, h_min=1.0, with_vectors=False, tag=""):
        k = (symbol_digest(sym), lam, with_vectors, h_min, tag)
        if k not in self._records:
            q = quantize(sym, lam)
            rec, _ = cached_spectrum(q, self.cache_dir, h_min=h_min,
                                     with_vectors=with_vectors)
            self._records[k] = rec
        return self._records[k]


@pytest.fixture(scope="session")
def store():
    root = os.environ.get("SPECPART_TEST_CACHE")
    if not root:
        root = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                            ".cache", "specpart-tests")
    return Store(root)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
