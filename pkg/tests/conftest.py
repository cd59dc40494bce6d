import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaugepec.ansatz import PairZAnsatz
from gaugepec.experiments import build_design_matrix, exact_dataset, harvest_b
from gaugepec.models import (
    GateSetNoiseModel,
    QuasiLocalChannel,
)
from gaugepec.paulis import CliffordLayer
from gaugepec.quasilocal import ChannelParams, FactorSet, GeneratorSet
from gaugepec.ring import RingAnsatz


@pytest.fixture(scope="session")
def pair_ansatz():
    return PairZAnsatz()


@pytest.fixture(scope="session")
def pair_design(pair_ansatz):
    settings = pair_ansatz.plan((0, 1, 2))
    return settings, build_design_matrix(settings, pair_ansatz)


@pytest.fixture(scope="session")
def ring12():
    return RingAnsatz(12)


@pytest.fixture(scope="session")
def ring12_design(ring12):
    settings = ring12.plan()
    return settings, build_design_matrix(settings, ring12)


def random_full_model(n: int, seed: int, magnitude: float = 0.02,
                      layer_defs: dict | None = None) -> GateSetNoiseModel:
    """Random physical model over the full factor set (dense-equivalent)."""
    rng = np.random.default_rng(seed)
    K = GeneratorSet.from_factor_set(FactorSet.full(n))
    if layer_defs is None:
        layer_defs = {"cx": CliffordLayer.cnots(n, [(0, 1)])}
    prep = QuasiLocalChannel(ChannelParams.from_pattern_tau(
        "prep", K, {p: rng.uniform(0.05, 0.4) * magnitude for p in K.pattern_classes}))
    meas = QuasiLocalChannel(ChannelParams.from_pattern_tau(
        "meas", K, {p: rng.uniform(0.1, 0.8) * magnitude for p in K.pattern_classes}))
    layers = {
        lid: QuasiLocalChannel(
            ChannelParams.from_tau("g", K, rng.uniform(0, magnitude, len(K)))
        )
        for lid in layer_defs
    }
    return GateSetNoiseModel(n, prep, meas, layers, layer_defs,
                             gauge_class="per_pattern", physical=True)


def noiseless_model(n: int, layer_defs: dict) -> GateSetNoiseModel:
    K = GeneratorSet.from_factor_set(FactorSet.full(n))
    zero = lambda kind: QuasiLocalChannel(
        ChannelParams.from_tau(kind, K, np.zeros(len(K)), pattern_symmetric=True))
    return GateSetNoiseModel(
        n, zero("prep"), zero("meas"),
        {lid: zero("g") for lid in layer_defs}, layer_defs,
        gauge_class="per_pattern", physical=True,
    )
