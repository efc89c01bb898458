"""Synthetic traffic profiles for desk-scale experiments.

Three families:

* ``identification_profiles`` -- five classes that differ in interarrival
  scale (log-normal, distinct mu) and in packet-size mixture. Single packets
  overlap heavily; windows of a few hundred packets separate well.
* ``timing_profiles`` -- five classes with identical size mixtures whose
  bursts differ only in intra-burst gap. This is the target Eclipse's
  jitter is meant to erase.
* ``noise_profile`` -- a crowded-channel mixture of ACK/DNS/ICMP-sized
  control traffic and web transfers.
"""
from __future__ import annotations

import math

from .trace import (Distribution, SizeDistribution, SynthProfile, Trace, synthesize_trace,
                    synthetic_label, NOISE)

SIZE_SUPPORT = (90, 240, 590, 1100, 1500)

_ID_SIZE_WEIGHTS = (
    (0.10, 0.30, 0.20, 0.20, 0.20),
    (0.20, 0.10, 0.30, 0.20, 0.20),
    (0.20, 0.20, 0.10, 0.30, 0.20),
    (0.20, 0.20, 0.20, 0.10, 0.30),
    (0.30, 0.20, 0.20, 0.20, 0.10),
)
ID_BASE_MU = math.log(0.04)
ID_MU_STEP = 0.35
ID_SIGMA = 1.0

TIMING_BURST_GAPS = (20e-6, 40e-6, 60e-6, 80e-6, 100e-6)
TIMING_BURST_PROB = 0.7
TIMING_LONG_GAP = Distribution.lognormal(math.log(0.05), 0.5)
TIMING_SIZES = SizeDistribution(SIZE_SUPPORT, (0.1, 0.1, 0.2, 0.2, 0.4))


def identification_profiles(seed: int = 0) -> list[SynthProfile]:
    return [SynthProfile(Distribution.lognormal(ID_BASE_MU + k * ID_MU_STEP, ID_SIGMA),
                         SizeDistribution(SIZE_SUPPORT, w), seed * 1000 + k,
                         synthetic_label(k))
            for k, w in enumerate(_ID_SIZE_WEIGHTS)]


def timing_separation() -> float:
    """Smallest gap between two classes' intra-burst interarrival scales."""
    g = sorted(TIMING_BURST_GAPS)
    return min(b - a for a, b in zip(g, g[1:]))


def timing_profiles(seed: int = 0) -> list[SynthProfile]:
    profiles = []
    for k, gap in enumerate(TIMING_BURST_GAPS):
        burst = Distribution.lognormal(math.log(gap), 0.3)
        iat = Distribution.mixture([burst, TIMING_LONG_GAP],
                                   [TIMING_BURST_PROB, 1 - TIMING_BURST_PROB])
        profiles.append(SynthProfile(iat, TIMING_SIZES, seed * 1000 + 100 + k,
                                     synthetic_label(k)))
    return profiles


def noise_profile(seed: int = 0) -> SynthProfile:
    iat = Distribution.mixture(
        [Distribution.exponential(0.002), Distribution.lognormal(math.log(0.01), 1.0)],
        [0.6, 0.4])
    sizes = SizeDistribution((66, 90, 98, 150, 300, 590, 1500),
                             (0.43, 0.15, 0.05, 0.10, 0.10, 0.10, 0.07))
    return SynthProfile(iat, sizes, seed * 1000 + 999, NOISE)


def make_traces(profiles, n_packets: int) -> list[Trace]:
    return [synthesize_trace(p, n_packets) for p in profiles]
