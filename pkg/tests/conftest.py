import numpy as np
import pytest

from losalign.channel import ChannelInstance, NormalizedChannel


@pytest.fixture
def fig1_nc():
    """3-user channel with cross-delays 21:3, 31:1, 12:1, 32:4, 13:3, 23:0."""
    return NormalizedChannel.from_lp([[0, 1, 3], [3, 0, 0], [1, 4, 0]])


@pytest.fixture
def fig4_nc():
    """3-user channel with cross-delays 21:0, 31:1, 12:2, 32:0, 13:1, 23:-2.

    Admits density-1/2 patterns: the alternating sums are l=2, l1=1, l2=2,
    l3=2 so the 2-adic test passes with a single free seed.
    """
    return NormalizedChannel.from_lp([[0, 2, 1], [0, 0, -2], [1, 0, 0]])


@pytest.fixture
def example2_channel():
    """The worked OFDM channel: direct delays (0, 5, 9), M = 13 is valid."""
    l = [[0, 5, 4], [4, 5, 6], [5, 4, 9]]
    return ChannelInstance(K=3, L=10, l=l, h=np.ones((3, 3)))


def exhaustive_best_pattern(g, weights):
    """Independent oracle: scan all vertex subsets for the best independent set."""
    n = g.n_vertices
    adj = g.adjacency_masks()
    w = [weights[v // g.T] for v in range(n)]
    best_val, best_mask = 0, 0
    for mask in range(1 << n):
        ok = True
        m = mask
        val = 0
        while m:
            low = m & -m
            v = low.bit_length() - 1
            if adj[v] & mask:
                ok = False
                break
            val += w[v]
            m ^= low
        if ok and val > best_val:
            best_val, best_mask = val, mask
    return best_val, best_mask
