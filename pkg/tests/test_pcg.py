import numpy as np
from hypothesis import given, strategies as st

from hashgrid.pcg import PCG32
from oracles import pcg32_ref

# first outputs of the reference pcg32-demo for seed 42, stream 54
DEMO = [0xA15C02B7, 0x7B47F409, 0xBA1D3330, 0x83D2F293, 0xBFA4784B, 0xCBED606E]


def test_reference_demo_sequence():
    assert pcg32_ref(42, 54, 6) == DEMO
    assert list(PCG32(42, 54).next_uint32(6)) == DEMO


@given(seed=st.integers(0, 2**64 - 1), stream=st.integers(0, 2**63 - 1), n=st.integers(1, 40))
def test_block_generation_matches_scalar(seed, stream, n):
    assert list(PCG32(seed, stream).next_uint32(n)) == pcg32_ref(seed, stream, n)


def test_blocks_larger_than_jump_table_continue_the_stream():
    a = PCG32(7, 3).next_uint32(40000)
    r = PCG32(7, 3)
    b = np.concatenate([r.next_uint32(16384), r.next_uint32(1), r.next_uint32(23615)])
    assert np.array_equal(a, b)
    assert list(a[-5:]) == pcg32_ref(7, 3, 40000)[-5:]


def test_advance_skips_outputs():
    a = PCG32(1, 2)
    a.advance(1000)
    b = PCG32(1, 2)
    b.next_uint32(1000)
    assert a.next_uint32(3).tolist() == b.next_uint32(3).tolist()


def test_state_roundtrip_and_streams_differ():
    r = PCG32(5, 9)
    r.next_uint32(10)
    s = r.get_state()
    x = r.random(4)
    r.set_state(s)
    assert np.array_equal(x, r.random(4))
    assert not np.array_equal(PCG32.for_worker(5, 0).next_uint32(8), PCG32.for_worker(5, 1).next_uint32(8))


def test_float_ranges():
    r = PCG32(0, 0)
    u = r.random(10**5)
    assert u.min() >= 0.0 and u.max() < 1.0
    o = r.random_open(10**5)
    assert o.min() > 0.0 and o.max() < 1.0
    k = r.integers(7, 10**5)
    assert k.min() == 0 and k.max() == 6
