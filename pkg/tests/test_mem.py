import random
import struct

import pytest
from hypothesis import given, strategies as st

from hybridos import mem as memory
from hybridos.chunk import chunk_creator
from hybridos.errors import (
    ConsumedError, LengthMismatch, Misaligned, NotFree, OutOfBounds, OutOfRange, OutOfResources,
    OverlapError, OverlapsPriorCarve, ProtectionFault,
)
from hybridos.mem import PAGE_SIZE, MapFlags, MemorySystem, TypedFrames, TypedPages
from hybridos.rep_core import IntervalId

from oracles import MappingWorkload, first_fit, runs


@pytest.fixture
def ms():
    return MemorySystem(16, 16)


def mapping(ms, npages, pstart=None, fstart=None, flags=MapFlags.READ_WRITE):
    p = ms.pages.allocate(npages) if pstart is None else ms.pages.allocate_at(pstart, npages)
    f = ms.frames.allocate(npages) if fstart is None else ms.frames.allocate_at(fstart, npages)
    return ms.map(p, f, flags)


# init

def test_init_one_chunk_each(ms):
    assert ms.pages.free_intervals() == [(0, 15)]
    assert ms.frames.free_intervals() == [(0, 15)]
    assert len(ms.table) == 0


def test_double_init_on_same_creator_overlaps():
    pc, fc = chunk_creator(), chunk_creator()
    MemorySystem(16, 16, page_creator=pc, frame_creator=fc)
    with pytest.raises(OverlapError):
        MemorySystem(16, 16, page_creator=pc, frame_creator=fc)


def test_degenerate_init_rejected():
    with pytest.raises(ValueError):
        MemorySystem(0, 0)


def test_state_family_lookup():
    assert TypedPages[memory.Mapped] is memory.MappedPages
    assert TypedFrames[memory.Free] is memory.FreeFrames


# allocate / allocate_at

def test_allocate_first_fit(ms):
    p = ms.pages.allocate(4)
    assert (p.start, p.end) == (0, 3)
    assert ms.pages.free_intervals() == [(4, 15)]
    p.drop()


def test_allocate_exact_fit(ms):
    p = ms.pages.allocate(16)
    assert (p.start, p.end) == (0, 15)
    assert ms.pages.free_intervals() == []
    p.drop()


def test_allocate_too_many(ms):
    with pytest.raises(OutOfResources):
        ms.pages.allocate(17)
    with pytest.raises(ValueError):
        ms.pages.allocate(0)


def test_allocate_at(ms):
    f = ms.frames.allocate_at(4, 4)
    assert (f.start, f.end) == (4, 7)
    assert ms.frames.free_intervals() == [(0, 3), (8, 15)]
    with pytest.raises(NotFree):
        ms.frames.allocate_at(14, 4)
    f.drop()
    whole = ms.frames.allocate_at(0, 16)
    assert (whole.start, whole.end) == (0, 15)
    whole.drop()


@given(st.lists(st.tuples(st.booleans(), st.integers(1, 6)), max_size=25), st.integers(0, 2**32))
def test_allocator_matches_first_fit_model(ops, seed):
    rnd = random.Random(seed)
    ms = MemorySystem(16, 32)
    free = set(range(32))
    held = []
    for alloc, n in ops:
        if alloc or not held:
            want = first_fit(free, n)
            try:
                p = ms.pages.allocate(n)
            except OutOfResources:
                assert want is None
                continue
            assert p.start == want and len(p) == n
            free -= set(range(p.start, p.end + 1))
            held.append(p)
        else:
            p = held.pop(rnd.randrange(len(held)))
            free |= set(range(p.start, p.end + 1))
            p.drop()
        assert ms.pages.free_intervals() == runs(free)
    for p in held:
        p.drop()
    assert ms.pages.free_intervals() == [(0, 31)]


# map / read / write

def test_map_installs_identity_offset_entries(ms):
    m = mapping(ms, 4, 0, 8)
    assert {p: f for p, (f, _) in ms.table.entries().items()} == {0: 8, 1: 9, 2: 10, 3: 11}
    assert ms.table.duplicate_frames() == []
    assert m.frames() == [8, 9, 10, 11]
    m.drop()


def test_map_length_mismatch_keeps_inputs(ms):
    p, f = ms.pages.allocate_at(0, 4), ms.frames.allocate_at(8, 5)
    with pytest.raises(LengthMismatch):
        ms.map(p, f)
    assert p.live and f.live
    p.drop()
    f.drop()


def test_map_consumes_inputs(ms):
    p, f = ms.pages.allocate(1), ms.frames.allocate(1)
    m = ms.map(p, f)
    assert not p.live and not f.live
    with pytest.raises(ConsumedError):
        ms.map(p, f)
    m.drop()


def test_map_requires_allocated_states(ms):
    f, p = ms.frames.allocate(1), ms.pages.allocate(1)
    with pytest.raises(TypeError):
        ms.map(f, p)
    f.drop()
    p.drop()


def test_write_lands_at_frame(ms):
    m = mapping(ms, 1, 0, 5)
    m.write(0, b"AB")
    assert ms.phys.read(5 * PAGE_SIZE, 2) == b"AB"
    assert m.read(0, 2) == b"AB"
    with pytest.raises(OutOfBounds):
        m.read(PAGE_SIZE, 1)
    with pytest.raises(OutOfBounds):
        m.write(PAGE_SIZE - 1, b"xy")
    m.drop()


def test_write_spanning_pages_uses_both_frames(ms):
    m = mapping(ms, 2, 0, 3)
    m.write(PAGE_SIZE - 2, b"wxyz")
    assert ms.phys.read(4 * PAGE_SIZE - 2, 4) == b"wxyz"
    m.drop()


def test_read_only_mapping_refuses_writes(ms):
    m = mapping(ms, 1, flags=MapFlags.READ_ONLY)
    with pytest.raises(ProtectionFault):
        m.write(0, b"x")
    m.remap(MapFlags.READ_WRITE)
    m.write(0, b"x")
    m.drop()


# remap

def test_remap_keeps_frames_and_is_idempotent(ms):
    m = mapping(ms, 3)
    before = m.frames()
    m.remap(MapFlags.READ_ONLY)
    once = ms.table.entries()
    m.remap(MapFlags.READ_ONLY)
    assert ms.table.entries() == once
    assert m.frames() == before
    assert m.flags is MapFlags.READ_ONLY
    with pytest.raises(TypeError):
        m.remap("rw")
    m.drop()


@given(st.lists(st.sampled_from(list(MapFlags)), max_size=10))
def test_random_flag_sequences_never_move_frames(flags):
    ms = MemorySystem(8, 8)
    m = mapping(ms, 4, 2, 3)
    for fl in flags:
        m.remap(fl)
        assert m.frames() == [3, 4, 5, 6]
    m.drop()


# drop

def test_drop_restores_pre_map_state(ms):
    snapshot = ms.free_state()
    m = mapping(ms, 4, 0, 8)
    m.drop()
    assert len(ms.table) == 0
    assert ms.free_state() == snapshot
    with pytest.raises(ConsumedError):
        m.drop()


def test_coalesce_matches_run_model():
    rng = random.Random(3)
    for _ in range(300):
        units = rng.sample(range(40), rng.randint(0, 20))
        assert memory.coalesce(units) == runs(units)


def test_drop_with_noncontiguous_frames_yields_multiple_chunks():
    # Frames a mapping forgot are rebuilt from its PTEs alone. Swap one entry
    # between two mappings so each names a scattered frame set.
    ms = MemorySystem(16, 16)
    a = mapping(ms, 2, 0, 0)
    b = mapping(ms, 2, 2, 4)
    ms.table._clear(1)
    ms.table._clear(3)
    ms.table._insert(1, 5, MapFlags.READ_WRITE)
    ms.table._insert(3, 1, MapFlags.READ_WRITE)
    a.drop()  # frames {0, 5}
    assert ms.frames.free_intervals() == [(0, 0), (2, 3), (5, 15)]
    b.drop()  # frames {4, 1}
    assert ms.frames.free_intervals() == [(0, 15)]


def test_leaked_mapping_warns():
    ms = MemorySystem(4, 4)
    with pytest.warns(ResourceWarning):
        m = mapping(ms, 1)
        del m


# carve

def test_carve_disjoint_aligned_views(ms):
    m = mapping(ms, 1)
    a = m.carve(0, 128, 128)
    b = m.carve(128, 128, 128)
    assert a.vaddr + a.size <= b.vaddr
    with pytest.raises(Misaligned):
        m.carve(64 + 256, 128, 128)
    with pytest.raises(OutOfRange):
        m.carve(4032, 128)
    with pytest.raises(OverlapsPriorCarve):
        m.carve(100, 64)
    with pytest.raises(ValueError):
        m.carve(512, 8, 3)
    m.drop()


def test_misaligned_carve_example(ms):
    m = mapping(ms, 1)
    with pytest.raises(Misaligned):
        m.carve(64, 128, 128)
    m.drop()


def test_view_records_and_bounds(ms):
    m = mapping(ms, 1)
    layout = struct.Struct("<QI")
    v = m.carve(256, layout.size * 4, 8, layout)
    assert len(v) == 4
    v.set_record(2, 7, 9)
    assert v.record(2) == (7, 9)
    assert m.read(256 + 2 * layout.size, layout.size) == layout.pack(7, 9)
    with pytest.raises(OutOfBounds):
        v.read(v.size, 1)
    assert v.phys_addr == m.frames()[0] * PAGE_SIZE + 256
    m.drop()
    with pytest.raises(ConsumedError):
        v.read(0, 1)


@given(st.lists(st.tuples(st.integers(0, 2 * PAGE_SIZE), st.integers(1, 600),
                          st.sampled_from([1, 2, 4, 8, 64, 128])), max_size=30))
def test_carves_pairwise_disjoint_and_contained(reqs):
    ms = MemorySystem(4, 4)
    m = mapping(ms, 2)
    views = []
    for off, size, align in reqs:
        try:
            views.append(m.carve(off, size, align))
        except (OutOfRange, Misaligned, OverlapsPriorCarve):
            pass
    spans = [(v.vaddr, v.vaddr + v.size - 1) for v in views]
    for lo, hi in spans:
        assert m.vaddr <= lo and hi < m.vaddr + m.nbytes
    for i, (a, b) in enumerate(spans):
        for c, d in spans[i + 1:]:
            assert b < c or d < a
    m.drop()


# overlap-bug regression

def test_overlapping_frame_request_refused():
    ms = MemorySystem(16, 16)
    held = ms.frames.allocate_at(4, 4)
    # the historical path asked for a frame range partly inside one already handed out
    with pytest.raises(NotFree):
        ms.frames.allocate_at(6, 4)
    with pytest.raises(OverlapError):
        ms.frame_creator.create_unique_representation(IntervalId(6, 9))
    assert ms.frames.free_intervals() == [(0, 3), (8, 15)]
    held.drop()


# randomized bijectivity and reclamation

@pytest.mark.parametrize("seed", range(40))
def test_random_workloads_keep_bijection_and_reclaim(seed):
    failures, reclaimed = MappingWorkload(random.Random(seed), steps=25).run()
    assert failures == []
    assert reclaimed


def test_module_level_wrappers():
    ms = memory.init(4, 4)
    p = memory.allocate(ms.pages, 2)
    f = memory.allocate_at(ms.frames, 1, 2)
    m = memory.map_pages(p, f)
    memory.remap(m, MapFlags.READ_ONLY)
    v = memory.carve_typed(m, 0, 16)
    assert v.size == 16
    memory.drop_cascade(m)
    assert ms.free_state() == ((( 0, 3),), ((0, 3),))
