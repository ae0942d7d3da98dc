import math

import numpy as np
import pytest

from opos.cluster import effective_gripping_area, filter_fitting_clusters, make_cluster
from opos.geometry import ConvexPolygon, convex_hull
from opos.graph import build_graph, enumerate_cliques, neighbor_threshold
from opos.pose import (
    GAMMAS,
    PickPose,
    PoseBatch,
    axis_samples,
    check_collision,
    collision_free_poses,
    collision_mask,
    covers_hull,
    finger_rects,
    sample_pose_batch,
    sample_poses,
)
from opos.scene import GRIPPERS, generate_layout
from oracles import raster_intersect
from scenes import CUBE, cube_scene

SHORT = GRIPPERS["short"]
EGA = effective_gripping_area(SHORT, CUBE)


def test_single_cube_grid():
    cl = make_cluster((0,), cube_scene([(190, 190)]))
    poses = sample_poses(cl, EGA)
    assert sorted({p.gamma for p in poses}) == list(GAMMAS)
    assert len(poses) == 12 * 21 * 21
    zero = [p for p in poses if p.gamma == 0.0]
    xs = sorted({round(p.x, 9) for p in zero})
    assert xs[-1] - xs[0] == pytest.approx(75.0)
    ys = sorted({round(p.y, 9) for p in zero})
    assert ys[-1] - ys[0] == pytest.approx(58.6)


def test_long_hull_skips_cross_angle():
    # hull 90 mm along world x
    cl = make_cluster((0, 1), cube_scene([(150, 150), (214.6, 150)]))
    gammas = {p.gamma for p in sample_poses(cl, EGA)}
    assert 0.0 in gammas and 90.0 not in gammas


def test_oversize_hull_gives_nothing():
    big = ConvexPolygon([(0, 0), (300, 0), (300, 300), (0, 300)])
    assert len(sample_pose_batch(big, EGA)) == 0


def test_axis_sample_rules():
    assert len(axis_samples(0, 75)) == 21
    s = axis_samples(0, 10)
    assert list(s) == pytest.approx([1, 3, 5, 7, 9])
    assert list(axis_samples(4, 4)) == [4]
    # center always included
    assert 5.0 in axis_samples(0, 10)


def test_sampling_is_deterministic():
    cl = make_cluster((0, 1), cube_scene([(150, 150), (180, 160)]))
    a, b = sample_pose_batch(cl.hull, EGA), sample_pose_batch(cl.hull, EGA)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) and np.array_equal(a.gamma, b.gamma)


def _rot(points, deg):
    t = math.radians(deg)
    r = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return np.asarray(points) @ r.T


def test_rotational_consistency():
    rng = np.random.default_rng(9)
    for _ in range(5):
        hull = convex_hull(rng.uniform(-30, 30, (8, 2)))
        base = sample_pose_batch(hull, EGA)
        turned = sample_pose_batch(convex_hull(_rot(hull.vertices, 15.0)), EGA)
        moved = _rot(np.c_[base.x, base.y], 15.0)
        key = lambda xy, g: sorted(zip(np.round(xy[:, 0], 6), np.round(xy[:, 1], 6), (g + 15.0) % 180))
        want = key(moved, base.gamma)
        got = sorted(zip(np.round(turned.x, 6), np.round(turned.y, 6), turned.gamma))
        assert len(want) == len(got)
        for w, g in zip(want, got):
            assert w == pytest.approx(g, abs=1e-5)


def test_every_pose_covers_its_cluster():
    n_checked = 0
    for seed in range(100):
        s = generate_layout(CUBE, 20, seed=seed)
        g = build_graph(s, neighbor_threshold(SHORT, CUBE))
        for cl in filter_fitting_clusters(enumerate_cliques(g, 2, 3)[:6], s, EGA):
            batch = sample_pose_batch(cl.hull, EGA)
            for i in range(0, len(batch), 37):
                assert covers_hull(batch[i], cl.hull, EGA, tol=1e-6)
                n_checked += 1
    assert n_checked > 1000


def test_finger_geometry():
    left, right = finger_rects(PickPose(100, 100, 0), SHORT)
    assert left.center.y - right.center.y == pytest.approx(84 + 10)
    assert (left.length, left.width) == (75, 10)
    l2, r2 = finger_rects(PickPose(100, 100, 90), SHORT)
    assert l2.center.x == pytest.approx(100 - 47) and r2.center.x == pytest.approx(147)


def test_collision_examples():
    s = cube_scene([(190, 190)])
    cl = make_cluster((0,), s)
    # fingers in open space
    assert not check_collision(PickPose(190, 190, 0), s, cl, SHORT)
    # finger overlapping the cube
    assert check_collision(PickPose(190, 190 - 47, 0), s, cl, SHORT)
    # finger 5 mm beyond the wall
    y_out = 380 - 42 - 10 + 5
    assert check_collision(PickPose(190, y_out, 0), s, None, SHORT)
    # flush against the wall is allowed
    assert not check_collision(PickPose(190, 380 - 52, 0), cube_scene([(190, 150)]), None, SHORT)


def test_external_object_blocks_pose():
    s = cube_scene([(190, 190), (190, 245)])
    cl = make_cluster((0,), s)
    assert check_collision(PickPose(190, 190, 0), s, cl, SHORT)
    assert not check_collision(PickPose(190, 190, 90), s, cl, SHORT)


def test_no_neighbours_keeps_everything():
    s = cube_scene([(190, 190)])
    cl = make_cluster((0,), s)
    poses = [p for p in sample_poses(cl, EGA) if p.gamma in (0.0, 90.0)]
    inner = [p for p in poses if abs(p.x - 190) < 5 and abs(p.y - 190) < 5]
    assert collision_free_poses(inner, s, cl, SHORT) == inner


def test_mask_matches_scalar_check():
    for seed in range(20):
        s = generate_layout(CUBE, 30, seed=seed)
        cl = make_cluster((0,), s)
        batch = sample_pose_batch(cl.hull, EGA)
        idx = np.arange(0, len(batch), 11)
        mask = collision_mask(batch.take(idx), s, SHORT)
        ref = [check_collision(batch[i], s, cl, SHORT) for i in idx]
        assert list(mask) == ref


def test_mask_matches_rasterization():
    rng = np.random.default_rng(12)
    s = generate_layout(CUBE, 30, seed=4)
    fps = [f.vertices for f in s.footprints]
    batch = PoseBatch(rng.uniform(60, 320, 300), rng.uniform(60, 320, 300), rng.choice(GAMMAS, 300))
    mask = collision_mask(batch, s, SHORT)
    agree = 0
    for i, pose in enumerate(batch):
        hit = False
        for rect in finger_rects(pose, SHORT):
            c = rect.corners()
            if c.min() < 0 or c[:, 0].max() > 380 or c[:, 1].max() > 380:
                hit = True
                break
            near = [f for f in fps if np.hypot(*(f.mean(0) - c.mean(0))) < 60]
            if any(raster_intersect(c, f) for f in near):
                hit = True
                break
        agree += hit == mask[i]
    assert agree >= 298
