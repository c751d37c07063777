from kgrep.pathspace import Cylinder, DepthPartition, prefix_preimage, refine, shift_preimage


def names(cyls):
    return [str(c.path) for c in cyls]


def test_refine(g1, g2):
    v = Cylinder(g2.vertex("v"))
    assert names(refine(v, (0, 0))) == ["v"]
    assert names(refine(v, (1, 0))) == ["f1", "f2"]
    assert names(refine(Cylinder(g1.path("f3")), 1)) == ["f3.f3"]


def test_shift_preimage(g1, g2):
    c = Cylinder(g2.path("f1"))
    assert names(shift_preimage((0, 0), c)) == ["f1"]
    assert names(shift_preimage((0, 1), c)) == ["f1.e"]
    assert sorted(names(shift_preimage(1, Cylinder(g1.path("f3"))))) == ["f2.f3", "f3.f3"]


def test_prefix_preimage(g1, g2):
    c = Cylinder(g2.path("f1"))
    assert names(prefix_preimage(g2.vertex("v"), c)) == ["f1"]
    assert names(prefix_preimage(g2.path("e"), c)) == ["f1"]
    assert prefix_preimage(g1.path("f1"), Cylinder(g1.path("f2"))) == []
    assert prefix_preimage(g1.vertex("v2"), Cylinder(g1.path("f1"))) == []


def test_depth_partition_counts(g2):
    assert [len(DepthPartition(g2, d).atoms) for d in range(4)] == [1, 2, 4, 8]
    assert DepthPartition(g2, 3).refines(DepthPartition(g2, 2))
