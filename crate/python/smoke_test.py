"""Smoke test for the dimerlab extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml
"""

import math

import dimerlab


def main():
    assert dimerlab.count_tilings([(i, j) for i in range(8) for j in range(8)]) == 12988816

    region = dimerlab.Region.rectangle(3, 3)
    assert len(region) == 8
    assert region.root == (0, 0)
    assert region.count_tilings() == 4

    tiling = region.sample(seed=7)
    assert tiling == region.sample(seed=7)
    assert len(tiling) == 4
    again = dimerlab.Tiling.from_text(tiling.to_text())
    assert again == tiling

    heights = region.heights(tiling)
    assert 0 in heights.values()
    assert len(heights) == len(region.predicted_mean_height())
    assert "<svg" in region.render_svg(tiling, heights=True)

    assert len(region.sample_many(seed=1, count=5, algorithm="kasteleyn")) == 5

    disk = dimerlab.Region.approximate("disk", 0.25)
    assert disk.count_tilings() > 0
    assert dimerlab.Region.from_json(disk.to_json()).cells() == disk.cells()

    g = dimerlab.g_dirichlet(0.25 + 0.5j, 0.75 + 0.5j, domain="square")
    assert abs(-16 / math.pi * g - 0.216746) < 1e-5

    p, q = 0.3 + 1.0j, -0.4 + 0.7j
    closed = dimerlab.k_point_moment([p, q])
    value, err = dimerlab.contour_moment([p, q])
    assert abs(value - closed) < 1e-6, (value, closed, err)

    xs = [0.1 + 0.2j, 1.3 - 0.4j, -0.7 + 0.9j, 2.1 + 0.05j]
    assert abs(dimerlab.pairing_det(xs) - dimerlab.pairing_sum(xs)) < 1e-9

    field = dimerlab.FreeField(modes=256)
    w = field.weights("eigen:1,1")
    assert abs(field.covariance(w, w) - 1 / (2 * math.pi**2)) < 1e-9
    draws = field.sample_pairings([w], 20000, 3)
    xs = draws[0]
    var = sum(x * x for x in xs) / len(xs)
    assert abs(var * 2 * math.pi**2 - 1) < 0.05, var

    checks = dimerlab.verify("exact", "small")
    assert [c["id"] for c in checks] == ["1", "4", "5", "6", "11", "S1"], checks
    assert all(c["passed"] for c in checks)

    print("dimerlab smoke test passed")


if __name__ == "__main__":
    main()
