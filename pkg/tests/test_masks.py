import numpy as np
import pytest

from mmms.masks import (
    BinaryMask,
    Click,
    JointMask,
    RleMask,
    assemble_interaction,
    encode_clicks,
    iou,
    joint_extract,
    joint_insert_classical,
    joint_insert_revisit,
    mask_from_json,
    mask_to_json,
    rle_decode,
    rle_encode,
)


def brute_force_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Per-pixel counter, deliberately independent of any numpy set algebra."""
    inter = union = 0
    for r in range(a.height):
        for c in range(a.width):
            x, y = bool(a.data[r, c]), bool(b.data[r, c])
            if x and y:
                inter += 1
            if x or y:
                union += 1
    if union == 0:
        return 100.0
    return 100.0 * inter / union


def brute_force_insert(joint: JointMask, surface: int, mask: BinaryMask, revisit: bool) -> np.ndarray:
    """Direct per-pixel case analysis of the two joint update rules."""
    out = np.zeros(joint.shape, np.uint16)
    for r in range(joint.height):
        for c in range(joint.width):
            current = int(joint.labels[r, c])
            if mask.data[r, c]:
                out[r, c] = surface
            elif revisit and current == surface:
                out[r, c] = 0
            else:
                out[r, c] = current
    return out


def random_mask(rng, h, w, density=0.5):
    return BinaryMask(rng.random((h, w)) < density)


class TestIou:
    def test_identity(self):
        m = BinaryMask(np.eye(4, dtype=bool))
        assert iou(m, m) == 100.0

    def test_disjoint(self):
        a = BinaryMask(np.array([[1, 0], [0, 0]], bool))
        b = BinaryMask(np.array([[0, 0], [0, 1]], bool))
        assert iou(a, b) == 0.0

    def test_partial_overlap(self):
        # intersection 1, union 3
        a = BinaryMask(np.array([[1, 1], [0, 0]], bool))
        b = BinaryMask(np.array([[0, 1], [0, 1]], bool))
        assert iou(a, b) == pytest.approx(100.0 / 3.0)

    def test_both_empty_is_perfect(self):
        assert iou(BinaryMask.zeros(3, 3), BinaryMask.zeros(3, 3)) == 100.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            iou(BinaryMask.zeros(2, 2), BinaryMask.zeros(2, 3))

    def test_matches_brute_force_on_random_masks(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            h, w = rng.integers(1, 33, 2)
            a = random_mask(rng, h, w, rng.random())
            b = random_mask(rng, h, w, rng.random())
            assert iou(a, b) == brute_force_iou(a, b)

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            a = random_mask(rng, 9, 11)
            b = random_mask(rng, 9, 11)
            assert iou(a, b) == iou(b, a)
            assert 0.0 <= iou(a, b) <= 100.0


class TestEncodeClicks:
    def test_radius_zero_sets_single_pixel(self):
        maps = encode_clicks([Click(2, 3, True)], 5, 6, radius=0)
        assert maps.positive_map.area() == 1
        assert maps.positive_map.data[2, 3]
        assert maps.negative_map.is_empty()

    def test_disk_pixel_count_matches_brute_force(self):
        maps = encode_clicks([Click(3, 3, True)], 7, 7, radius=2)
        expected = sum(
            1
            for r in range(7)
            for c in range(7)
            if (r - 3) ** 2 + (c - 3) ** 2 <= 4
        )
        assert expected == 13
        assert maps.positive_map.area() == expected

    def test_polarities_go_to_their_own_maps(self):
        clicks = [Click(2, 2, True), Click(10, 10, False)]
        maps = encode_clicks(clicks, 16, 16, radius=2)
        for r in range(16):
            for c in range(16):
                assert maps.positive_map.data[r, c] == ((r - 2) ** 2 + (c - 2) ** 2 <= 4)
                assert maps.negative_map.data[r, c] == ((r - 10) ** 2 + (c - 10) ** 2 <= 4)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            encode_clicks([Click(5, 0, True)], 5, 5, radius=1)

    def test_order_invariant(self):
        rng = np.random.default_rng(3)
        clicks = [
            Click(int(r), int(c), bool(p))
            for r, c, p in zip(rng.integers(0, 20, 12), rng.integers(0, 20, 12), rng.integers(0, 2, 12))
        ]
        a = encode_clicks(clicks, 20, 20, radius=3)
        b = encode_clicks(clicks[::-1], 20, 20, radius=3)
        assert a.positive_map == b.positive_map
        assert a.negative_map == b.negative_map

    def test_disk_clipped_at_border(self):
        maps = encode_clicks([Click(0, 0, True)], 4, 4, radius=1.5)
        assert maps.positive_map.data[0, 0]
        assert not maps.positive_map.data[2, 2]


class TestInteractionTensor:
    def test_all_zero_without_input(self):
        tensor = assemble_interaction([], BinaryMask.zeros(4, 4), radius=2)
        assert tensor.shape == (4, 4, 3)
        assert not tensor.data.any()

    def test_channel_order(self):
        prev = BinaryMask.full(8, 8)
        tensor = assemble_interaction([Click(1, 1, True), Click(6, 6, False)], prev, radius=0)
        assert tensor.data[1, 1, 0] == 1.0
        assert tensor.data[6, 6, 1] == 1.0
        assert (tensor.data[:, :, 2] == 1.0).all()

    def test_clicks_only(self):
        prev = BinaryMask.zeros(8, 8)
        tensor = assemble_interaction([Click(4, 4, True)], prev, radius=1)
        maps = encode_clicks([Click(4, 4, True)], 8, 8, radius=1)
        assert np.array_equal(tensor.data[:, :, 0] > 0, maps.positive_map.data)
        assert not tensor.data[:, :, 1].any()
        assert not tensor.data[:, :, 2].any()


class TestJointMask:
    def test_insert_into_empty(self):
        joint = JointMask.zeros(4, 4, 2)
        mask = BinaryMask(np.array([[1, 1], [1, 1]], bool).repeat(2, 0).repeat(2, 1)[:4, :4])
        out = joint_insert_classical(joint, 1, mask)
        assert (out.labels[mask.data] == 1).all()
        assert (out.labels[~mask.data] == 0).all()

    def test_classical_later_overrides_earlier(self):
        joint = JointMask.zeros(3, 3, 2)
        first = BinaryMask(np.array([[1, 1, 0], [1, 1, 0], [0, 0, 0]], bool))
        second = BinaryMask(np.array([[0, 1, 1], [0, 1, 1], [0, 0, 0]], bool))
        joint = joint_insert_classical(joint, 1, first)
        joint = joint_insert_classical(joint, 2, second)
        assert joint.labels[0, 0] == 1
        assert joint.labels[0, 1] == 2  # overlap goes to the later surface
        assert joint.labels[0, 2] == 2

    def test_classical_empty_mask_is_noop(self):
        joint = joint_insert_classical(JointMask.zeros(3, 3, 1), 1, BinaryMask.full(3, 3))
        same = joint_insert_classical(joint, 1, BinaryMask.zeros(3, 3))
        assert same == joint

    def test_revisit_shrink_clears_to_background(self):
        joint = joint_insert_classical(JointMask.zeros(3, 3, 2), 1, BinaryMask.full(3, 3))
        smaller = BinaryMask(np.array([[1, 0, 0], [0, 0, 0], [0, 0, 0]], bool))
        out = joint_insert_revisit(joint, 1, smaller)
        assert out.labels[0, 0] == 1
        assert (out.labels.ravel()[1:] == 0).all()

    def test_revisit_takes_over_other_surface(self):
        joint = joint_insert_classical(JointMask.zeros(2, 2, 2), 2, BinaryMask.full(2, 2))
        out = joint_insert_revisit(joint, 1, BinaryMask(np.array([[1, 0], [0, 0]], bool)))
        assert out.labels[0, 0] == 1
        assert out.labels[0, 1] == 2

    def test_revisit_identity_when_mask_matches(self):
        joint = joint_insert_classical(JointMask.zeros(4, 4, 2), 1, BinaryMask.full(4, 4))
        out = joint_insert_revisit(joint, 1, joint_extract(joint, 1))
        assert out == joint

    def test_extract_round_trip(self):
        rng = np.random.default_rng(11)
        joint = JointMask.zeros(8, 8, 3)
        mask = random_mask(rng, 8, 8)
        joint = joint_insert_revisit(joint, 2, mask)
        assert joint_extract(joint, 2) == mask

    def test_extract_absent_surface_empty(self):
        assert joint_extract(JointMask.zeros(4, 4, 2), 2).is_empty()

    def test_extract_full(self):
        joint = joint_insert_classical(JointMask.zeros(3, 3, 1), 1, BinaryMask.full(3, 3))
        assert joint_extract(joint, 1) == BinaryMask.full(3, 3)

    def test_invalid_surface_id(self):
        joint = JointMask.zeros(2, 2, 2)
        for surface in (0, 3, -1):
            with pytest.raises(ValueError):
                joint_insert_classical(joint, surface, BinaryMask.zeros(2, 2))
            with pytest.raises(ValueError):
                joint_insert_revisit(joint, surface, BinaryMask.zeros(2, 2))
            with pytest.raises(ValueError):
                joint_extract(joint, surface)

    def test_both_rules_match_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            h, w = rng.integers(1, 13, 2)
            surfaces = int(rng.integers(1, 5))
            joint = JointMask(rng.integers(0, surfaces + 1, (h, w)).astype(np.uint16), surfaces)
            surface = int(rng.integers(1, surfaces + 1))
            mask = random_mask(rng, h, w, rng.random())
            classical = joint_insert_classical(joint, surface, mask)
            revisit = joint_insert_revisit(joint, surface, mask)
            assert np.array_equal(classical.labels, brute_force_insert(joint, surface, mask, False))
            assert np.array_equal(revisit.labels, brute_force_insert(joint, surface, mask, True))
            assert joint_extract(revisit, surface) == mask

    def test_classical_never_shrinks_surface(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            joint = JointMask(rng.integers(0, 3, (10, 10)).astype(np.uint16), 2)
            mask = random_mask(rng, 10, 10)
            before = joint_extract(joint, 1).area()
            after = joint_extract(joint_insert_classical(joint, 1, mask), 1).area()
            assert after >= before


class TestRle:
    def test_all_zero(self):
        assert rle_encode(BinaryMask.zeros(2, 2)).counts == (4,)

    def test_all_one(self):
        assert rle_encode(BinaryMask.full(2, 2)).counts == (0, 4)

    def test_manual_pattern(self):
        mask = BinaryMask(np.array([[0, 1, 1, 0]], bool))
        assert rle_encode(mask).counts == (1, 2, 1)

    def test_round_trip_random(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            h, w = rng.integers(1, 40, 2)
            mask = random_mask(rng, h, w, rng.random())
            assert rle_decode(rle_encode(mask)) == mask

    def test_decode_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            rle_decode(RleMask(2, 2, (3,)))

    def test_json_round_trip(self):
        mask = BinaryMask(np.array([[0, 1], [1, 0]], bool))
        assert mask_from_json(mask_to_json(mask)) == mask

    def test_json_missing_field(self):
        with pytest.raises(ValueError):
            RleMask.from_json({"h": 2, "counts": [4]})


class TestValidation:
    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            BinaryMask(np.zeros((0, 4), bool))

    def test_joint_label_above_count_rejected(self):
        with pytest.raises(ValueError):
            JointMask(np.full((2, 2), 3, np.uint16), 2)

    def test_masks_are_immutable(self):
        mask = BinaryMask.zeros(2, 2)
        with pytest.raises(ValueError):
            mask.data[0, 0] = True
