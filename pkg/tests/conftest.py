import numpy as np
import pytest

from mmms.dataset import generate_synthetic
from mmms.masks import BinaryMask


@pytest.fixture(scope="session")
def tiny_adjacent_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds-adjacent")
    return generate_synthetic(root, seed=11, count=3, surfaces_per_image=3,
                              overlap_mode="adjacent", size=(48, 48))


@pytest.fixture(scope="session")
def tiny_disjoint_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds-disjoint")
    return generate_synthetic(root, seed=11, count=3, surfaces_per_image=2,
                              overlap_mode="disjoint", size=(48, 48))


def erode(mask: BinaryMask, iterations: int = 1) -> BinaryMask:
    from scipy import ndimage

    return BinaryMask(ndimage.binary_erosion(mask.data, iterations=iterations))


def square_mask(h: int, w: int, r0: int, c0: int, size: int) -> BinaryMask:
    grid = np.zeros((h, w), bool)
    grid[r0 : r0 + size, c0 : c0 + size] = True
    return BinaryMask(grid)
