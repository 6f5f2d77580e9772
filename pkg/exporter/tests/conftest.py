import csv

import numpy as np
import pytest
from PIL import Image


def write_toy_images(root, per_class=4, size=8, seed=0):
    """Color-coded 3-class toy set: each class saturates one RGB channel."""
    rng = np.random.default_rng(seed)
    image_dir = root / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for cls, name in enumerate(("red", "green", "blue")):
        for i in range(per_class):
            pixels = rng.integers(0, 60, size=(size, size, 3), dtype=np.uint8)
            pixels[:, :, cls] = rng.integers(180, 255, size=(size, size))
            filename = f"{name}{i}.png"
            Image.fromarray(pixels, "RGB").save(image_dir / filename)
            rows.append((filename, name))
    labels_csv = root / "labels.csv"
    with open(labels_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("filename", "label"))
        writer.writerows(rows)
    return image_dir, labels_csv


@pytest.fixture(scope="session")
def toy_images(tmp_path_factory):
    root = tmp_path_factory.mktemp("toyimgs")
    return write_toy_images(root)


@pytest.fixture(scope="session")
def single_pixel_images(tmp_path_factory):
    """Four 1x1 grayscale images over two classes (primary needs 2x2 minimum)."""
    root = tmp_path_factory.mktemp("onepixel")
    image_dir = root / "images"
    image_dir.mkdir()
    values = {"dot200": 200, "dot060": 60, "dot130": 130, "dot255": 255}
    for name, value in values.items():
        Image.fromarray(np.array([[value]], dtype=np.uint8), "L").save(
            image_dir / f"{name}.png"
        )
    labels_csv = root / "labels.csv"
    labels_csv.write_text(
        "dot200.png,bright\ndot255.png,bright\ndot060.png,dark\ndot130.png,dark\n"
    )
    return image_dir, labels_csv, values
