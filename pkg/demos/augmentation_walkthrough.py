"""Step through the training augmentation chain on one synthetic image.

Shows the intermediate shapes and value ranges, then demonstrates the
determinism contract: the same seed gives the same crop, flip, and
brightness draw, a different seed gives different ones.
"""

import numpy as np

from lesionflow.imaging import (
    AugmentConfig,
    augment_eval,
    augment_train,
    resize,
    center_crop,
    normalize,
    white_patch_retinex,
)

CFG = AugmentConfig(resize_w=60, resize_h=45, center_crop=32, random_crop=24,
                    brightness_delta=0.1, flip_prob=0.5)


def main():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (90, 120, 3)).astype(np.uint8)
    print(f"input           {img.shape} uint8")

    step = resize(img, CFG.resize_w, CFG.resize_h)
    print(f"resized         {step.shape}")
    step = white_patch_retinex(step)
    print(f"color constancy {step.shape} max {step.max()}")
    unit = normalize(step)
    print(f"normalized      {unit.shape} range [{unit.min():.3f}, {unit.max():.3f}]")
    cropped = center_crop(unit, CFG.center_crop, CFG.center_crop)
    print(f"center crop     {cropped.shape}")

    # the random tail: flips, random crop, brightness, one rng per image
    out_a = augment_train(img, CFG, np.random.default_rng(7))
    out_b = augment_train(img, CFG, np.random.default_rng(7))
    out_c = augment_train(img, CFG, np.random.default_rng(8))
    print(f"train output    {out_a.shape} range [{out_a.min():.3f}, {out_a.max():.3f}]")
    print("same seed reproduces exactly:", np.array_equal(out_a, out_b))
    print("different seed differs:      ", not np.array_equal(out_a, out_c))

    # evaluation path has no randomness at all
    ev_a = augment_eval(img, CFG)
    ev_b = augment_eval(img, CFG)
    print(f"eval output     {ev_a.shape}, deterministic:",
          np.array_equal(ev_a, ev_b))


if __name__ == "__main__":
    main()
