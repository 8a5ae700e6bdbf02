"""Build a classification report from fabricated predictions.

Fakes a model that confuses two lesion classes and never predicts one
rare class at all, then prints the text report to show what the macro and
micro rows do with that and how undefined entries are marked.
"""

import numpy as np

from lesionflow.metrics import confusion, micro_average, report


def main():
    rng = np.random.default_rng(3)
    # 200 samples over 8 classes, heavily skewed toward class 1 (NV)
    y_true = rng.choice(8, size=200, p=(.18, .50, .12, .03, .09, .01, .01, .06))
    y_pred = y_true.copy()

    # MEL (0) and BKL (4) get confused with each other ~30% of the time
    for a, b in ((0, 4), (4, 0)):
        idx = np.flatnonzero(y_true == a)
        flip = rng.random(len(idx)) < 0.3
        y_pred[idx[flip]] = b
    # the model never outputs DF (5); those truths land on NV
    y_pred[y_true == 5] = 1

    cm = confusion(y_true, y_pred)
    rep = report(cm)
    print(rep.to_text())
    print()
    print("micro precision == accuracy:",
          micro_average(cm, "precision") == rep.accuracy)
    print("macro recall averages only classes that appear in y_true;")
    print("an asterisk marks a zero-denominator entry reported as 0.0")
    print("(DF precision here: the class was never predicted).")


if __name__ == "__main__":
    main()
