"""Reference implementations used as test oracles."""


def brute_force_prf(pred, gold, n):
    # independent per-character confusion count
    tp = fp = fn = 0
    for i in range(n):
        p = any(a <= i < b for a, b in pred)
        g = any(a <= i < b for a, b in gold)
        tp += p and g
        fp += p and not g
        fn += g and not p
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, f1, tp, fp, fn
