"""Independent reference implementations used as test oracles.

Nothing here imports the package's computational code; inputs are plain
tuples and lists.
"""

import math

import numpy as np


def pir_reference(frames, threshold=0.75):
    """Straight-line per-burst PIR.

    ``frames`` is a list of ``(prob, [(cls, score, x1, y1, x2, y2), ...])``.
    Returns ``(pir, iris_mean, pupil_mean, cx, cy, used, skips)`` where
    ``skips`` lists one reason per skipped frame, or ``(None, skips)`` when
    no frame is usable.
    """
    iris_sum = 0.0
    pupil_sum = 0.0
    cx_sum = 0.0
    cy_sum = 0.0
    used = 0
    skips = []
    for prob, dets in frames:
        if not prob >= threshold:
            skips.append("eye_closed")
            continue
        best = {"iris": None, "pupil": None}
        for d in dets:
            cls, score, x1, y1, x2, y2 = d
            cur = best[cls]
            area = (x2 - x1) * (y2 - y1)
            if cur is None:
                best[cls] = d
                continue
            cur_area = (cur[4] - cur[2]) * (cur[5] - cur[3])
            if score > cur[1] or (score == cur[1] and area > cur_area):
                best[cls] = d
        if best["iris"] is None or best["pupil"] is None:
            skips.append("missing_class")
            continue
        wi = best["iris"][4] - best["iris"][2]
        wp = best["pupil"][4] - best["pupil"][2]
        if wi < 1.0 or wp < 1.0:
            skips.append("degenerate_box")
            continue
        iris_sum += wi / 2
        pupil_sum += wp / 2
        cx_sum += (best["pupil"][2] + best["pupil"][4]) / 2
        cy_sum += best["pupil"][5] - wp / 2
        used += 1
    if used == 0:
        return None, skips
    iris_mean = iris_sum / used
    pupil_mean = pupil_sum / used
    return pupil_mean / iris_mean, iris_mean, pupil_mean, cx_sum / used, cy_sum / used, used, skips


def pearson_brute(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def t_two_tailed_quad(t, df):
    """Two-tailed tail mass of Student's t by integrating its density."""
    from scipy import integrate

    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)

    def dens(s):
        return c * (1 + s * s / df) ** (-(df + 1) / 2)

    # integrate the body and subtract; tails of heavy-tailed densities are
    # integrated more accurately this way for moderate |t|
    body, _ = integrate.quad(dens, 0.0, abs(t), epsabs=1e-14, epsrel=1e-13, limit=200)
    return max(0.0, 1.0 - 2.0 * body)


def auroc_pairs(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def segment_residual(s, pts):
    """Smallest distance from ``s`` to any segment between two rows of ``pts``."""
    best = math.inf
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i == j:
                continue
            a, b = pts[i], pts[j]
            ab = b - a
            den = float(ab @ ab)
            u = 0.0 if den == 0 else min(1.0, max(0.0, float((s - a) @ ab) / den))
            best = min(best, float(np.linalg.norm(a + u * ab - s)))
    return best
