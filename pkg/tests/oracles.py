"""Independent reference implementations shared by the unit and acceptance tests."""

import numpy as np


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def brute_knn(coords, k):
    n = len(coords)
    out = np.zeros((n, k), dtype=int)
    for i in range(n):
        cands = []
        for j in range(n):
            if j != i:
                d = sum((coords[j][c] - coords[i][c]) ** 2 for c in range(3))
                cands.append((d, j))
        cands.sort()
        out[i] = [j for _, j in cands[:k]]
    return out


def brute_scan(s1, s2, entry, exit_):
    """Search-based oracle: find the next arming frame, then the next firing frame after it."""
    count, triggers, pos = 0, [], 0
    n = len(s1)
    while pos < n:
        arm = next((t for t in range(pos, n) if s1[t] > entry), None)
        if arm is None:
            break
        fire = next((u for u in range(arm + 1, n) if s2[u] > entry and s1[u] < exit_), None)
        if fire is None:
            break
        count += 1
        triggers.append((arm, fire))
        pos = fire + 1
    return count, triggers


def crafted_series(rng, entry=0.5, exit_=0.5):
    """Random cycles of I then II spikes over sub-threshold noise, with stray spikes mixed in."""
    low = min(entry, exit_)
    parts1, parts2 = [], []
    for _ in range(int(rng.integers(0, 8))):
        gap = int(rng.integers(1, 6))
        parts1.append(rng.uniform(0, low, gap))
        parts2.append(rng.uniform(0, low, gap))
        kind = rng.random()
        if kind < 0.6:      # full cycle
            parts1.append([rng.uniform(entry, 1), rng.uniform(0, low)])
            parts2.append([rng.uniform(0, low), rng.uniform(entry, 1)])
        elif kind < 0.8:    # stray pose-II spike
            parts1.append([rng.uniform(0, low)])
            parts2.append([rng.uniform(entry, 1)])
        else:               # pose-I spike, pose-II spike while pose I still high
            parts1.append([rng.uniform(entry, 1), rng.uniform(max(exit_, entry), 1)])
            parts2.append([rng.uniform(0, low), rng.uniform(entry, 1)])
    if not parts1:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(parts1), np.concatenate(parts2)
