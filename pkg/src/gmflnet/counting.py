"""Repetition counting from per-frame salient-pose scores.

For each action the scan runs a two-state machine over the frames:

* ``AWAIT_I``: arm when the pose-I score rises above the entry threshold.
* ``AWAIT_II``: fire when the pose-II score rises above the entry threshold
  while the pose-I score is below the exit threshold; the repetition is
  counted and the machine returns to ``AWAIT_I``.

One transition at most per frame; comparisons are strict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

THRESHOLD_MODES = ("score_mean", "fixed")
MEAN_OVER = ("all", "salient")
FIRE_RULES = ("ii_above_entry_i_below_exit", "ii_above_exit")

AWAIT_I = 0
AWAIT_II = 1


@dataclass
class ScoreSeries:
    scores: np.ndarray                        # (T, O) probabilities
    actions: tuple[str, ...]                  # column 2a is pose I of action a, 2a+1 pose II

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float).reshape(-1, 2 * len(self.actions))
        if self.scores.size and (np.any(self.scores < 0) or np.any(self.scores > 1)):
            raise ValueError("scores must lie in [0, 1]")

    def columns(self, action: str) -> tuple[np.ndarray, np.ndarray]:
        a = self.actions.index(action)
        return self.scores[:, 2 * a], self.scores[:, 2 * a + 1]

    def __len__(self) -> int:
        return self.scores.shape[0]


@dataclass
class TriggerConfig:
    threshold_mode: str = "score_mean"
    entry_threshold: float = 0.5
    exit_threshold: float = 0.5
    per_action: dict[str, tuple[float, float]] = field(default_factory=dict)
    mean_over: str = "all"
    fire_rule: str = "ii_above_entry_i_below_exit"

    def __post_init__(self):
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"threshold_mode must be one of {THRESHOLD_MODES}")
        if self.mean_over not in MEAN_OVER:
            raise ValueError(f"mean_over must be one of {MEAN_OVER}")
        if self.fire_rule not in FIRE_RULES:
            raise ValueError(f"fire_rule must be one of {FIRE_RULES}")
        for t in [self.entry_threshold, self.exit_threshold,
                  *[v for pair in self.per_action.values() for v in pair]]:
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"threshold {t} outside [0, 1]")


def compute_thresholds(series: ScoreSeries, action: str,
                       trigger: TriggerConfig | None = None) -> tuple[float, float]:
    """Entry and exit thresholds for one action.

    In ``score_mean`` mode the entry threshold is the mean pose-I score and
    the exit threshold the mean pose-II score.  With ``mean_over="salient"``
    each mean covers only frames where that column is the larger of the two.
    """
    trigger = trigger or TriggerConfig()
    if trigger.threshold_mode == "fixed":
        return trigger.per_action.get(action, (trigger.entry_threshold, trigger.exit_threshold))
    if len(series) == 0:
        raise ValueError("cannot derive thresholds from an empty series")
    s1, s2 = series.columns(action)
    if trigger.mean_over == "salient":
        m1, m2 = s1 >= s2, s2 > s1
        entry = float(s1[m1].mean()) if m1.any() else float(s1.mean())
        exit_ = float(s2[m2].mean()) if m2.any() else float(s2.mean())
        return entry, exit_
    return float(s1.mean()), float(s2.mean())


def count_repetitions(series: ScoreSeries, action: str, thresholds: tuple[float, float],
                      fire_rule: str = "ii_above_entry_i_below_exit"
                      ) -> tuple[int, list[tuple[int, int]]]:
    """Scan one action's columns; return the count and (arm frame, fire frame) pairs."""
    if len(series) == 0:
        return 0, []
    s1, s2 = series.columns(action)
    return scan(s1, s2, thresholds[0], thresholds[1], fire_rule)


def scan(s1: np.ndarray, s2: np.ndarray, entry: float, exit_: float,
         fire_rule: str = "ii_above_entry_i_below_exit") -> tuple[int, list[tuple[int, int]]]:
    count, triggers, _ = _run(s1, s2, entry, exit_, fire_rule)
    return count, triggers


def final_state(s1: np.ndarray, s2: np.ndarray, entry: float, exit_: float,
                fire_rule: str = "ii_above_entry_i_below_exit") -> int:
    """Machine state after the whole series: ``AWAIT_I`` or ``AWAIT_II``."""
    return _run(s1, s2, entry, exit_, fire_rule)[2]


def _run(s1, s2, entry, exit_, fire_rule):
    state = AWAIT_I
    count = 0
    triggers: list[tuple[int, int]] = []
    armed_at = -1
    for t in range(len(s1)):
        if state == AWAIT_I:
            if s1[t] > entry:
                state = AWAIT_II
                armed_at = t
        else:
            if fire_rule == "ii_above_exit":
                fire = s2[t] > exit_
            else:
                fire = s2[t] > entry and s1[t] < exit_
            if fire:
                count += 1
                triggers.append((armed_at, t))
                state = AWAIT_I
    return count, triggers, state


@dataclass
class CountResult:
    counts: dict[str, int]
    triggers: dict[str, list[tuple[int, int]]]
    thresholds: dict[str, tuple[float, float]]
    series: ScoreSeries

    def count_for(self, action: str | None = None) -> int:
        """Count for ``action``, or for the action with the highest mean salient score."""
        if action is None:
            action = self.dominant_action()
        return self.counts[action]

    def dominant_action(self) -> str:
        means = [self.series.columns(a)[0].mean() + self.series.columns(a)[1].mean()
                 for a in self.series.actions]
        return self.series.actions[int(np.argmax(means))]


def count_series(series: ScoreSeries, trigger: TriggerConfig | None = None) -> CountResult:
    trigger = trigger or TriggerConfig()
    counts, trig, thr = {}, {}, {}
    for action in series.actions:
        th = compute_thresholds(series, action, trigger)
        c, tr = count_repetitions(series, action, th, trigger.fire_rule)
        counts[action], trig[action], thr[action] = c, tr, th
    return CountResult(counts, trig, thr, series)


def infer_and_count(model, sequence, trigger: TriggerConfig | None = None,
                    batch_size: int = 256) -> CountResult:
    """Score every frame of ``sequence`` with ``model`` and count each action."""
    coords = np.asarray(sequence.coords, dtype=float)
    if coords.shape[1] != model.skeleton.joint_count:
        raise ValueError(f"sequence has {coords.shape[1]} joints but the model's skeleton "
                         f"{model.skeleton.name!r} has {model.skeleton.joint_count}")
    seq_skel = getattr(sequence, "skeleton", None)
    if seq_skel and seq_skel != model.skeleton.name:
        raise ValueError(f"sequence skeleton {seq_skel!r} does not match model skeleton "
                         f"{model.skeleton.name!r}")
    scores = model.predict_proba(coords, batch_size=batch_size)
    return count_series(ScoreSeries(scores, tuple(model.config.actions)), trigger)
