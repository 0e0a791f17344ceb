"""Interest-evolution user simulator.

A simulated user is a latent interest vector u in [-1, 1]^C, one entry
per item category.  Each step the agent shows a single item next to an
implicit skip option; the user picks among them proportionally to mapped
relevance scores, and a click reinforces (or dampens) interest in the
clicked item's category.  Episodes run a fixed number of steps.

Raw relevances live in [-1, 1], so scores are passed through the affine
map m(x) = (x + 1) / 2 before normalizing into choice probabilities; the
same map the interest-update probabilities use.  The skip option scores
the second-largest relevance across the whole catalog (with several
items per category this equals the largest).

All randomness is drawn from named, independently seeded streams (user
sampling / choice draws / interest updates), so episode traces are
bitwise reproducible for a given seed and action sequence.
"""

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

CLICK = "click"
SKIP = "skip"


@dataclass
class EnvConfig:
    categories: int = 20
    items: int = 200
    max_steps: int = 20
    y: float = 0.3
    rewards: dict = field(default_factory=lambda: {SKIP: 0.0, CLICK: 4.0})
    target_choice: str = CLICK
    slate_k: int = 1
    seed: Optional[int] = None

    def __post_init__(self):
        if self.categories < 1 or self.items < 1:
            raise ValueError("categories and items must be positive")
        if self.items % self.categories != 0:
            raise ValueError("categories must divide items evenly")
        if not 0.0 <= self.y <= 1.0:
            raise ValueError("y must lie in [0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.slate_k != 1:
            raise ValueError("only single-item slates are supported")
        if self.target_choice not in self.rewards:
            raise ValueError("target_choice missing from rewards")

    @property
    def items_per_category(self) -> int:
        return self.items // self.categories

    def item_category(self, item_id: int) -> int:
        if not 0 <= item_id < self.items:
            raise ValueError(f"item id out of range: {item_id}")
        return item_id // self.items_per_category

    def to_json(self) -> str:
        doc = {"categories": self.categories, "items": self.items,
               "max_steps": self.max_steps, "y": self.y,
               "rewards": self.rewards, "target_choice": self.target_choice,
               "slate_k": self.slate_k, "seed": self.seed}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class Item:
    id: int
    category: int


def catalog(config: EnvConfig):
    """All items, categories assigned in contiguous even blocks."""
    return [Item(i, config.item_category(i)) for i in range(config.items)]


@dataclass
class UserState:
    interests: np.ndarray
    steps_taken: int = 0
    clicked_items: frozenset = frozenset()


@dataclass
class StepOutcome:
    choice: str
    chosen_item: Optional[int]
    reward: float
    done: bool


def sample_user(config: EnvConfig, rng) -> UserState:
    """Fresh user with interests drawn i.i.d. uniform on [-1, 1]."""
    u = rng.uniform(-1.0, 1.0, size=config.categories)
    return UserState(interests=u, steps_taken=0, clicked_items=frozenset())


def relevance(user: UserState, item: Item) -> float:
    """u . i for a one-hot category vector: the category's interest."""
    if not 0 <= item.category < user.interests.shape[0]:
        raise ValueError(f"item category out of range: {item.category}")
    return float(user.interests[item.category])


def skip_score(user: UserState, config: EnvConfig) -> float:
    """Second-largest item relevance over the whole catalog.

    Categories holding more than one item duplicate their relevance, so
    with >= 2 items in the top category this equals the maximum.
    """
    if config.items < 2:
        raise ValueError("catalog must contain at least 2 items")
    per_category = np.asarray(user.interests, dtype=np.float64)
    rel = np.repeat(per_category, config.items_per_category)
    top_two = np.partition(rel, rel.size - 2)[-2:]
    return float(top_two[0])


def _mapped(x):
    return (np.asarray(x, dtype=np.float64) + 1.0) / 2.0


def choice_probabilities(user: UserState, slate, s_u: float) -> np.ndarray:
    """Distribution over slate items plus skip (skip last).

    Scores are mapped to [0, 1] via m(x) = (x + 1) / 2 and normalized;
    if everything maps to zero the distribution degenerates to uniform.
    """
    if len(slate) == 0:
        raise ValueError("slate must be non-empty")
    raw = np.array([relevance(user, item) for item in slate] + [s_u])
    scores = _mapped(raw)
    total = scores.sum()
    if total <= 0.0:
        return np.full(scores.size, 1.0 / scores.size)
    return scores / total


def update_interest(user: UserState, consumed_item: Item, y: float, rng) -> UserState:
    """Reinforce or dampen interest in the consumed item's category.

    delta = (-y|I_c| + y) (1 - I_c); applied with sign + with probability
    (I_c + 1)/2, else -.  Only the consumed category changes; the result
    is clamped to [-1, 1] (the raw update can escape for y > 0.5).
    """
    c = consumed_item.category
    interests = user.interests.copy()
    i_c = interests[c]
    delta = (-y * abs(i_c) + y) * (1.0 - i_c)
    p_up = (relevance(user, consumed_item) + 1.0) / 2.0
    if rng.random() < p_up:
        i_new = i_c + delta
    else:
        i_new = i_c - delta
    interests[c] = min(1.0, max(-1.0, i_new))
    return replace(user, interests=interests)


class InterestEvolutionEnv:
    """Stateful episode wrapper around the pure simulator functions."""

    def __init__(self, config: EnvConfig, seed):
        self.config = config
        self._catalog = catalog(config)
        streams = np.random.SeedSequence(seed).spawn(3)
        self.rng_user = np.random.default_rng(streams[0])
        self.rng_choice = np.random.default_rng(streams[1])
        self.rng_interest = np.random.default_rng(streams[2])

    def reset(self) -> UserState:
        return sample_user(self.config, self.rng_user)

    def available_items(self, user: UserState):
        return [i for i in range(self.config.items) if i not in user.clicked_items]

    def step(self, user: UserState, slate):
        """Advance one step given a slate of item ids.

        Returns (StepOutcome, new UserState).  Clicking updates interest
        and consumes the item; skipping leaves the user unchanged apart
        from the step counter.
        """
        cfg = self.config
        if user.steps_taken >= cfg.max_steps:
            raise ValueError("episode already finished")
        items = [self._catalog[i] for i in slate]
        for item in items:
            if item.id in user.clicked_items:
                raise ValueError(f"item {item.id} was already clicked")
        s_u = skip_score(user, cfg)
        probs = choice_probabilities(user, items, s_u)
        draw = self.rng_choice.random()
        pick = int(np.searchsorted(np.cumsum(probs), draw, side="right"))
        pick = min(pick, probs.size - 1)
        steps = user.steps_taken + 1
        done = steps >= cfg.max_steps
        if pick < len(items):
            chosen = items[pick]
            new_user = update_interest(user, chosen, cfg.y, self.rng_interest)
            new_user = replace(
                new_user, steps_taken=steps,
                clicked_items=user.clicked_items | {chosen.id})
            outcome = StepOutcome(CLICK, chosen.id, float(cfg.rewards[CLICK]), done)
        else:
            new_user = replace(user, steps_taken=steps)
            outcome = StepOutcome(SKIP, None, float(cfg.rewards[SKIP]), done)
        return outcome, new_user
