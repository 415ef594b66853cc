"""The learning agent and its environment.

The agent explores a 10-dimensional continuous box [0, 9]^10 toward a
meaningless 10-digit target; reward is the negative euclidean distance to
the target, normalized to [-1, 0]. Learning is episodic: the reference agent
is a cross-entropy method over whole per-episode action sequences
(population 32, elite fraction 0.25, Gaussian perturbation whose sigma
decays by 0.99 each episode). Any object with propose()/observe() can be
substituted for it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..util import require

DIM = 10
BOX_LO = 0.0
BOX_HI = 9.0


@dataclass
class RitualTarget:
    """The meaningless sequence of ten digits the agent chases."""

    digits: np.ndarray

    def __post_init__(self):
        self.digits = np.asarray(self.digits, dtype=float)
        require(self.digits.shape == (DIM,), f"target must have {DIM} digits")
        if np.any(self.digits != np.round(self.digits)):
            raise ValueError("target entries must be integers")
        if np.any(self.digits < 0) or np.any(self.digits > 9):
            raise ValueError("target digits must be in [0, 9]")

    @classmethod
    def random(cls, seed: int) -> "RitualTarget":
        rng = np.random.default_rng(seed)
        return cls(rng.integers(0, 10, size=DIM).astype(float))

    def to_json(self) -> list[int]:
        return [int(d) for d in self.digits]


@dataclass
class AgentState:
    """Bookkeeping snapshot of the learning loop."""

    position: np.ndarray
    episode: int = 0
    step: int = 0
    best_distance: float = np.inf
    policy_params: np.ndarray | None = None


class RitualEnv:
    """Bounded-move environment over the digit box."""

    def __init__(self, target: RitualTarget, max_step: float = 1.0,
                 start: np.ndarray | None = None):
        require(max_step > 0, "max_step must be positive")
        self.target = target
        self.max_step = max_step
        self.start = (np.full(DIM, (BOX_LO + BOX_HI) / 2.0)
                      if start is None else np.asarray(start, dtype=float))
        require(self.start.shape == (DIM,), f"start must have {DIM} entries")
        self._norm = float(np.linalg.norm(np.full(DIM, BOX_HI)))

    def distance(self, position: np.ndarray) -> float:
        return float(np.linalg.norm(position - self.target.digits))

    def reward(self, position: np.ndarray) -> float:
        return -self.distance(position) / self._norm

    def step(self, position: np.ndarray, action: np.ndarray
             ) -> tuple[np.ndarray, float]:
        action = np.asarray(action, dtype=float)
        if action.shape != (DIM,):
            raise ValueError(f"action must have {DIM} entries")
        if np.any(np.abs(action) > self.max_step + 1e-12):
            raise ValueError(f"action exceeds max_step {self.max_step}")
        new_pos = np.clip(position + action, BOX_LO, BOX_HI)
        return new_pos, self.reward(new_pos)


class Agent(Protocol):
    def propose(self) -> np.ndarray: ...
    def observe(self, score: float, sequence: np.ndarray) -> None: ...


class CrossEntropyAgent:
    """Derivative-free episodic optimizer over action sequences.

    Keeps a mean action sequence; each episode rolls out the mean plus
    Gaussian noise (clipped to the per-step bound). After every `population`
    episodes the mean is refit to the elite fraction ranked by episodic
    return. sigma0=0 degenerates to a fixed deterministic policy.
    """

    def __init__(self, steps_per_episode: int, population: int = 32,
                 elite_frac: float = 0.25, sigma0: float = 0.7,
                 sigma_decay: float = 0.99, max_step: float = 1.0,
                 seed: int = 0):
        require(steps_per_episode > 0, "steps_per_episode must be positive")
        require(population >= 1, "population must be >= 1")
        require(0 < elite_frac <= 1, "elite_frac must be in (0, 1]")
        self.steps = steps_per_episode
        self.population = population
        self.n_elite = max(1, int(round(elite_frac * population)))
        self.sigma = float(sigma0)
        self.sigma_decay = sigma_decay
        self.max_step = max_step
        self.mean = np.zeros((steps_per_episode, DIM))
        self._rng = np.random.default_rng(seed)
        self._generation: list[tuple[float, np.ndarray]] = []
        self.paused = False

    def propose(self) -> np.ndarray:
        noise = self.sigma * self._rng.standard_normal((self.steps, DIM))
        return np.clip(self.mean + noise, -self.max_step, self.max_step)

    def observe(self, score: float, sequence: np.ndarray) -> None:
        self._generation.append((score, sequence))
        if len(self._generation) >= self.population:
            self._generation.sort(key=lambda t: -t[0])
            elite = [seq for _, seq in self._generation[:self.n_elite]]
            self.mean = np.mean(elite, axis=0)
            self._generation = []
        self.sigma *= self.sigma_decay

    def set_sigma(self, value: float) -> None:
        require(value >= 0, "sigma must be >= 0")
        self.sigma = float(value)

    @property
    def policy_params(self) -> np.ndarray:
        return self.mean.ravel().copy()


@dataclass
class EpisodeSummary:
    episode: int
    best_reward: float
    final_reward: float
    best_distance: float
    final_position: np.ndarray
    best_position: np.ndarray

    def to_json(self) -> dict:
        return {
            "episode": self.episode,
            "best_reward": self.best_reward,
            "final_reward": self.final_reward,
            "best_distance": self.best_distance,
            "positions": {
                "final": [float(v) for v in self.final_position],
                "best": [float(v) for v in self.best_position],
            },
        }


def run_episode(agent, env: RitualEnv, episode: int,
                steps_per_episode: int | None = None
                ) -> tuple[list[tuple[np.ndarray, float]], EpisodeSummary]:
    """Roll out one episode and feed its return back to the agent."""
    sequence = agent.propose()
    steps = sequence.shape[0] if steps_per_episode is None else steps_per_episode
    position = env.start.copy()
    trajectory: list[tuple[np.ndarray, float]] = []
    total = 0.0
    best_reward = -np.inf
    best_pos = position.copy()
    for k in range(steps):
        position, reward = env.step(position, sequence[k])
        trajectory.append((position.copy(), reward))
        total += reward
        if reward > best_reward:
            best_reward = reward
            best_pos = position.copy()
    agent.observe(total, sequence)
    summary = EpisodeSummary(
        episode=episode,
        best_reward=best_reward,
        final_reward=trajectory[-1][1],
        best_distance=env.distance(best_pos),
        final_position=trajectory[-1][0],
        best_position=best_pos,
    )
    return trajectory, summary


def random_search_best(target: RitualTarget, n_samples: int, seed: int) -> float:
    """Best distance reached by uniform random search with the same budget."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(BOX_LO, BOX_HI, size=(n_samples, DIM))
    return float(np.min(np.linalg.norm(points - target.digits, axis=1)))
