"""Per-UAV double deep Q-learner and its ablation variants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .config import LearningParams

N_ACTIONS = 5
VARIANTS = ("dacemad", "cmad", "mad", "random")

# observation layout: x, y, h, C, e | C/C*, x*, y*, C_o/C_o* | K x (d, C, e)
DENSITY_SLICE = slice(5, 9)
NEIGHBOUR_START = 9


def observation_size(n_neighbors: int) -> int:
    return NEIGHBOUR_START + 3 * n_neighbors


@dataclass(frozen=True)
class AgentVariant:
    kind: str = "dacemad"

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"unknown variant {self.kind!r}; choose from {VARIANTS}")

    @property
    def learns(self) -> bool:
        return self.kind != "random"

    @property
    def cooperative(self) -> bool:
        """Whether the neighbourhood factor enters the reward."""
        return self.kind != "mad"

    def mask(self, obs: np.ndarray) -> np.ndarray:
        if self.kind in ("dacemad", "random"):
            return obs
        out = np.array(obs, dtype=np.float64, copy=True)
        out[..., DENSITY_SLICE] = 0.0
        if self.kind == "mad":
            out[..., NEIGHBOUR_START:] = 0.0
        return out


class ReplayBuffer:
    """Fixed-capacity ring of transitions, oldest evicted first."""

    def __init__(self, capacity: int, obs_size: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.s = np.zeros((capacity, obs_size))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, obs_size))
        self.terminal = np.zeros(capacity, dtype=bool)
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a: int, r: float, s2, terminal: bool) -> None:
        i = self._next
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.terminal[i] = terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def indices_in_order(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator):
        if batch_size > self.size:
            raise ValueError(f"cannot sample {batch_size} from {self.size} transitions")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.terminal[idx]


def greedy_action(q: np.ndarray) -> int:
    return int(np.argmax(q))  # first maximum = lowest action index


def select_action(params: nn.ParameterSet | None, obs, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the network's Q-values."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon {epsilon} outside [0, 1]")
    if params is None or rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return greedy_action(nn.forward(params, obs))


def double_q_target(r, s_next, terminal, online: nn.ParameterSet, target: nn.ParameterSet,
                    gamma: float):
    """``r`` if terminal, else ``r + gamma * Q_target(s', argmax_a Q_online(s', a))``.

    Works on a single transition or a batch.
    """
    s_next = np.asarray(s_next, dtype=np.float64)
    single = s_next.ndim == 1
    s_next = np.atleast_2d(s_next)
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    terminal = np.atleast_1d(np.asarray(terminal, dtype=bool))
    a_max = np.argmax(nn.forward(online, s_next), axis=1)
    q_eval = nn.forward(target, s_next)[np.arange(len(s_next)), a_max]
    y = np.where(terminal, r, r + gamma * q_eval)
    return float(y[0]) if single else y


def epsilon_schedule(episode: int, lp: LearningParams) -> float:
    if episode < 0:
        raise ValueError("episode must be >= 0")
    if lp.epsilon_decay_episodes == 0 or episode >= lp.epsilon_decay_episodes:
        return lp.epsilon_end
    frac = episode / lp.epsilon_decay_episodes
    return lp.epsilon_start + frac * (lp.epsilon_end - lp.epsilon_start)


@dataclass
class LearnDiagnostics:
    skipped: bool
    loss: float | None
    buffer_size: int
    learner_steps: int
    synced: bool = False


class DDQNAgent:
    """One UAV's learner: online/target networks, replay buffer, RMSprop."""

    def __init__(self, lp: LearningParams, rng: np.random.Generator,
                 variant: AgentVariant = AgentVariant(), sizes=None):
        self.lp = lp
        self.variant = variant
        self.rng = rng
        obs_size = observation_size(lp.n_neighbors)
        self.sizes = tuple(sizes) if sizes is not None else (obs_size, 128, 64, N_ACTIONS)
        if self.sizes[0] != obs_size or self.sizes[-1] != N_ACTIONS:
            raise ValueError(f"network sizes {self.sizes} do not fit {obs_size} inputs / {N_ACTIONS} actions")
        if variant.learns:
            self.online = nn.init_params(self.sizes, rng)
            self.target = self.online.copy()
            self.optimiser = nn.RMSprop(self.online, lp.learning_rate, lp.rmsprop_decay, lp.rmsprop_eps)
            self.buffer = ReplayBuffer(lp.replay_capacity, obs_size)
        else:
            self.online = self.target = None
            self.optimiser = None
            self.buffer = None
        self.learner_steps = 0

    def act(self, obs, epsilon: float) -> int:
        return select_action(self.online, self.variant.mask(obs), epsilon, self.rng)

    def remember(self, s, a: int, r: float, s2, terminal: bool) -> None:
        if self.buffer is not None:
            self.buffer.add(self.variant.mask(s), a, r, self.variant.mask(s2), terminal)

    def learn_step(self) -> LearnDiagnostics:
        if self.buffer is None or len(self.buffer) < self.lp.batch_size:
            return LearnDiagnostics(True, None, 0 if self.buffer is None else len(self.buffer),
                                    self.learner_steps)
        s, a, r, s2, term = self.buffer.sample(self.lp.batch_size, self.rng)
        y = double_q_target(r, s2, term, self.online, self.target, self.lp.discount)
        mask = np.zeros((len(a), N_ACTIONS))
        mask[np.arange(len(a)), a] = 1.0
        targets = mask * y[:, None]
        grads, loss = nn.backward(self.online, s, targets, mask)
        self.optimiser.update(self.online, grads)
        self.learner_steps += 1
        synced = self.learner_steps % self.lp.target_sync_period == 0
        if synced:
            self.target = self.online.copy()
        return LearnDiagnostics(False, loss, len(self.buffer), self.learner_steps, synced)

    def load_online(self, params: nn.ParameterSet) -> None:
        if params.sizes != self.sizes:
            raise ValueError(f"checkpoint sizes {params.sizes} != network sizes {self.sizes}")
        self.online = params
        self.target = params.copy()
