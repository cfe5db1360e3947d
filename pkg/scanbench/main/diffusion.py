"""
Denoising diffusion over action horizons: the noise schedule, the
conditional noise-prediction MLP, forward noising, the noise-matching
loss and iterative denoising.

Schedules use the variance-preserving convention:
    alpha_bar_k = sqrt(prod_{i<=k} (1 - beta_i)),  beta_bar_k = sqrt(1 - alpha_bar_k ** 2)
    a^k = alpha_bar_k * a^0 + beta_bar_k * eps
and denoise with
    a^{k-1} = alpha_k * (a^k - gamma_k * eps_theta(a^k, k, e)) + sigma_k * z
where alpha_k = 1 / sqrt(1 - beta_k), gamma_k = beta_k / beta_bar_k and
sigma_k is the posterior standard deviation (0 at k = 1).

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import math
from dataclasses import dataclass

# pylint: disable=E0401
import numpy as np
import torch
from torch import nn
from torch.nn import functional

# pylint: disable=E0402
from .exceptions import ConfigError, NumericalError, ShapeError

DEFAULT_STEPS = 100
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
DEFAULT_REFERENCE_STEPS = 1000
MAX_BETA = 0.999
HIDDEN = (256, 256, 256)
EMBED_DIM = 128


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """Per-step coefficients, index k - 1 for step k"""
    steps: int
    beta_start: float
    beta_end: float
    reference_steps: object
    betas: np.ndarray
    alpha_bar: np.ndarray
    beta_bar: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray

    def to_dict(self):
        """Parameters needed to rebuild this schedule"""
        return {'steps': self.steps, 'beta_start': self.beta_start, 'beta_end': self.beta_end,
                'reference_steps': self.reference_steps}

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict"""
        return make_schedule(data['steps'], data['beta_start'], data['beta_end'],
                             reference_steps=data.get('reference_steps'))

    def coefficient(self, name, steps, like):
        """Gather a coefficient for integer steps (tensor), shaped to broadcast against like"""
        values = torch.as_tensor(getattr(self, name), dtype=like.dtype)[steps - 1]
        return values.reshape(values.shape + (1,) * (like.dim() - values.dim()))


def make_schedule(steps, beta_start, beta_end, reference_steps=None):
    """Linear beta ramp over `steps`. With reference_steps, the ramp is read as
    the schedule of a reference_steps-long chain and rescaled to this length."""
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise ConfigError('diffusion steps should be an integer >= 1, got ' + str(steps))
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ConfigError('betas should satisfy 0 < beta_start <= beta_end < 1, got '
                          + str(beta_start) + ', ' + str(beta_end))
    if reference_steps is not None and reference_steps < 1:
        raise ConfigError('reference steps should be >= 1, got ' + str(reference_steps))

    betas = np.linspace(beta_start, beta_end, steps, dtype=np.float64)
    if reference_steps is not None:
        betas = np.minimum(betas * (reference_steps / steps), MAX_BETA)

    keep = np.cumprod(1.0 - betas)
    alpha_bar = np.sqrt(keep)
    beta_bar = np.sqrt(1.0 - keep)
    previous_keep = np.concatenate([[1.0], keep[:-1]])
    posterior_variance = betas * (1.0 - previous_keep) / (1.0 - keep)

    return DiffusionSchedule(
        steps=int(steps),
        beta_start=float(beta_start),
        beta_end=float(beta_end),
        reference_steps=reference_steps,
        betas=betas,
        alpha_bar=alpha_bar,
        beta_bar=beta_bar,
        alpha=1.0 / np.sqrt(1.0 - betas),
        gamma=betas / beta_bar,
        sigma=np.sqrt(posterior_variance),
    )


def check_steps(schedule, steps):
    """Raise unless every step lies in [1, K]"""
    if bool((steps < 1).any()) or bool((steps > schedule.steps).any()):
        raise ConfigError('diffusion step should lie in [1, ' + str(schedule.steps) + ']')


def forward_diffuse(schedule, a0, steps, noise):
    """alpha_bar_k * a0 + beta_bar_k * noise, per sample step"""
    if a0.shape != noise.shape:
        raise ShapeError('noise shape ' + str(tuple(noise.shape)) + ' does not match actions '
                         + str(tuple(a0.shape)))
    steps = torch.as_tensor(steps, dtype=torch.long)
    check_steps(schedule, steps)
    return schedule.coefficient('alpha_bar', steps, a0) * a0 \
        + schedule.coefficient('beta_bar', steps, a0) * noise


def timestep_embedding(steps, dim, max_period=10000):
    """Sinusoidal embedding of integer steps"""
    half = dim // 2
    frequencies = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float64) / half)
    arguments = steps.to(torch.float64)[:, None] * frequencies[None]
    embedding = torch.cat([torch.cos(arguments), torch.sin(arguments)], dim=-1)
    return functional.pad(embedding, (0, dim % 2))


class NoisePredictor(nn.Module):
    """MLP: noisy horizon (flattened) + step embedding + conditioning -> predicted noise"""
    def __init__(self, horizon, action_dim, condition_dim, hidden=HIDDEN, embed_dim=EMBED_DIM):
        super().__init__()
        self.horizon = horizon
        self.action_dim = action_dim
        self.condition_dim = condition_dim
        self.embed_dim = embed_dim

        layers = []
        width = horizon * action_dim + embed_dim + condition_dim
        for size in hidden:
            layers += [nn.Linear(width, size), nn.Mish()]
            width = size
        layers.append(nn.Linear(width, horizon * action_dim))
        self.net = nn.Sequential(*layers)

    def forward(self, noisy, steps, conditioning):
        batch = noisy.shape[0]
        if noisy.shape[1:] != (self.horizon, self.action_dim):
            raise ShapeError('noise predictor expects horizons of shape '
                             + str((self.horizon, self.action_dim)) + ', got ' + str(tuple(noisy.shape[1:])))
        if conditioning.shape != (batch, self.condition_dim):
            raise ShapeError('noise predictor expects conditioning of shape '
                             + str((batch, self.condition_dim)) + ', got ' + str(tuple(conditioning.shape)))
        dtype = self.net[0].weight.dtype
        embedding = timestep_embedding(steps, self.embed_dim).to(dtype)
        inputs = torch.cat([noisy.reshape(batch, -1).to(dtype), embedding, conditioning.to(dtype)], dim=-1)
        return self.net(inputs).reshape(noisy.shape)


def noise_loss(schedule, predictor, a0, conditioning, generator, steps=None, noise=None):
    """Mean squared error between the injected noise and its prediction.
    Steps are drawn uniformly in [1, K] and noise from N(0, I) unless given."""
    batch = a0.shape[0]
    if batch == 0:
        raise ShapeError('training batch is empty')
    if steps is None:
        steps = torch.randint(1, schedule.steps + 1, (batch,), generator=generator)
    if noise is None:
        noise = torch.randn(a0.shape, generator=generator, dtype=a0.dtype)
    noisy = forward_diffuse(schedule, a0, steps, noise)
    return functional.mse_loss(predictor(noisy, steps, conditioning), noise.to(noisy.dtype))


def denoise(schedule, predictor, conditioning, generator, shape):
    """Sample horizons of `shape` (batch, N, D) by running all K reverse steps.
    predictor is any callable (a_k, steps, conditioning) -> predicted noise."""
    dtype = conditioning.dtype if conditioning.is_floating_point() else torch.float32
    actions = torch.randn(shape, generator=generator, dtype=dtype)
    for step in range(schedule.steps, 0, -1):
        steps = torch.full((shape[0],), step, dtype=torch.long)
        predicted = predictor(actions, steps, conditioning)
        actions = float(schedule.alpha[step - 1]) * (actions - float(schedule.gamma[step - 1]) * predicted)
        if step > 1:
            actions = actions + float(schedule.sigma[step - 1]) * torch.randn(shape, generator=generator,
                                                                              dtype=dtype)
        if not bool(torch.isfinite(actions).all()):
            raise NumericalError('non-finite horizon at denoising step ' + str(step))
    return actions
