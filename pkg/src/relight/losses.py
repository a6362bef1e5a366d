"""Training objectives: image and light losses, the least-squares adversarial
pair, and the unsupervised intrinsic-decomposition constraints used when no
reflectance or shading ground truth exists.

Every loss is a pure map from tensors (plus a config) to a 0-dim tensor and is
differentiable end to end.  Totals are per-sample means, so feeding a
cross-doubled batch averages the forward and reversed halves.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import torch
import torch.nn.functional as F

from .color import OPPONENT_MATRIX
from .errors import ConfigError

PerceptualProvider = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


@dataclass(frozen=True)
class LossConfig:
    """Weights and switches for every objective.

    The boolean switches map one-to-one onto ablation rows: ``use_ssim`` and
    ``use_lpips`` trim the image loss, ``uiid_enabled`` turns the unsupervised
    intrinsic constraints on, and the four ``use_*`` flags drop individual
    constraints while leaving the rest of the objective intact.
    """

    use_ssim: bool = True
    use_lpips: bool = True
    uiid_enabled: bool = False
    use_rc: bool = True
    use_sc: bool = True
    use_scs: bool = True
    use_ir: bool = True
    lambda1: float = 2.0
    lambda2: float = 0.1
    k1: float = 0.5254
    k2: float = 0.7089
    alpha: float = 0.1
    eps: float = 1e-6
    mu_start: float = 1.0
    mu_end: float = 0.01
    mu_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "k1", "k2", "alpha", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"LossConfig.{name} must be positive")
        if self.mu_start <= 0 or self.mu_end <= 0:
            raise ConfigError("mu schedule endpoints must be positive")
        if self.mu_end > self.mu_start:
            raise ConfigError("mu schedule must decay: mu_end > mu_start")
        if not 0.0 < self.mu_fraction <= 1.0:
            raise ConfigError("mu_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "LossConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown LossConfig fields: {sorted(unknown)}")
        return cls(**payload)


def _require_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def _as_nchw(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 2:
        return x[None, None]
    if x.dim() == 3:
        return x[None]
    if x.dim() == 4:
        return x
    raise ValueError(f"expected a 2D/3D/4D tensor, got {x.dim()}D")


def _gaussian_window(size: int, sigma: float, dtype, device) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype, device=device) - (size - 1) / 2.0
    g = torch.exp(-(coords * coords) / (2.0 * sigma * sigma))
    g = g / g.sum()
    return g[:, None] * g[None, :]


def ssim(
    x: torch.Tensor,
    y: torch.Tensor,
    window_size: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    data_range: float = 1.0,
) -> torch.Tensor:
    """Windowed structural similarity, channel-averaged, in [-1, 1].

    The window shrinks to fit images smaller than ``window_size`` (kept odd)
    so the 8x8 inputs used by the gradient checks still work.
    """
    _require_same_shape(x, y, "ssim")
    x = _as_nchw(x)
    y = _as_nchw(y)
    channels = x.shape[1]
    win = min(window_size, x.shape[2], x.shape[3])
    if win % 2 == 0:
        win -= 1
    if win < 1:
        raise ValueError("ssim: image too small for any window")
    kernel = _gaussian_window(win, sigma, x.dtype, x.device)
    weight = kernel.expand(channels, 1, win, win).contiguous()

    def _filt(t: torch.Tensor) -> torch.Tensor:
        return F.conv2d(t, weight, groups=channels)

    mu_x = _filt(x)
    mu_y = _filt(y)
    sigma_x = _filt(x * x) - mu_x * mu_x
    sigma_y = _filt(y * y) - mu_y * mu_y
    sigma_xy = _filt(x * y) - mu_x * mu_y
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2)
    return (num / den).mean()


class RandomFeatureDistance:
    """Deterministic stand-in for a learned perceptual metric.

    Fixed random conv filters (seeded, generated once) extract features at a
    few scales; features are unit-normalized per channel and compared in mean
    squared error.  Zero for identical inputs, symmetric, and differentiable.
    A learned provider with the same (x, y) -> scalar signature can be swapped
    in wherever a ``provider`` argument is accepted.
    """

    def __init__(self, seed: int = 0, channels: int = 16, scales: tuple = (1, 2, 4)):
        gen = torch.Generator().manual_seed(seed)
        self.scales = tuple(scales)
        self.weights = [
            torch.randn(channels, 3, 3, 3, generator=gen, dtype=torch.float64)
            / math.sqrt(27.0)
            for _ in self.scales
        ]

    def __call__(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        x = _as_nchw(x)
        y = _as_nchw(y)
        total = x.new_zeros(())
        for scale, w in zip(self.scales, self.weights):
            xs = F.avg_pool2d(x, scale) if scale > 1 else x
            ys = F.avg_pool2d(y, scale) if scale > 1 else y
            wt = w.to(dtype=x.dtype, device=x.device)
            fx = F.conv2d(xs, wt, padding=1)
            fy = F.conv2d(ys, wt, padding=1)
            fx = fx / torch.sqrt((fx * fx).sum(dim=1, keepdim=True) + 1e-10)
            fy = fy / torch.sqrt((fy * fy).sum(dim=1, keepdim=True) + 1e-10)
            total = total + ((fx - fy) ** 2).mean()
        return total / len(self.scales)


_default_provider: Optional[RandomFeatureDistance] = None


def default_perceptual_provider() -> RandomFeatureDistance:
    global _default_provider
    if _default_provider is None:
        _default_provider = RandomFeatureDistance(seed=0)
    return _default_provider


def perceptual_distance(
    x: torch.Tensor, y: torch.Tensor, provider: Optional[PerceptualProvider] = None
) -> torch.Tensor:
    _require_same_shape(x, y, "perceptual_distance")
    if provider is None:
        provider = default_perceptual_provider()
    return provider(x, y)


def image_loss(
    pred: torch.Tensor,
    gt: torch.Tensor,
    config: Optional[LossConfig] = None,
    provider: Optional[PerceptualProvider] = None,
) -> torch.Tensor:
    """L1 plus (1 - SSIM) plus perceptual distance, per config flags."""
    config = config or LossConfig()
    _require_same_shape(pred, gt, "image_loss")
    total = (pred - gt).abs().mean()
    if config.use_ssim:
        total = total + (1.0 - ssim(pred, gt))
    if config.use_lpips:
        total = total + perceptual_distance(pred, gt, provider)
    return total


# Light encodings are (sin pan, cos pan, sin tilt, cos tilt, R, G, B).
def _direction_from_encoding(light: torch.Tensor, renormalize: bool) -> torch.Tensor:
    sp, cp = light[..., 0], light[..., 1]
    st, ct = light[..., 2], light[..., 3]
    if renormalize:
        pan_norm = torch.sqrt(sp * sp + cp * cp).clamp_min(1e-8)
        tilt_norm = torch.sqrt(st * st + ct * ct).clamp_min(1e-8)
        sp, cp = sp / pan_norm, cp / pan_norm
        st, ct = st / tilt_norm, ct / tilt_norm
    return torch.stack([ct * cp, ct * sp, st], dim=-1)


def light_loss(pred_light: torch.Tensor, gt_light: torch.Tensor) -> torch.Tensor:
    """Angular distance between light directions plus L1 on the RGB color.

    Predicted (sin, cos) pairs are renormalized before the conversion, so the
    network output need not land exactly on the unit circle.
    """
    _require_same_shape(pred_light, gt_light, "light_loss")
    if pred_light.shape[-1] != 7:
        raise ValueError(f"light encodings have 7 entries, got {pred_light.shape[-1]}")
    d_pred = _direction_from_encoding(pred_light, renormalize=True)
    d_gt = _direction_from_encoding(gt_light, renormalize=False)
    angular = (1.0 - (d_pred * d_gt).sum(dim=-1)).mean()
    color = (pred_light[..., 4:7] - gt_light[..., 4:7]).abs().mean()
    return angular + color


def f_ac(x, alpha: float = 0.1):
    """Shifted ELU, continuous at 0: x + alpha for x > 0, alpha * e^x below."""
    if not isinstance(x, torch.Tensor):
        return float(f_ac(torch.as_tensor(x, dtype=torch.float64), alpha))
    # exp runs on the clamped value so the unselected branch cannot overflow
    return torch.where(x > 0, x + alpha, alpha * torch.exp(torch.clamp(x, max=0.0)))


def _forward_diff(x: torch.Tensor, dim: int) -> torch.Tensor:
    # matches color._forward_diff: forward differences, backward at the far edge
    d = torch.diff(x, dim=dim)
    last = d.narrow(dim, d.size(dim) - 1, 1)
    return torch.cat([d, last], dim=dim)


def _gradient_magnitude(x: torch.Tensor, chroma: bool) -> torch.Tensor:
    """Per-sample mean of (|dx| + |dy|) / 2 over the selected opponent channels."""
    sel = x[:, :2] if chroma else x
    gy = _forward_diff(sel, 2).abs()
    gx = _forward_diff(sel, 3).abs()
    return ((gx + gy) / 2.0).mean(dim=(1, 2, 3))


def _to_opponent(x: torch.Tensor) -> torch.Tensor:
    m = torch.as_tensor(OPPONENT_MATRIX, dtype=x.dtype, device=x.device)
    return torch.einsum("oc,bchw->bohw", m, x)


def loss_scs(
    shading_hat: torch.Tensor,
    input_image: torch.Tensor,
    config: Optional[LossConfig] = None,
) -> torch.Tensor:
    """Shading chromaticity smoothness.

    Pushes the gradient ratio ||grad S|| / ||grad I|| in opponent space below
    the dataset means k1 (chromaticity channels) and k2 (all channels); the
    soft activation keeps a small gradient even once a ratio is under its
    threshold.  Jointly rescaling S and I leaves the ratios unchanged.
    """
    config = config or LossConfig()
    _require_same_shape(shading_hat, input_image, "loss_scs")
    s = _to_opponent(_as_nchw(shading_hat))
    i = _to_opponent(_as_nchw(input_image))
    ratio_chroma = _gradient_magnitude(s, True) / (_gradient_magnitude(i, True) + config.eps)
    ratio_all = _gradient_magnitude(s, False) / (_gradient_magnitude(i, False) + config.eps)
    per_sample = config.lambda1 * f_ac(ratio_chroma - config.k1, config.alpha) + (
        config.lambda2 * f_ac(ratio_all - config.k2, config.alpha)
    )
    return per_sample.mean()


def loss_rc(r_hat: torch.Tensor, r_hat_rev: torch.Tensor) -> torch.Tensor:
    """Reflectance consistency: both halves of a cross batch see one scene."""
    _require_same_shape(r_hat, r_hat_rev, "loss_rc")
    return (r_hat - r_hat_rev).abs().mean()


def loss_sc(
    s_ori: torch.Tensor,
    s_ori_rev: torch.Tensor,
    s_new: torch.Tensor,
    s_new_rev: torch.Tensor,
) -> torch.Tensor:
    """Shading consistency across a cross batch.

    The decomposed shading of one half and the synthesized shading of the
    other half describe the same light, so those are the pairs compared;
    pairing the two decompositions directly would compare different lights.
    """
    _require_same_shape(s_ori, s_new_rev, "loss_sc")
    _require_same_shape(s_ori_rev, s_new, "loss_sc")
    return (s_ori - s_new_rev).abs().mean() + (s_ori_rev - s_new).abs().mean()


def loss_ir(
    r_hat: torch.Tensor,
    i_relit: torch.Tensor,
    r_hat_rev: torch.Tensor,
    i_input: torch.Tensor,
    mu: float,
) -> torch.Tensor:
    """Early-training pull of each reflectance toward the other half's image."""
    _require_same_shape(r_hat, i_relit, "loss_ir")
    _require_same_shape(r_hat_rev, i_input, "loss_ir")
    return mu * ((r_hat - i_relit).abs().mean() + (r_hat_rev - i_input).abs().mean())


def mu_schedule(step: int, total_steps: int, config: Optional[LossConfig] = None) -> float:
    """Geometric decay from mu_start to mu_end over the first mu_fraction of
    training, constant afterward."""
    config = config or LossConfig()
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if step < 0:
        raise ValueError("step must be non-negative")
    t = min(step / (total_steps * config.mu_fraction), 1.0)
    return config.mu_start * (config.mu_end / config.mu_start) ** t


def generator_gan_loss(d_fake: torch.Tensor) -> torch.Tensor:
    """Least-squares generator term: push fake patches toward the real label."""
    return ((d_fake - 1.0) ** 2).mean()


def discriminator_gan_loss(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """Least-squares discriminator term over real and fake patch maps."""
    return 0.5 * (((d_real - 1.0) ** 2).mean() + (d_fake * d_fake).mean())


def supervised_terms(
    outputs,
    batch,
    config: Optional[LossConfig] = None,
    provider: Optional[PerceptualProvider] = None,
    d_fake: Optional[torch.Tensor] = None,
) -> dict:
    """Named terms of the supervised objective.

    Intrinsic terms appear only when both the prediction and its ground truth
    exist, so a batch without stored reflectance/shading falls back to the
    trimmed objective automatically.
    """
    config = config or LossConfig()
    terms = {"relit": image_loss(outputs.relit_hat, batch.targets, config, provider)}
    if outputs.recon_hat is not None:
        terms["recon"] = image_loss(outputs.recon_hat, batch.inputs, config, provider)
    if outputs.reflectance_hat is not None and batch.gt_reflectance is not None:
        terms["reflectance"] = image_loss(
            outputs.reflectance_hat, batch.gt_reflectance, config, provider
        )
    if outputs.shading_ori_hat is not None and batch.gt_shading_ori is not None:
        terms["shading_ori"] = image_loss(
            outputs.shading_ori_hat, batch.gt_shading_ori, config, provider
        )
    if outputs.shading_new_hat is not None and batch.gt_shading_new is not None:
        terms["shading_new"] = image_loss(
            outputs.shading_new_hat, batch.gt_shading_new, config, provider
        )
    if outputs.light_ori_hat is not None:
        terms["light"] = light_loss(outputs.light_ori_hat, batch.original_lights)
    if d_fake is not None:
        terms["gan"] = generator_gan_loss(d_fake)
    return terms


def total_supervised(
    outputs,
    batch,
    config: Optional[LossConfig] = None,
    provider: Optional[PerceptualProvider] = None,
    d_fake: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Sum of the supervised terms (image suite + light + adversarial)."""
    return sum(supervised_terms(outputs, batch, config, provider, d_fake).values())


def unsupervised_terms(
    outputs,
    outputs_rev,
    batch,
    config: Optional[LossConfig] = None,
    mu: Optional[float] = None,
    provider: Optional[PerceptualProvider] = None,
    d_fake: Optional[torch.Tensor] = None,
    d_fake_rev: Optional[torch.Tensor] = None,
) -> dict:
    """Named terms of the objective without intrinsic ground truth.

    ``outputs``/``outputs_rev`` are the forward and reversed halves of a cross
    batch; ``batch`` is the forward half, whose targets serve as the reversed
    half's inputs.  With ``uiid_enabled`` the four decomposition constraints
    join the trimmed image/light suite.
    """
    config = config or LossConfig()
    if mu is None:
        mu = config.mu_end
    terms = {
        "relit": image_loss(outputs.relit_hat, batch.targets, config, provider),
        "relit_rev": image_loss(outputs_rev.relit_hat, batch.inputs, config, provider),
    }
    if outputs.recon_hat is not None:
        terms["recon"] = image_loss(outputs.recon_hat, batch.inputs, config, provider)
    if outputs_rev.recon_hat is not None:
        terms["recon_rev"] = image_loss(outputs_rev.recon_hat, batch.targets, config, provider)
    if outputs.light_ori_hat is not None:
        terms["light"] = light_loss(outputs.light_ori_hat, batch.original_lights)
    if outputs_rev.light_ori_hat is not None:
        terms["light_rev"] = light_loss(outputs_rev.light_ori_hat, batch.target_lights)
    if d_fake is not None:
        terms["gan"] = generator_gan_loss(d_fake)
    if d_fake_rev is not None:
        terms["gan_rev"] = generator_gan_loss(d_fake_rev)
    if not config.uiid_enabled:
        return terms

    intrinsics = (
        outputs.reflectance_hat,
        outputs.shading_ori_hat,
        outputs.shading_new_hat,
        outputs_rev.reflectance_hat,
        outputs_rev.shading_ori_hat,
        outputs_rev.shading_new_hat,
    )
    if any(t is None for t in intrinsics):
        raise ValueError("unsupervised decomposition constraints need two-stage outputs")
    if config.use_rc:
        terms["rc"] = loss_rc(outputs.reflectance_hat, outputs_rev.reflectance_hat)
    if config.use_sc:
        terms["sc"] = loss_sc(
            outputs.shading_ori_hat,
            outputs_rev.shading_ori_hat,
            outputs.shading_new_hat,
            outputs_rev.shading_new_hat,
        )
    if config.use_scs:
        terms["scs"] = loss_scs(outputs.shading_ori_hat, batch.inputs, config)
        terms["scs_rev"] = loss_scs(outputs_rev.shading_ori_hat, batch.targets, config)
    if config.use_ir:
        terms["ir"] = loss_ir(
            outputs.reflectance_hat,
            batch.targets,
            outputs_rev.reflectance_hat,
            batch.inputs,
            mu,
        )
    return terms


def total_unsupervised(
    outputs,
    outputs_rev,
    batch,
    config: Optional[LossConfig] = None,
    mu: Optional[float] = None,
    provider: Optional[PerceptualProvider] = None,
    d_fake: Optional[torch.Tensor] = None,
    d_fake_rev: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Sum of the trimmed suite on both halves plus the enabled constraints."""
    return sum(
        unsupervised_terms(
            outputs, outputs_rev, batch, config, mu, provider, d_fake, d_fake_rev
        ).values()
    )
